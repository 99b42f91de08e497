#include "gexp/reparam.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "gexp/rng.hpp"

namespace gexp::paths {

namespace {

/// Shared state of the rebuilt coefficients; the per-stage closures all
/// point at one copy.
struct RebuildChain {
  double horizon;
  double c, C;
  double clip;     // absolute clamp on reconstructed W-increments
  double root_dt;  // sqrt(T/m), the dither's argument scale
  std::vector<CoarseFn> phi;
  std::vector<double> eps;

  /// Reconstructed W-increments of the unperturbed chain, given realized
  /// X-increments (oldest first).
  void invert(std::span<const double> d, std::vector<double>& v) const {
    v.resize(d.size());
    for (size_t k = 0; k < d.size(); ++k) {
      double u = phi[k](std::span<const double>(v.data(), k));
      u = std::clamp(u, c, C);
      v[k] = std::clamp(d[k] / u, -clip, clip);
    }
  }

  double psi(size_t i, std::span<const double> d, std::vector<double>& scratch) const {
    invert(d, scratch);
    double out = phi[i](std::span<const double>(scratch.data(), i));
    if (eps[i] != 0.0) {
      // Bounded dither: |sin| <= 1 keeps the stage-i perturbation at most
      // eps[i]; the argument scale keeps its Lipschitz constant eps[i]/sqrt(T/m).
      const double arg = i == 0 ? 1.0 : d[i - 1] / root_dt;
      out += eps[i] * std::sin(arg);
    }
    return std::clamp(out, c, C);
  }
};

}  // namespace

bool ReparamReport::within_bounds(double stderr_mult) const {
  for (size_t i = 0; i < gap_mse.size(); ++i) {
    if (gap_mse[i] > bound[i] + stderr_mult * gap_se[i]) return false;
  }
  return true;
}

Eigen::MatrixXd reparam_bound_coeffs(double horizon, const std::vector<double>& lipschitz) {
  if (!(horizon > 0.0)) throw std::invalid_argument("reparam: horizon must be positive");
  const int m = static_cast<int>(lipschitz.size());
  if (m < 1) throw std::invalid_argument("reparam: need at least one stage");
  for (double l : lipschitz)
    if (!(l >= 0.0) || !std::isfinite(l))
      throw std::invalid_argument("reparam: Lipschitz metadata missing or invalid");

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
  for (int i = 1; i < m; ++i) {
    const double li2 = lipschitz[static_cast<size_t>(i)] * lipschitz[static_cast<size_t>(i)];
    for (int j = i - 1; j >= 0; --j) {
      double inner = 1.0;
      for (int k = j + 1; k <= i - 1; ++k) inner += a(k, j);
      a(i, j) = 2.0 * horizon * li2 * inner;
    }
  }
  return a;
}

std::pair<ControlPolicy, ReparamReport> feedback_reparameterize(const WDomainBase& base,
                                                                const std::vector<double>& eps,
                                                                const ReparamOptions& opt) {
  const int m = static_cast<int>(base.phi.size());
  if (m < 1) throw std::invalid_argument("reparam: need at least one stage");
  if (!(base.c > 0.0)) throw std::invalid_argument("reparam: lower coefficient bound c must be > 0");
  if (!(base.C >= base.c)) throw std::invalid_argument("reparam: need c <= C");
  if (!(base.horizon > 0.0)) throw std::invalid_argument("reparam: horizon must be positive");
  if (static_cast<int>(base.lipschitz.size()) != m)
    throw std::invalid_argument("reparam: Lipschitz metadata missing or invalid");
  for (double l : base.lipschitz)
    if (!(l >= 0.0) || !std::isfinite(l))
      throw std::invalid_argument("reparam: Lipschitz metadata missing or invalid");
  for (const auto& f : base.phi)
    if (!f) throw std::invalid_argument("reparam: null coefficient");
  if (!eps.empty() && static_cast<int>(eps.size()) != m)
    throw std::invalid_argument("reparam: tolerance schedule must be empty or length m");
  for (double e : eps)
    if (!(e >= 0.0)) throw std::invalid_argument("reparam: tolerances must be >= 0");
  if (!(opt.clip_radius_stds > 0.0))
    throw std::invalid_argument("reparam: clip radius must be positive");
  if (opt.n_paths < 2) throw std::invalid_argument("reparam: need at least two paths");

  const double dt = base.horizon / m;
  const double root_dt = std::sqrt(dt);

  auto chain = std::make_shared<RebuildChain>();
  chain->horizon = base.horizon;
  chain->c = base.c;
  chain->C = base.C;
  chain->clip = opt.clip_radius_stds * root_dt;
  chain->root_dt = root_dt;
  chain->phi = base.phi;
  chain->eps = eps.empty() ? std::vector<double>(static_cast<size_t>(m), 0.0) : eps;

  // Certified Lipschitz bounds of the rebuilt coefficients. Stage k of the
  // inversion has gradient norm at most
  //   G_k = 1/c + (clip/c) * L_k * sqrt(sum_{l<k} G_l^2)
  // (1/c from its own increment; the rest from the coefficient it divides
  // by, whose argument is the already-rebuilt prefix). psi_i then inherits
  //   L_i * sqrt(sum_{l<i} G_l^2) + eps_i / sqrt(T/m).
  std::vector<double> g(static_cast<size_t>(m), 0.0);
  std::vector<double> eff_lip(static_cast<size_t>(m), 0.0);
  double gsumsq = 0.0;
  for (int k = 0; k < m; ++k) {
    if (k > 0) {
      eff_lip[static_cast<size_t>(k)] =
          base.lipschitz[static_cast<size_t>(k)] * std::sqrt(gsumsq) +
          chain->eps[static_cast<size_t>(k)] / root_dt;
    }
    g[static_cast<size_t>(k)] = 1.0 / base.c + (chain->clip / base.c) *
                                                   base.lipschitz[static_cast<size_t>(k)] *
                                                   std::sqrt(gsumsq);
    gsumsq += g[static_cast<size_t>(k)] * g[static_cast<size_t>(k)];
  }

  ReparamReport report;
  report.eps = chain->eps;
  report.effective_lipschitz = eff_lip;
  report.a_coeffs = reparam_bound_coeffs(base.horizon, eff_lip);
  report.b_coeffs = 2.0 * report.a_coeffs;
  for (int i = 0; i < m; ++i) report.b_coeffs(i, i) = 2.0;
  report.bound.assign(static_cast<size_t>(m), 0.0);
  for (int i = 0; i < m; ++i) {
    double b = 0.0;
    for (int j = 0; j <= i; ++j)
      b += report.b_coeffs(i, j) * report.eps[static_cast<size_t>(j)] *
           report.eps[static_cast<size_t>(j)];
    report.bound[static_cast<size_t>(i)] = b;
  }

  // Monte Carlo at the coarse granularity (exact: the coefficients only see
  // coarse increments, and those are plain Gaussians).
  std::vector<double> sum_stage(static_cast<size_t>(m), 0.0);
  std::vector<double> sumsq_stage(static_cast<size_t>(m), 0.0);
  std::vector<double> sum_gap(static_cast<size_t>(m), 0.0);
  std::vector<double> sumsq_gap(static_cast<size_t>(m), 0.0);

  std::vector<double> w(static_cast<size_t>(m));
  std::vector<double> xi(static_cast<size_t>(m));
  std::vector<double> d(static_cast<size_t>(m));
  std::vector<double> dhat(static_cast<size_t>(m));
  std::vector<double> scratch;
  for (int p = 0; p < opt.n_paths; ++p) {
    PathRng rng(opt.seed, p);
    for (int k = 0; k < m; ++k) w[static_cast<size_t>(k)] = root_dt * rng.normal();
    for (int i = 0; i < m; ++i) {
      xi[static_cast<size_t>(i)] =
          base.phi[static_cast<size_t>(i)](std::span<const double>(w.data(), static_cast<size_t>(i)));
      const double v = xi[static_cast<size_t>(i)];
      if (!(v >= base.c - 1e-12 && v <= base.C + 1e-12))
        throw std::runtime_error("reparam: base coefficient left [c, C]");
      d[static_cast<size_t>(i)] = v * w[static_cast<size_t>(i)];
    }
    for (int i = 0; i < m; ++i) {
      const double tilde = chain->psi(static_cast<size_t>(i),
                                      std::span<const double>(d.data(), static_cast<size_t>(i)),
                                      scratch);
      const double hat = chain->psi(static_cast<size_t>(i),
                                    std::span<const double>(dhat.data(), static_cast<size_t>(i)),
                                    scratch);
      dhat[static_cast<size_t>(i)] = hat * w[static_cast<size_t>(i)];
      const double ds = (tilde - xi[static_cast<size_t>(i)]) * (tilde - xi[static_cast<size_t>(i)]);
      const double dg = (hat - xi[static_cast<size_t>(i)]) * (hat - xi[static_cast<size_t>(i)]);
      sum_stage[static_cast<size_t>(i)] += ds;
      sumsq_stage[static_cast<size_t>(i)] += ds * ds;
      sum_gap[static_cast<size_t>(i)] += dg;
      sumsq_gap[static_cast<size_t>(i)] += dg * dg;
    }
  }

  const double n = static_cast<double>(opt.n_paths);
  report.stage_mse.resize(static_cast<size_t>(m));
  report.stage_se.resize(static_cast<size_t>(m));
  report.gap_mse.resize(static_cast<size_t>(m));
  report.gap_se.resize(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    const auto ui = static_cast<size_t>(i);
    report.stage_mse[ui] = sum_stage[ui] / n;
    report.gap_mse[ui] = sum_gap[ui] / n;
    const double var_s =
        std::max(0.0, (sumsq_stage[ui] / n - report.stage_mse[ui] * report.stage_mse[ui])) /
        (n - 1.0) * n;
    const double var_g =
        std::max(0.0, (sumsq_gap[ui] / n - report.gap_mse[ui] * report.gap_mse[ui])) / (n - 1.0) *
        n;
    report.stage_se[ui] = std::sqrt(var_s / n);
    report.gap_se[ui] = std::sqrt(var_g / n);
  }

  std::vector<CoarseFn> coeffs(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    coeffs[static_cast<size_t>(i)] = [chain, i](std::span<const double> dd) {
      std::vector<double> local;
      const double s = chain->psi(static_cast<size_t>(i), dd, local);
      return s * s;  // controls carry variances; the coefficients are volatility-valued
    };
  }
  ControlPolicy policy = ControlPolicy::coarse_feedback("reparam:m=" + std::to_string(m), m,
                                                        base.horizon, std::move(coeffs));
  return {std::move(policy), std::move(report)};
}

}  // namespace gexp::paths
