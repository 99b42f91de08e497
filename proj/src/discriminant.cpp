#include "gexp/discriminant.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "gexp/paths.hpp"
#include "gexp/policy.hpp"
#include "gexp/sign_process.hpp"
#include "gexp/solver.hpp"

namespace gexp::discriminant {

namespace {

/// Index of the first schedule entry in the tail half (the last ceil(L/2)
/// entries), over which the limsup proxy maximizes.
size_t tail_start(size_t len) { return len - (len + 1) / 2; }

struct TailMax {
  double value = 0.0;
  size_t index = 0;
};

TailMax tail_max(const std::vector<double>& per_n) {
  TailMax out;
  bool first = true;
  for (size_t i = tail_start(per_n.size()); i < per_n.size(); ++i) {
    if (first || per_n[i] > out.value) {
      out.value = per_n[i];
      out.index = i;
      first = false;
    }
  }
  return out;
}

/// True when the integrand is deterministic and its pieces form the uniform
/// partition of [0, horizon] — the shape the oscillating Monte Carlo policy
/// is built from.
bool mc_compatible(const Integrand& eta) {
  if (!eta.is_deterministic()) return false;
  const int m = eta.pieces();
  const double T = eta.horizon();
  for (int i = 0; i <= m; ++i) {
    if (std::abs(eta.knots()[static_cast<size_t>(i)] - T * i / m) > 1e-12 * T) return false;
  }
  return true;
}

EstimateReport mc_lower_bound(const VolatilityBand& band, const Integrand& eta,
                              const std::vector<int>& n_values, const DOptions& opts) {
  if (!mc_compatible(eta))
    throw std::invalid_argument(
        "estimate_d: unsupported integrand for the mc method (need a deterministic "
        "uniform-partition integrand)");
  const int m = eta.pieces();
  const double T = eta.horizon();
  for (int n : n_values) {
    if (n % (2 * m) != 0)
      throw std::invalid_argument(
          "estimate_d: mc method needs every n divisible by twice the piece count");
  }

  // The oscillation around the band midpoint reaches both band endpoints
  // exactly, so for deterministic integrands this policy is the bang-bang
  // maximiser of the signed integral. The margin only gates the domain
  // check inside the kernels; any admissible value works.
  const VolatilityBand margined(band.sigma_lo_sq(), band.sigma_hi_sq(),
                                band.has_margin() ? band.margin_eps() : 0.25 * band.width());
  const paths::ControlPolicy base = paths::ControlPolicy::constant(band.mid());

  EstimateReport report;
  report.method = "mc-lower-bound";
  for (int n : n_values) {
    const paths::ControlPolicy policy =
        paths::adversary_policy(margined, base, eta, n / (2 * m));
    const TimeGrid grid = uniform_grid(T, n);
    paths::SimOptions sim;
    sim.threads = opts.threads;
    const paths::PathBundle bundle =
        paths::simulate_paths(band, grid, policy, opts.mc_paths, opts.seed, sim);
    const Eigen::ArrayXd vals =
        paths::integrate(bundle, eta, paths::IntegrationMode::d_qv, SignProcess(n, T));
    double mean = 0.0;
    for (int p = 0; p < vals.size(); ++p) mean += vals(p);
    mean /= static_cast<double>(vals.size());
    double ss = 0.0;
    for (int p = 0; p < vals.size(); ++p) ss += (vals(p) - mean) * (vals(p) - mean);
    const double se = std::sqrt(ss / static_cast<double>(vals.size() - 1) /
                                static_cast<double>(vals.size()));
    report.schedule.push_back(n);
    report.per_n.push_back(mean);
    report.per_n_error.push_back(3.0 * se);
  }
  const TailMax best = tail_max(report.per_n);
  report.value = best.value;
  report.error_proxy = report.per_n_error[best.index];
  return report;
}

}  // namespace

DSchedule DSchedule::defaults(int m) {
  if (m < 1) throw std::invalid_argument("schedule: piece count must be >= 1");
  DSchedule s;
  for (int k : {2, 4, 8, 16, 32}) s.n_values.push_back(m * k);
  return s;
}

void DSchedule::validate(int pieces) const {
  if (pieces < 1) throw std::invalid_argument("schedule: piece count must be >= 1");
  if (n_values.empty()) throw std::invalid_argument("schedule: empty n list");
  int prev = 0;
  for (int n : n_values) {
    if (n % 2 != 0) throw std::invalid_argument("schedule with odd n");
    if (n % pieces != 0)
      throw std::invalid_argument("schedule: every n must be a multiple of the piece count");
    if (n <= prev) throw std::invalid_argument("schedule: n values must be increasing");
    prev = n;
  }
}

RefinedValue solve_refined(const VolatilityBand& band, const Integrand& eta,
                           const control::Functional& f, int n_sign_cells, Margin margin,
                           const DOptions& opts) {
  control::StateSpec spec = control::spec_for_integrand(eta);
  const std::vector<double>& bps = f.running ? f.running->breakpoints : eta.knots();

  const auto solve_at = [&](int resolution) {
    control::StateSpec s = spec;
    s.resolution = resolution;
    const TimeGrid grid = control::build_dp_grid(band, eta.horizon(), s, bps, n_sign_cells,
                                                 opts.cfl_safety, margin);
    control::SolveOptions so;
    so.margin = margin;
    so.threads = opts.threads;
    return control::solve_expectation(band, grid, s, f, so).value;
  };

  RefinedValue out;
  out.value = solve_at(opts.resolution);
  const int halved = std::max(3, (opts.resolution / 2) | 1);
  out.delta = std::abs(out.value - solve_at(halved));
  return out;
}

DEstimate estimate_d(const VolatilityBand& band, const Integrand& eta, const DSchedule& schedule,
                     DMode mode, const DOptions& opts) {
  schedule.validate(eta.pieces());
  const double T = eta.horizon();

  DEstimate out;
  if (schedule.method == Method::dp || schedule.method == Method::both) {
    EstimateReport report;
    report.method = "dp";
    for (int n : schedule.n_values) {
      const SignProcess sign(n, T);
      const control::Functional f = mode == DMode::d_qv
                                        ? control::make_qv_functional(eta, sign)
                                        : control::make_ds_functional(eta, sign);
      const RefinedValue rv = solve_refined(band, eta, f, n, Margin::off, opts);
      report.schedule.push_back(n);
      report.per_n.push_back(rv.value);
      report.per_n_error.push_back(rv.delta);
    }
    const TailMax best = tail_max(report.per_n);
    report.value = best.value;
    report.error_proxy = report.per_n_error[best.index];
    out.report = report;
  }
  if (schedule.method == Method::mc || schedule.method == Method::both) {
    if (mode != DMode::d_qv)
      throw std::invalid_argument("estimate_d: the mc method only applies to d_qv mode");
    EstimateReport mc = mc_lower_bound(band, eta, schedule.n_values, opts);
    if (schedule.method == Method::mc)
      out.report = mc;
    else
      out.mc = std::move(mc);
  }
  return out;
}

Prop31Result check_prop31(const VolatilityBand& band, const Integrand& eta,
                          const DSchedule& schedule, const DOptions& opts) {
  Prop31Result res;
  res.d = estimate_d(band, eta, schedule, DMode::d_qv, opts);

  const Integrand absf = abs_of(eta);
  const RefinedValue up = solve_refined(band, absf, control::make_ds_functional(absf), 0,
                                        Margin::off, opts);
  const Integrand neg = scaled(absf, -1.0);
  const RefinedValue dn = solve_refined(band, neg, control::make_ds_functional(neg), 0,
                                        Margin::off, opts);

  const double half_width = 0.5 * band.width();
  res.upper = half_width * up.value;
  res.lower = -half_width * dn.value;
  res.bound_tolerance = half_width * (up.delta + dn.delta);

  const double tol = res.bound_tolerance + res.d.combined_tolerance();
  res.pass = (res.lower - tol <= res.d.report.value) && (res.d.report.value <= res.upper + tol);
  return res;
}

Thm34Result check_thm34(const VolatilityBand& band, const Integrand& eta,
                        const DSchedule& schedule, double final_tol, const DOptions& opts) {
  Thm34Result res;
  res.d = estimate_d(band, eta, schedule, DMode::ds, opts);

  const double scale = eta.pieces() * eta.sup_bound() * eta.horizon();
  double c_emp = 0.0;
  for (size_t i = 0; i < res.d.report.per_n.size(); ++i) {
    const double n = res.d.report.schedule[i];
    if (scale > 0.0)
      c_emp = std::max(c_emp, std::abs(res.d.report.per_n[i]) * n / scale);
  }
  res.c_emp = c_emp;
  res.final_value = res.d.report.per_n.back();
  res.pass = c_emp <= 2.0 && std::abs(res.final_value) <= final_tol;
  return res;
}

void write_schedule_csv(const std::vector<EstimateReport>& reports, const std::string& file_path) {
  std::ofstream out(file_path);
  if (!out) throw std::runtime_error("discriminant: cannot open " + file_path + " for writing");
  out << "n,value,error_proxy,method\n";
  char buf[160];
  for (const auto& r : reports) {
    for (size_t i = 0; i < r.per_n.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%s\n", r.schedule[i], r.per_n[i],
                    r.per_n_error[i], r.method.c_str());
      out << buf;
    }
  }
  if (!out) throw std::runtime_error("discriminant: failed writing " + file_path);
}

}  // namespace gexp::discriminant
