#include "gexp/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <utility>

namespace gexp::paths {

namespace {

std::string format_sq(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int sgn(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

ControlPolicy ControlPolicy::constant(double sigma_sq) {
  ControlPolicy p;
  p.id = "const:" + format_sq(sigma_sq);
  p.kind = Constant{sigma_sq};
  return p;
}

ControlPolicy ControlPolicy::deterministic(std::vector<double> knots, std::vector<double> sigma_sq) {
  if (knots.size() < 2 || knots.front() != 0.0)
    throw std::invalid_argument("policy: deterministic knots must start at 0 and have >= 2 entries");
  if (!std::is_sorted(knots.begin(), knots.end(), std::less_equal<>()))
    throw std::invalid_argument("policy: deterministic knots must be strictly increasing");
  if (sigma_sq.size() + 1 != knots.size())
    throw std::invalid_argument("policy: need one variance per deterministic cell");
  ControlPolicy p;
  p.id = "step:" + std::to_string(sigma_sq.size());
  p.kind = Deterministic{std::move(knots), std::move(sigma_sq)};
  return p;
}

ControlPolicy ControlPolicy::coarse_feedback(std::string id, int m, double horizon,
                                             std::vector<CoarseFn> coeffs) {
  if (m < 1) throw std::invalid_argument("policy: coarse cell count must be >= 1");
  if (!(horizon > 0.0)) throw std::invalid_argument("policy: horizon must be positive");
  if (static_cast<int>(coeffs.size()) != m)
    throw std::invalid_argument("policy: need exactly one coefficient per coarse cell");
  for (const auto& c : coeffs)
    if (!c) throw std::invalid_argument("policy: null coarse coefficient");
  ControlPolicy p;
  p.id = std::move(id);
  p.kind = CoarseFeedback{m, horizon, std::move(coeffs)};
  return p;
}

ControlPolicy ControlPolicy::dp_replay(std::string id, control::DpPolicy dp, std::vector<Mark> marks) {
  if (dp.steps.size() != static_cast<size_t>(dp.grid.n_cells()))
    throw std::invalid_argument("policy: DP surface must record one step per grid cell");
  ControlPolicy p;
  p.id = std::move(id);
  p.kind = DpReplay{std::move(dp), std::move(marks)};
  return p;
}

std::vector<double> ControlPolicy::required_knots() const {
  std::vector<double> out;
  if (const auto* d = std::get_if<Deterministic>(&kind)) {
    out.assign(d->knots.begin() + 1, d->knots.end());
  } else if (const auto* c = std::get_if<CoarseFeedback>(&kind)) {
    for (int i = 1; i < c->m; ++i) out.push_back(c->horizon * i / c->m);
  } else if (const auto* a = std::get_if<Adversary>(&kind)) {
    const int cells = 2 * a->m * a->n;
    for (int j = 1; j < cells; ++j) out.push_back(a->horizon * j / cells);
  } else if (const auto* r = std::get_if<DpReplay>(&kind)) {
    const auto& ks = r->dp.grid.knots();
    out.assign(ks.begin() + 1, ks.end() - 1);
    for (const auto& mk : r->marks)
      if (mk.time > 0.0) out.push_back(mk.time);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  }
  return out;
}

double adversary_volatility(const VolatilityBand& band, int parity, double x) {
  if (parity != 1 && parity != -1)
    throw std::invalid_argument("adversary_volatility: parity must be +1 or -1");
  if (!band.has_margin())
    throw std::invalid_argument("adversary_volatility: band must carry a margin");
  if (!band.contains(x, Margin::on))
    throw std::invalid_argument("adversary_volatility: x outside the effective band");
  const double lo = band.sigma_lo_sq();
  const double hi = band.sigma_hi_sq();
  const bool upper = x >= band.mid();
  if (parity == 1) return upper ? hi : 2.0 * x - lo;
  return upper ? 2.0 * x - hi : lo;
}

ControlPolicy adversary_policy(const VolatilityBand& band, const ControlPolicy& base_policy,
                               const Integrand& base_integrand, int n) {
  if (n < 1) throw std::invalid_argument("adversary_policy: n must be >= 1");
  if (!band.has_margin())
    throw std::invalid_argument("adversary_policy: band must carry a margin");

  const int m = base_integrand.pieces();
  const double horizon = base_integrand.horizon();
  const double tol = 1e-12 * horizon;

  // The integrand must sit on the uniform m-partition of [0, horizon].
  for (int i = 0; i <= m; ++i) {
    if (std::abs(base_integrand.knots()[static_cast<size_t>(i)] - horizon * i / m) > tol)
      throw std::invalid_argument("adversary_policy: mismatched partitions (integrand not uniform m-step)");
  }
  for (const auto& mk : base_integrand.marks()) {
    if (mk.source != MarkSource::x)
      throw std::invalid_argument("adversary_policy: integrand must read X-increments only");
    const double cells = mk.time * m / horizon;
    if (std::abs(cells - std::round(cells)) > 1e-9)
      throw std::invalid_argument("adversary_policy: integrand marks must sit on coarse boundaries");
  }

  ControlPolicy::Adversary adv;
  adv.band = band;
  adv.m = m;
  adv.horizon = horizon;
  adv.n = n;
  adv.xi = base_integrand.coefficients();
  adv.xi_marks = base_integrand.marks();

  if (const auto* c = std::get_if<ControlPolicy::Constant>(&base_policy.kind)) {
    const double sq = c->sigma_sq;
    adv.base_sq.assign(static_cast<size_t>(m), [sq](std::span<const double>) { return sq; });
  } else if (const auto* f = std::get_if<ControlPolicy::CoarseFeedback>(&base_policy.kind)) {
    if (f->m != m || std::abs(f->horizon - horizon) > tol)
      throw std::invalid_argument("adversary_policy: mismatched partitions (policy vs integrand)");
    adv.base_sq = f->coeffs;
  } else {
    throw std::invalid_argument("adversary_policy: base policy must be constant or coarse feedback");
  }

  ControlPolicy p;
  p.id = "adversary:n=" + std::to_string(n) + ":" + base_policy.id;
  p.kind = std::move(adv);
  return p;
}

struct PolicyEvaluator::Impl {
  const ControlPolicy* pol = nullptr;
  const TimeGrid* grid = nullptr;
  int next_cell = 0;

  // Coarse-feedback / adversary state, realized interval by interval.
  int coarse_i = -1;
  double a_sq = 0.0;
  int s = 0;
  double last_boundary_x = 0.0;
  std::vector<double> incs;
  std::vector<double> markbuf;

  // DP replay state.
  std::vector<double> dp_marks;
  std::vector<char> dp_mark_set;
};

PolicyEvaluator::PolicyEvaluator(const ControlPolicy& policy, const TimeGrid& grid)
    : impl_(std::make_unique<Impl>()) {
  impl_->pol = &policy;
  impl_->grid = &grid;

  for (double t : policy.required_knots()) {
    if (grid.find_knot(t) < 0)
      throw std::invalid_argument("policy: simulation grid misses a required knot (unaligned grid)");
  }

  const double tol = grid.tol();
  if (const auto* d = std::get_if<ControlPolicy::Deterministic>(&policy.kind)) {
    if (std::abs(d->knots.back() - grid.horizon()) > tol)
      throw std::invalid_argument("policy: deterministic control horizon differs from grid horizon");
  } else if (const auto* c = std::get_if<ControlPolicy::CoarseFeedback>(&policy.kind)) {
    if (std::abs(c->horizon - grid.horizon()) > tol)
      throw std::invalid_argument("policy: control horizon differs from grid horizon");
  } else if (const auto* a = std::get_if<ControlPolicy::Adversary>(&policy.kind)) {
    if (std::abs(a->horizon - grid.horizon()) > tol)
      throw std::invalid_argument("policy: control horizon differs from grid horizon");
    impl_->markbuf.assign(a->xi_marks.size(), std::numeric_limits<double>::quiet_NaN());
  } else if (const auto* r = std::get_if<ControlPolicy::DpReplay>(&policy.kind)) {
    if (std::abs(r->dp.grid.horizon() - grid.horizon()) > tol)
      throw std::invalid_argument("policy: DP surface horizon differs from grid horizon");
    impl_->dp_marks.assign(r->marks.size(), std::numeric_limits<double>::quiet_NaN());
    impl_->dp_mark_set.assign(r->marks.size(), 0);
  }
}

PolicyEvaluator::~PolicyEvaluator() = default;
PolicyEvaluator::PolicyEvaluator(PolicyEvaluator&&) noexcept = default;
PolicyEvaluator& PolicyEvaluator::operator=(PolicyEvaluator&&) noexcept = default;

double PolicyEvaluator::sigma_sq(int cell, const StateSnapshot& state) {
  Impl& im = *impl_;
  if (cell != im.next_cell)
    throw std::logic_error("policy: evaluator must be driven through cells in order from 0");
  if (cell < 0 || cell >= im.grid->n_cells())
    throw std::out_of_range("policy: cell index outside the grid");
  ++im.next_cell;

  const double t0 = im.grid->knot(cell);
  const double tm = t0 + 0.5 * im.grid->dt(cell);

  if (const auto* k = std::get_if<ControlPolicy::Constant>(&im.pol->kind)) {
    return k->sigma_sq;
  }

  if (const auto* d = std::get_if<ControlPolicy::Deterministic>(&im.pol->kind)) {
    auto it = std::upper_bound(d->knots.begin(), d->knots.end(), tm);
    const auto idx = static_cast<size_t>(it - d->knots.begin()) - 1;
    if (idx >= d->sigma_sq.size())
      throw std::logic_error("policy: cell midpoint beyond the deterministic control");
    return d->sigma_sq[idx];
  }

  const auto cross_boundary = [&](int m, double horizon, double x,
                                  const std::vector<CoarseFn>& coeffs) {
    int i = static_cast<int>(tm * m / horizon);
    i = std::clamp(i, 0, m - 1);
    if (i != im.coarse_i) {
      if (i != im.coarse_i + 1)
        throw std::logic_error("policy: coarse cells must be visited consecutively");
      if (i > 0) im.incs.push_back(x - im.last_boundary_x);
      im.last_boundary_x = x;
      im.coarse_i = i;
      im.a_sq = coeffs[static_cast<size_t>(i)](std::span<const double>(im.incs));
    }
    return i;
  };

  if (const auto* c = std::get_if<ControlPolicy::CoarseFeedback>(&im.pol->kind)) {
    cross_boundary(c->m, c->horizon, state.x, c->coeffs);
    return im.a_sq;
  }

  if (const auto* a = std::get_if<ControlPolicy::Adversary>(&im.pol->kind)) {
    // Freeze any X-snapshot whose time we are standing on before it is read.
    for (size_t j = 0; j < a->xi_marks.size(); ++j) {
      if (std::isnan(im.markbuf[j]) && std::abs(a->xi_marks[j].time - t0) <= im.grid->tol())
        im.markbuf[j] = state.x;
    }
    const int prev = im.coarse_i;
    const int i = cross_boundary(a->m, a->horizon, state.x, a->base_sq);
    if (i != prev) {
      const auto& coef = a->xi[static_cast<size_t>(i)];
      const double xi_val =
          coef.is_constant ? coef.constant : coef.fn(std::span<const double>(im.markbuf));
      im.s = sgn(xi_val);
    }
    if (im.s == 0) return im.a_sq;
    const double sub = a->horizon / (2.0 * a->m * a->n);
    int j = static_cast<int>((tm - a->horizon * i / a->m) / sub);
    j = std::clamp(j, 0, 2 * a->n - 1);
    const int parity = (j % 2 == 0) ? im.s : -im.s;
    return adversary_volatility(a->band, parity, im.a_sq);
  }

  const auto* r = std::get_if<ControlPolicy::DpReplay>(&im.pol->kind);
  if (!r) throw std::logic_error("policy: unknown control kind");
  for (size_t j = 0; j < r->marks.size(); ++j) {
    if (!im.dp_mark_set[j] && std::abs(r->marks[j].time - t0) <= im.grid->tol()) {
      im.dp_marks[j] = r->marks[j].source == MarkSource::x ? state.x : state.q;
      im.dp_mark_set[j] = 1;
    }
  }
  const auto& ks = r->dp.grid.knots();
  auto it = std::upper_bound(ks.begin(), ks.end(), tm);
  const int k = static_cast<int>(it - ks.begin()) - 1;
  if (k < 0 || k >= r->dp.grid.n_cells())
    throw std::logic_error("policy: cell midpoint beyond the DP surface");
  return r->dp.sigma_sq_at(k, state.x, state.q, std::span<const double>(im.dp_marks));
}

}  // namespace gexp::paths
