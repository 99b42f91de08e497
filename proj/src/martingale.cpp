#include "gexp/martingale.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <vector>

#include "gexp/solver.hpp"

namespace gexp::martrep {

GMartingaleFV build_martingale(const VolatilityBand& band, const Integrand& eta) {
  return GMartingaleFV{eta, g_drift(eta, band)};
}

discriminant::RefinedValue expect_k(const VolatilityBand& band, const Integrand& eta, double scale,
                                    const discriminant::DOptions& opts) {
  const control::Functional f = control::make_k_functional(eta, band, scale);
  return discriminant::solve_refined(band, eta, f, 0, Margin::off, opts);
}

double conditional_k_sup(const VolatilityBand& band, const Integrand& eta, double s,
                         const discriminant::DOptions& opts) {
  if (!(s >= 0.0 && s < eta.horizon()))
    throw std::invalid_argument("martrep: conditioning time must lie in [0, horizon)");
  control::StateSpec spec = control::spec_for_integrand(eta);
  spec.resolution = opts.resolution;
  const control::Functional f = control::make_k_functional(eta, band);
  std::vector<double> bps = f.running->breakpoints;
  bps.push_back(s);
  const TimeGrid grid =
      control::build_dp_grid(band, eta.horizon(), spec, bps, 0, opts.cfl_safety, Margin::off);
  control::SolveOptions so;
  so.threads = opts.threads;
  const control::ValueSlice slice = control::conditional_expectation(band, grid, spec, f, s, so);
  return slice.values().abs().maxCoeff();
}

Bounds67Result check_bounds_67(const VolatilityBand& band_with_margin, const Integrand& eta,
                               const discriminant::DSchedule& schedule,
                               const discriminant::DOptions& opts) {
  const VolatilityBand& band = band_with_margin;
  if (!band.has_margin() || !(band.margin_eps() > 0.0))
    throw std::invalid_argument("check_bounds_67: margin out of range (need 0 < eps < width/2)");
  const double eps = band.margin_eps();

  Bounds67Result res;
  const discriminant::RefinedValue lhs = expect_k(band, eta, -1.0, opts);
  res.lhs6 = lhs.value;
  res.lhs6_delta = lhs.delta;

  res.d = discriminant::estimate_d(band, eta, schedule, discriminant::DMode::d_qv, opts);

  const Integrand absf = abs_of(eta);
  const discriminant::RefinedValue shrunk = discriminant::solve_refined(
      band, absf, control::make_ds_functional(absf), 0, Margin::on, opts);
  res.rhs7 = eps * shrunk.value;
  res.rhs7_delta = eps * shrunk.delta;

  const double d_tol = res.d.combined_tolerance();
  res.pass6 = res.lhs6 >= res.d.report.value - (res.lhs6_delta + d_tol);
  res.pass7 = res.d.report.value >= res.rhs7 - (d_tol + res.rhs7_delta);
  res.pass = res.pass6 && res.pass7;
  return res;
}

UniquenessVerdict uniqueness_discriminator(const VolatilityBand& band, const Integrand& eta,
                                           const Integrand& zeta,
                                           const discriminant::DSchedule& schedule,
                                           double threshold, UniquenessMode mode,
                                           const discriminant::DOptions& opts) {
  UniquenessVerdict v;
  v.threshold = threshold;
  const Integrand probe =
      mode == UniquenessMode::integral_identity ? eta : difference(eta, zeta);
  v.probe = mode == UniquenessMode::integral_identity ? "integral-identity"
                                                      : "representation-difference";
  v.d = discriminant::estimate_d(band, probe, schedule, discriminant::DMode::d_qv, opts);
  v.witness = v.d.report.value;
  v.tolerance = v.d.combined_tolerance();
  v.refuted = v.witness > threshold + v.tolerance;
  return v;
}

std::string uniqueness_report_text(const UniquenessVerdict& v) {
  char buf[512];
  std::string out;
  out += "verdict: ";
  out += v.refuted ? "refuted" : "consistent";
  out += "\n";
  std::snprintf(buf, sizeof buf, "witness: %.17g\n", v.witness);
  out += buf;
  std::snprintf(buf, sizeof buf, "threshold: %.17g\n", v.threshold);
  out += buf;
  std::snprintf(buf, sizeof buf, "tolerance: %.17g\n", v.tolerance);
  out += buf;
  out += "probe: " + v.probe + "\n";
  return out;
}

}  // namespace gexp::martrep
