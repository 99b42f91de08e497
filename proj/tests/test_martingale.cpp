#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "gexp/band.hpp"
#include "gexp/discriminant.hpp"
#include "gexp/functional.hpp"
#include "gexp/integrand.hpp"
#include "gexp/martingale.hpp"
#include "gexp/paths.hpp"
#include "gexp/policy.hpp"
#include "gexp/state.hpp"
#include "gexp/time_grid.hpp"

using namespace gexp;
using namespace gexp::martrep;

namespace {

const VolatilityBand kBand(1.0, 2.0);

discriminant::DOptions fast_opts() {
  discriminant::DOptions o;
  o.resolution = 101;
  return o;
}

}  // namespace

TEST_CASE("the finite-variation pair carries the envelope drift") {
  const Integrand eta = Integrand::step({0.0, 0.5, 1.0}, {1.0, -1.0});
  const auto pair = build_martingale(kBand, eta);
  StateSnapshot snap;
  // 2*G(1) = sigma_hi^2, 2*G(-1) = -sigma_lo^2.
  CHECK(pair.drift.value_at(0.25, snap) == 2.0);
  CHECK(pair.drift.value_at(0.75, snap) == -1.0);
  CHECK(pair.eta.value_at(0.25, snap) == 1.0);
}

TEST_CASE("the remainder prices to zero") {
  CHECK(std::abs(expect_k(kBand, Integrand::constant(1.0, 1.0), 1.0, fast_opts()).value) <= 1e-12);
  const Integrand flip = Integrand::step({0.0, 0.5, 1.0}, {1.0, -1.0});
  CHECK(std::abs(expect_k(kBand, flip, 1.0, fast_opts()).value) <= 1e-12);
}

TEST_CASE("the reflected remainder prices to the band width") {
  // E[-K_T] = sup int (2G(eta) - sigma^2 eta) ds = (hi - lo) * T for eta = 1.
  const auto rv = expect_k(kBand, Integrand::constant(1.0, 1.0), -1.0, fast_opts());
  CHECK(rv.value == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("the remainder is nonpositive pathwise for nonnegative integrands") {
  const Integrand eta = Integrand::step({0.0, 0.5, 1.0}, {1.0, 2.0});
  const control::Functional k = control::make_k_functional(eta, kBand);
  const TimeGrid grid = uniform_grid(1.0, 8);
  for (const auto& policy : {paths::ControlPolicy::constant(1.3),
                             paths::ControlPolicy::deterministic({0.0, 0.5, 1.0}, {1.8, 1.1})}) {
    const auto bundle = paths::simulate_paths(kBand, grid, policy, 512, 9);
    const Eigen::ArrayXd k_t = paths::evaluate_functional(bundle, k);
    for (int p = 0; p < k_t.size(); ++p) CHECK(k_t(p) <= 1e-12);
  }
}

TEST_CASE("conditional remainder stays flat") {
  const Integrand one = Integrand::constant(1.0, 1.0);
  CHECK(conditional_k_sup(kBand, one, 0.5, fast_opts()) <= 1e-9);
  CHECK(conditional_k_sup(kBand, one, 0.0, fast_opts()) <= 1e-9);
  CHECK_THROWS_AS(conditional_k_sup(kBand, one, 1.0, fast_opts()), std::invalid_argument);
  CHECK_THROWS_AS(conditional_k_sup(kBand, one, -0.1, fast_opts()), std::invalid_argument);
}

TEST_CASE("the two-sided chain around the discriminant holds") {
  const VolatilityBand band(1.0, 2.0, 0.25);
  const auto res = check_bounds_67(band, Integrand::constant(1.0, 1.0),
                                   discriminant::DSchedule::defaults(1), fast_opts());
  CHECK(res.pass6);
  CHECK(res.pass7);
  CHECK(res.pass);
  CHECK(res.lhs6 == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(res.d.report.value == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(res.rhs7 == doctest::Approx(0.25).epsilon(1e-6));
  // Strict ordering, well clear of the tolerances.
  CHECK(res.lhs6 > res.d.report.value + 0.1);
  CHECK(res.d.report.value > res.rhs7 + 0.1);
}

TEST_CASE("the chain requires a margin") {
  CHECK_THROWS_WITH_AS(check_bounds_67(kBand, Integrand::constant(1.0, 1.0),
                                       discriminant::DSchedule::defaults(1), fast_opts()),
                       "check_bounds_67: margin out of range (need 0 < eps < width/2)",
                       std::invalid_argument);
}

TEST_CASE("the discriminator refutes the time-integral identity for a live integrand") {
  const Integrand one = Integrand::constant(1.0, 1.0);
  const Integrand zero = Integrand::constant(0.0, 1.0);
  const auto v = uniqueness_discriminator(kBand, one, zero, discriminant::DSchedule::defaults(1),
                                          0.0, UniquenessMode::integral_identity, fast_opts());
  CHECK(v.refuted);
  CHECK(v.witness == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(v.probe == "integral-identity");
  CHECK(v.witness > v.threshold + v.tolerance);
}

TEST_CASE("the discriminator stays consistent where it must") {
  const Integrand zero = Integrand::constant(0.0, 1.0);
  const auto v = uniqueness_discriminator(kBand, zero, zero, discriminant::DSchedule::defaults(1),
                                          0.0, UniquenessMode::integral_identity, fast_opts());
  CHECK_FALSE(v.refuted);
  CHECK(std::abs(v.witness) <= 1e-12);

  // A threshold above the witness also blocks refutation.
  const Integrand one = Integrand::constant(1.0, 1.0);
  const auto held = uniqueness_discriminator(kBand, one, zero,
                                             discriminant::DSchedule::defaults(1), 0.6,
                                             UniquenessMode::integral_identity, fast_opts());
  CHECK_FALSE(held.refuted);
}

TEST_CASE("representation mode probes the difference, not the envelope gap") {
  const Integrand eta = Integrand::step({0.0, 0.5, 1.0}, {1.0, 2.0});
  const auto v = uniqueness_discriminator(kBand, eta, eta, discriminant::DSchedule::defaults(2),
                                          0.0, UniquenessMode::representation, fast_opts());
  // Each copy alone has discriminant 3/4; their difference must not.
  CHECK(v.probe == "representation-difference");
  CHECK_FALSE(v.refuted);
  CHECK(std::abs(v.witness) <= 1e-12);
}

TEST_CASE("verdict text is deterministic") {
  UniquenessVerdict v;
  v.refuted = true;
  v.witness = 0.5;
  v.threshold = 0.0;
  v.tolerance = 0.125;
  v.probe = "integral-identity";
  CHECK(uniqueness_report_text(v) ==
        "verdict: refuted\nwitness: 0.5\nthreshold: 0\ntolerance: 0.125\n"
        "probe: integral-identity\n");
}
