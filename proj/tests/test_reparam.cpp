#include <doctest.h>

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "gexp/band.hpp"
#include "gexp/paths.hpp"
#include "gexp/policy.hpp"
#include "gexp/reparam.hpp"

using namespace gexp;
using namespace gexp::paths;

namespace {

WDomainBase make_base() {
  WDomainBase base;
  base.horizon = 1.0;
  base.c = 1.1;
  base.C = 1.3;
  base.phi.resize(3);
  base.phi[0] = [](std::span<const double>) { return 1.2; };
  base.phi[1] = [](std::span<const double> w) { return 1.2 + 0.1 * std::tanh(w[0]); };
  base.phi[2] = [](std::span<const double> w) { return 1.2 + 0.1 * std::tanh(0.5 * (w[0] + w[1])); };
  base.lipschitz = {0.0, 0.1, 0.1};
  return base;
}

}  // namespace

TEST_CASE("propagation weights solve the triangular recursion") {
  const auto a = reparam_bound_coeffs(1.0, {1.0, 1.0, 1.0});
  CHECK(a(1, 0) == 2.0);
  CHECK(a(2, 1) == 2.0);
  CHECK(a(2, 0) == 6.0);  // 2 * (1 + A(1,0))
  CHECK(a(0, 0) == 0.0);
  CHECK(a(0, 1) == 0.0);
  CHECK(a(1, 2) == 0.0);
}

TEST_CASE("near-diagonal weight is exactly 2*T*L^2") {
  const double t = 0.7;
  const std::vector<double> l = {0.3, 1.7, 0.9};
  const auto a = reparam_bound_coeffs(t, l);
  CHECK(a(1, 0) == 2.0 * t * (l[1] * l[1]));
  CHECK(a(2, 1) == 2.0 * t * (l[2] * l[2]));
}

TEST_CASE("weight computation validation") {
  CHECK_THROWS_AS((void)reparam_bound_coeffs(0.0, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS((void)reparam_bound_coeffs(1.0, {}), std::invalid_argument);
  CHECK_THROWS_AS((void)reparam_bound_coeffs(1.0, {1.0, -0.5}), std::invalid_argument);
}

TEST_CASE("zero tolerances reproduce the base control") {
  ReparamOptions opt;
  opt.n_paths = 4000;
  opt.seed = 11;
  const auto [policy, report] = feedback_reparameterize(make_base(), {}, opt);
  CHECK(policy.id == "reparam:m=3");
  REQUIRE(report.gap_mse.size() == 3);
  for (int i = 0; i < 3; ++i) {
    // The rebuild inverts its own increments, so without dither the only
    // residue is floating-point roundoff through the division chain.
    CHECK(report.stage_mse[static_cast<size_t>(i)] <= 1e-24);
    CHECK(report.gap_mse[static_cast<size_t>(i)] <= 1e-24);
    CHECK(report.eps[static_cast<size_t>(i)] == 0.0);
  }
}

TEST_CASE("dithered rebuild stays within the propagated bounds") {
  ReparamOptions opt;
  opt.n_paths = 20000;
  opt.seed = 12;
  const std::vector<double> eps = {0.05, 0.05, 0.05};
  const auto report = feedback_reparameterize(make_base(), eps, opt).second;

  REQUIRE(report.bound.size() == 3);
  CHECK(report.within_bounds(3.0));
  for (int i = 0; i < 3; ++i) {
    const auto u = static_cast<size_t>(i);
    // Per-stage perturbation is a clamped bounded dither of size eps.
    CHECK(report.stage_mse[u] <= eps[u] * eps[u] + 3.0 * report.stage_se[u] + 1e-12);
    // The bound really is sum_j B(i,j) eps_j^2.
    double b = 0.0;
    for (int j = 0; j <= i; ++j)
      b += report.b_coeffs(i, j) * report.eps[static_cast<size_t>(j)] *
           report.eps[static_cast<size_t>(j)];
    CHECK(report.bound[u] == doctest::Approx(b).epsilon(1e-12));
  }

  // Total weights: diagonal pinned at 2, off-diagonal doubled propagation.
  CHECK(report.b_coeffs(0, 0) == 2.0);
  CHECK(report.b_coeffs(1, 1) == 2.0);
  CHECK(report.b_coeffs(2, 2) == 2.0);
  CHECK(report.b_coeffs(2, 0) == 2.0 * report.a_coeffs(2, 0));
}

TEST_CASE("rebuilt policy simulates inside the coefficient box") {
  ReparamOptions opt;
  opt.n_paths = 256;
  opt.seed = 13;
  const auto policy = feedback_reparameterize(make_base(), {0.02, 0.02, 0.02}, opt).first;
  // The emitted variances must land in [c^2, C^2]; the simulator enforces
  // band membership on every cell, so a clean run is the assertion.
  const VolatilityBand box(1.1 * 1.1, 1.3 * 1.3);
  const auto bundle = simulate_paths(box, uniform_grid(1.0, 6), policy, 64, 21);
  CHECK(bundle.n_paths() == 64);
  CHECK(bundle.policy_id == "reparam:m=3");
  for (int p = 0; p < bundle.n_paths(); ++p) {
    for (int k = 0; k < 6; ++k) {
      const double sq = (bundle.q(k + 1, p) - bundle.q(k, p)) / bundle.grid.dt(k);
      CHECK(sq >= 1.1 * 1.1 - 1e-12);
      CHECK(sq <= 1.3 * 1.3 + 1e-12);
    }
  }
}

TEST_CASE("rebuild validation") {
  const auto base = make_base();

  auto bad = base;
  bad.c = 0.0;
  CHECK_THROWS_WITH_AS(feedback_reparameterize(bad, {}),
                       "reparam: lower coefficient bound c must be > 0", std::invalid_argument);

  bad = base;
  bad.C = 1.0;
  CHECK_THROWS_AS(feedback_reparameterize(bad, {}), std::invalid_argument);

  bad = base;
  bad.lipschitz = {0.0, 0.1};
  CHECK_THROWS_WITH_AS(feedback_reparameterize(bad, {}),
                       "reparam: Lipschitz metadata missing or invalid", std::invalid_argument);

  bad = base;
  bad.horizon = -1.0;
  CHECK_THROWS_AS(feedback_reparameterize(bad, {}), std::invalid_argument);

  bad = base;
  bad.phi[1] = nullptr;
  CHECK_THROWS_AS(feedback_reparameterize(bad, {}), std::invalid_argument);

  CHECK_THROWS_AS(feedback_reparameterize(base, {0.1}), std::invalid_argument);
  CHECK_THROWS_AS(feedback_reparameterize(base, {0.1, -0.1, 0.1}), std::invalid_argument);

  ReparamOptions opt;
  opt.n_paths = 1;
  CHECK_THROWS_AS(feedback_reparameterize(base, {}, opt), std::invalid_argument);
}
