#include <doctest.h>

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "gexp/band.hpp"
#include "gexp/integrand.hpp"
#include "gexp/paths.hpp"
#include "gexp/policy.hpp"
#include "gexp/rng.hpp"
#include "gexp/time_grid.hpp"

using namespace gexp;
using namespace gexp::paths;

namespace {

const VolatilityBand kBand(1.0, 2.0, 0.2);

}  // namespace

TEST_CASE("oscillation kernels at pinned points") {
  // Below the midpoint the up-kernel moves, above it the down-kernel moves.
  CHECK(adversary_volatility(kBand, +1, 1.2) == doctest::Approx(1.4).epsilon(1e-15));
  CHECK(adversary_volatility(kBand, -1, 1.2) == 1.0);
  CHECK(adversary_volatility(kBand, +1, 1.6) == 2.0);
  CHECK(adversary_volatility(kBand, -1, 1.6) == doctest::Approx(1.2).epsilon(1e-15));
  // At the midpoint the pair is exactly the band's endpoints.
  CHECK(adversary_volatility(kBand, +1, 1.5) == 2.0);
  CHECK(adversary_volatility(kBand, -1, 1.5) == 1.0);
}

TEST_CASE("kernel identities hold over the whole effective band") {
  PathRng rng(2024, 0);
  const double lo = kBand.lo_eff(Margin::on);
  const double hi = kBand.hi_eff(Margin::on);
  for (int i = 0; i < 10000; ++i) {
    const double x = lo + rng.uniform() * (hi - lo);
    const double up = adversary_volatility(kBand, +1, x);
    const double dn = adversary_volatility(kBand, -1, x);
    CHECK(std::abs(up + dn - 2.0 * x) <= 1e-15);
    CHECK(up - dn >= 2.0 * kBand.margin_eps() - 1e-15);
    CHECK(kBand.contains(up, Margin::off));
    CHECK(kBand.contains(dn, Margin::off));
  }
}

TEST_CASE("kernel domain validation") {
  CHECK_THROWS_AS(adversary_volatility(kBand, 0, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(adversary_volatility(kBand, +1, 1.19), std::invalid_argument);
  CHECK_THROWS_AS(adversary_volatility(kBand, +1, 1.81), std::invalid_argument);
  CHECK_THROWS_AS(adversary_volatility(VolatilityBand(1.0, 2.0), +1, 1.5), std::invalid_argument);
}

TEST_CASE("one-cell oscillation emits the kernel pair in order") {
  // Base a^2 = 1.5 = mid, positive integrand: H^{+1} = 2 on the first
  // subcell, H^{-1} = 1 on the second.
  const auto policy = adversary_policy(kBand, ControlPolicy::constant(1.5),
                                       Integrand::constant(1.0, 1.0), 1);
  const TimeGrid grid = uniform_grid(1.0, 2);
  const auto bundle = simulate_paths(kBand, grid, policy, 8, 1);
  for (int p = 0; p < bundle.n_paths(); ++p) {
    CHECK(bundle.q(1, p) == 1.0);  // 2.0 * 0.5
    CHECK(bundle.q(2, p) == 1.5);  // plus 1.0 * 0.5
  }
}

TEST_CASE("zero integrand leaves the base variance untouched") {
  const auto policy = adversary_policy(kBand, ControlPolicy::constant(1.5),
                                       Integrand::constant(0.0, 1.0), 1);
  const auto bundle = simulate_paths(kBand, uniform_grid(1.0, 2), policy, 4, 2);
  for (int p = 0; p < bundle.n_paths(); ++p) {
    CHECK(bundle.q(1, p) == 0.75);  // 1.5 * 0.5 on both subcells
    CHECK(bundle.q(2, p) == 1.5);
  }
}

TEST_CASE("negative integrand flips the kernel order") {
  const auto policy = adversary_policy(kBand, ControlPolicy::constant(1.5),
                                       Integrand::constant(-1.0, 1.0), 1);
  const auto bundle = simulate_paths(kBand, uniform_grid(1.0, 2), policy, 4, 3);
  for (int p = 0; p < bundle.n_paths(); ++p) {
    CHECK(bundle.q(1, p) == 0.5);  // 1.0 * 0.5 first
    CHECK(bundle.q(2, p) == 1.5);
  }
}

TEST_CASE("per-cell realized variance equals the base coefficient") {
  // m = 2 coarse cells, n = 2 oscillations per cell, dt = 1/8: the kernel
  // pair sums are exact, so the realized variance of each coarse cell
  // reproduces a_i^2 up to the rounding of the running-Q accumulation
  // (bit for bit when the partial sums stay dyadic, as on the first cell).
  const int m = 2, n = 2;
  std::vector<CoarseFn> coeffs(2);
  coeffs[0] = [](std::span<const double>) { return 1.5; };
  coeffs[1] = [](std::span<const double> d) { return 1.5 + 0.2 * std::tanh(d[0]); };
  const auto base = ControlPolicy::coarse_feedback("fb", m, 1.0, coeffs);
  const Integrand xi = Integrand::step({0.0, 0.5, 1.0}, {1.0, -1.0});
  const auto policy = adversary_policy(kBand, base, xi, n);

  const TimeGrid grid = uniform_grid(1.0, 2 * m * n);
  const auto bundle = simulate_paths(kBand, grid, policy, 64, 4);
  for (int p = 0; p < bundle.n_paths(); ++p) {
    CHECK(bundle.q(4, p) - bundle.q(0, p) == 0.5 * 1.5);
    const double a2 = 1.5 + 0.2 * std::tanh(bundle.x(4, p));
    CHECK(std::abs(bundle.q(8, p) - bundle.q(4, p) - 0.5 * a2) <= 1e-15);
  }
}

TEST_CASE("oscillation wins at least the margin on the signed integral") {
  // Per coarse cell, the alternating-sign sum of realized variance times the
  // integrand sign is at least (T/m) * eps pathwise.
  const int m = 2, n = 2;
  const Integrand xi = Integrand::step({0.0, 0.5, 1.0}, {1.0, -1.0});
  const auto policy = adversary_policy(kBand, ControlPolicy::constant(1.5), xi, n);
  const TimeGrid grid = uniform_grid(1.0, 2 * m * n);
  const auto bundle = simulate_paths(kBand, grid, policy, 32, 5);
  const double floor = (1.0 / m) * kBand.margin_eps();
  const double s[2] = {1.0, -1.0};
  for (int p = 0; p < bundle.n_paths(); ++p) {
    for (int i = 0; i < m; ++i) {
      double alt = 0.0;
      for (int j = 0; j < 2 * n; ++j) {
        const int k = i * 2 * n + j;
        const double dq = bundle.q(k + 1, p) - bundle.q(k, p);
        alt += (j % 2 == 0 ? dq : -dq);
      }
      CHECK(s[i] * alt >= floor - 1e-15);
    }
  }
}

TEST_CASE("oscillating control preserves the coarse law") {
  // Base at the midpoint: Q_T is deterministic under both controls, and the
  // X second moments agree within Monte Carlo resolution.
  const auto base = ControlPolicy::constant(1.5);
  const Integrand xi = Integrand::constant(1.0, 1.0);
  const int paths = 20000;
  for (const int n : {1, 2}) {
    const TimeGrid grid = uniform_grid(1.0, 2 * n);
    const auto b0 = simulate_paths(kBand, grid, base, paths, 77);
    const auto b1 = simulate_paths(kBand, grid, adversary_policy(kBand, base, xi, n), paths, 77);
    double m0 = 0.0, m1 = 0.0;
    for (int p = 0; p < paths; ++p) {
      m0 += b0.x(2 * n, p) * b0.x(2 * n, p);
      m1 += b1.x(2 * n, p) * b1.x(2 * n, p);
      CHECK(b1.q(2 * n, p) == 1.5);  // kernel pair averages back to a^2 = mid
    }
    m0 /= paths;
    m1 /= paths;
    // Var(X_T^2) <= E[X_T^4] <= 3 * (a^2 T)^2 under any adapted control in
    // the band, so 4.5/sqrt(paths) dominates both standard errors.
    CHECK(std::abs(m0 - m1) <= 6.0 * 4.5 / std::sqrt(static_cast<double>(paths)));
  }
}

TEST_CASE("oscillating-policy construction validation") {
  const Integrand one = Integrand::constant(1.0, 1.0);
  CHECK_THROWS_AS(adversary_policy(kBand, ControlPolicy::constant(1.5), one, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(adversary_policy(VolatilityBand(1.0, 2.0), ControlPolicy::constant(1.5), one, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(adversary_policy(kBand, ControlPolicy::deterministic({0.0, 1.0}, {1.5}), one, 1),
                  std::invalid_argument);
  // Non-uniform two-piece integrand.
  const Integrand skew = Integrand::step({0.0, 0.3, 1.0}, {1.0, 1.0});
  CHECK_THROWS_AS(adversary_policy(kBand, ControlPolicy::constant(1.5), skew, 1),
                  std::invalid_argument);
  // Mark off the coarse boundary, and a Q-sourced mark.
  Integrand::Coefficient c;
  c.is_constant = false;
  c.fn = [](std::span<const double> mk) { return mk[0]; };
  c.reads = {0};
  c.bound = 5.0;
  c.lipschitz = 1.0;
  const auto k0 = Integrand::constant(1.0, 1.0).coefficients()[0];
  const Integrand off_mark({0.0, 0.5, 1.0}, {k0, c}, {Mark{0.25, MarkSource::x}});
  CHECK_THROWS_AS(adversary_policy(kBand, ControlPolicy::constant(1.5), off_mark, 1),
                  std::invalid_argument);
  const Integrand q_mark({0.0, 0.5, 1.0}, {k0, c}, {Mark{0.5, MarkSource::q}});
  CHECK_THROWS_AS(adversary_policy(kBand, ControlPolicy::constant(1.5), q_mark, 1),
                  std::invalid_argument);
  // Coarse-feedback partition mismatch.
  std::vector<CoarseFn> coeffs(3, [](std::span<const double>) { return 1.5; });
  const auto base3 = ControlPolicy::coarse_feedback("fb3", 3, 1.0, coeffs);
  const Integrand two = Integrand::step({0.0, 0.5, 1.0}, {1.0, 1.0});
  CHECK_THROWS_AS(adversary_policy(kBand, base3, two, 1), std::invalid_argument);
}
