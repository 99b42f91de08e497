#include <doctest.h>

#include <stdexcept>

#include "gexp/band.hpp"

using gexp::Margin;
using gexp::VolatilityBand;

TEST_CASE("generator values on the (1,2) band") {
  const VolatilityBand band(1.0, 2.0);
  CHECK(gexp::eval_g(band, 2.0) == 2.0);     // (1/2)*2*2
  CHECK(gexp::eval_g(band, 0.0) == 0.0);
  CHECK(gexp::eval_g(band, -2.0) == -1.0);   // (1/2)*1*(-2)
  CHECK(gexp::eval_g(band, 1.5) == 1.5);
}

TEST_CASE("generator envelope dominates every band variance") {
  const VolatilityBand band(0.5, 3.0);
  for (const double a : {-2.0, -0.3, 0.0, 0.7, 4.0}) {
    for (const double sq : {0.5, 1.0, 2.2, 3.0}) {
      CHECK(gexp::eval_g(band, a) >= 0.5 * sq * a - 1e-15);
    }
  }
}

TEST_CASE("generator axioms: homogeneity and subadditivity") {
  const VolatilityBand band(1.0, 2.0);
  for (const double a : {-1.5, -0.2, 0.4, 2.0}) {
    for (const double b : {-0.7, 0.0, 1.1}) {
      CHECK(gexp::eval_g(band, a + b) <= gexp::eval_g(band, a) + gexp::eval_g(band, b) + 1e-15);
    }
    for (const double lam : {0.0, 0.5, 3.0}) {
      CHECK(gexp::eval_g(band, lam * a) == doctest::Approx(lam * gexp::eval_g(band, a)).epsilon(1e-14));
    }
  }
}

TEST_CASE("margin shrinks the band symmetrically") {
  const VolatilityBand band(1.0, 2.0, 0.2);
  CHECK(band.has_margin());
  CHECK(band.margin_eps() == 0.2);
  CHECK(band.lo_eff(Margin::on) == 1.2);
  CHECK(band.hi_eff(Margin::on) == 1.8);
  CHECK(band.lo_eff(Margin::off) == 1.0);
  const VolatilityBand s = band.shrunk();
  CHECK(s.sigma_lo_sq() == 1.2);
  CHECK(s.sigma_hi_sq() == 1.8);
  CHECK_FALSE(s.has_margin());
  // Shrunk-band generator equals the margined generator of the original.
  for (const double a : {-1.0, 0.3, 2.0}) {
    CHECK(gexp::eval_g(band, a, Margin::on) == gexp::eval_g(s, a));
  }
}

TEST_CASE("band membership respects the margin") {
  const VolatilityBand band(1.0, 2.0, 0.25);
  CHECK(band.contains(1.0, Margin::off));
  CHECK_FALSE(band.contains(1.0, Margin::on));
  CHECK(band.contains(1.25, Margin::on));
  CHECK(band.contains(1.75, Margin::on));
  CHECK_FALSE(band.contains(1.76, Margin::on));
  CHECK_FALSE(band.contains(0.99, Margin::off));
}

TEST_CASE("band validation") {
  CHECK_THROWS_AS(VolatilityBand(2.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(VolatilityBand(1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(VolatilityBand(-0.5, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(VolatilityBand(1.0, 2.0, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(VolatilityBand(1.0, 2.0, 0.5), std::invalid_argument);  // = width/2
  CHECK_THROWS_AS((void)VolatilityBand(1.0, 2.0).margin_eps(), std::logic_error);
  CHECK_NOTHROW(VolatilityBand(0.0, 1.0));  // degenerate lower bound is allowed
  CHECK_NOTHROW(VolatilityBand(1.0, 2.0, 0.0));
}
