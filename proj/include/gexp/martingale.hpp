#pragma once

#include <string>

#include "gexp/band.hpp"
#include "gexp/discriminant.hpp"
#include "gexp/integrand.hpp"

namespace gexp::martrep {

/// Finite-variation pair: the quadratic-variation leg eta and the time leg
/// 2G(eta). Their difference K_t = int eta dQ - int 2G(eta) ds starts at
/// zero, has finite variation, and prices to zero under the sublinear
/// expectation; for eta >= 0 it is nonpositive pathwise.
struct GMartingaleFV {
  Integrand eta;
  Integrand drift;
};

GMartingaleFV build_martingale(const VolatilityBand& band, const Integrand& eta);

/// Lattice value of E[scale * K_T] for the pair built from eta.
discriminant::RefinedValue expect_k(const VolatilityBand& band, const Integrand& eta, double scale,
                                    const discriminant::DOptions& opts = {});

/// Largest |value| on the conditional slice E_s[K_T - K_s] at time s; a
/// value at zero (to tolerance) certifies the martingale property there.
double conditional_k_sup(const VolatilityBand& band, const Integrand& eta, double s,
                         const discriminant::DOptions& opts = {});

/// The two-inequality chain around the discriminant:
///   E[-K_T]  >=  d(eta)  >=  eps * E_shrunk[int |eta| ds],
/// each side evaluated independently (the right side on the margin-shrunk
/// band). Tolerances are combined additively per inequality.
struct Bounds67Result {
  double lhs6 = 0.0;
  double lhs6_delta = 0.0;
  discriminant::DEstimate d;
  double rhs7 = 0.0;
  double rhs7_delta = 0.0;
  bool pass6 = false;
  bool pass7 = false;
  bool pass = false;
};

Bounds67Result check_bounds_67(const VolatilityBand& band_with_margin, const Integrand& eta,
                               const discriminant::DSchedule& schedule,
                               const discriminant::DOptions& opts = {});

/// Which equality hypothesis the discriminator probes.
enum class UniquenessMode {
  integral_identity,  // "int eta dQ == int zeta ds": probe is eta itself
  representation,     // two finite-variation pairs coincide: probe is eta - zeta
};

struct UniquenessVerdict {
  bool refuted = false;
  double witness = 0.0;  // discriminant estimate of the probe
  double tolerance = 0.0;
  double threshold = 0.0;
  std::string probe;
  discriminant::DEstimate d;
};

/// One-sided test: a discriminant of the probe above threshold + tolerance
/// refutes the hypothesis (time integrals have vanishing discriminant, so
/// equality would force it to zero); otherwise the verdict is `consistent`,
/// which is an absence of contradiction, not a proof. Works with the
/// difference of the integrands and never forms the envelope of a
/// difference, which would not be the difference of envelopes.
UniquenessVerdict uniqueness_discriminator(const VolatilityBand& band, const Integrand& eta,
                                           const Integrand& zeta,
                                           const discriminant::DSchedule& schedule,
                                           double threshold = 0.0,
                                           UniquenessMode mode = UniquenessMode::integral_identity,
                                           const discriminant::DOptions& opts = {});

/// Key: value lines for the verdict, deterministic formatting.
std::string uniqueness_report_text(const UniquenessVerdict& v);

}  // namespace gexp::martrep
