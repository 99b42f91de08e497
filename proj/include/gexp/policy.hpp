#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gexp/band.hpp"
#include "gexp/integrand.hpp"
#include "gexp/solver.hpp"
#include "gexp/state.hpp"
#include "gexp/time_grid.hpp"

namespace gexp::paths {

/// Coefficient of a coarse-feedback control: a function of the controlled
/// integral's own increments over the earlier coarse cells, oldest first.
/// coeffs[i] receives exactly i increments.
using CoarseFn = std::function<double(std::span<const double>)>;

/// A volatility control. Every variant emits a variance sigma^2 for each
/// cell of the simulation grid, reading at most the state at the cell's
/// left endpoint, so every control is adapted by construction.
struct ControlPolicy {
  struct Constant {
    double sigma_sq;  // no initializer: keeps the variant default-constructible
                      // while the enclosing class is still incomplete
  };

  /// Piecewise-constant deterministic variance: sigma_sq[i] holds on
  /// (knots[i], knots[i+1]].
  struct Deterministic {
    std::vector<double> knots;
    std::vector<double> sigma_sq;
  };

  /// Variance on coarse cell (i*T/m, (i+1)*T/m] is coeffs[i] applied to the
  /// process's own earlier coarse X-increments.
  struct CoarseFeedback {
    int m = 1;
    double horizon = 1.0;
    std::vector<CoarseFn> coeffs;  // sigma^2-valued
  };

  /// The oscillating control built by adversary_policy: on each coarse cell
  /// it evaluates a base variance a_i^2 and a sign s_i = sgn(xi_i) from the
  /// path's own earlier coarse X-increments, then emits
  /// H^{(-1)^j s_i}(a_i^2) on the j-th of 2n equal subcells; when s_i == 0
  /// the base variance is emitted unchanged.
  struct Adversary {
    VolatilityBand band{0.0, 1.0};  // must carry the margin used by H
    int m = 1;
    double horizon = 1.0;
    int n = 1;                      // half-oscillation pairs per coarse cell
    std::vector<CoarseFn> base_sq;  // sigma^2-valued, must land in the shrunk band
    std::vector<Integrand::Coefficient> xi;  // sign-carrying coefficients, one per coarse cell
    std::vector<Mark> xi_marks;     // X-snapshots at coarse boundaries read by xi
  };

  /// Replays the argmax surface of a dynamic-programming solve: each grid
  /// cell emits the recorded maximiser at the nearest lattice node.
  struct DpReplay {
    control::DpPolicy dp;
    std::vector<Mark> marks;  // mark declarations of the originating solve
  };

  using Kind = std::variant<Constant, Deterministic, CoarseFeedback, Adversary, DpReplay>;

  std::string id;
  Kind kind;

  static ControlPolicy constant(double sigma_sq);
  static ControlPolicy deterministic(std::vector<double> knots, std::vector<double> sigma_sq);
  static ControlPolicy coarse_feedback(std::string id, int m, double horizon,
                                       std::vector<CoarseFn> coeffs);
  static ControlPolicy dp_replay(std::string id, control::DpPolicy dp, std::vector<Mark> marks);

  /// Interior times the simulation grid must contain so each grid cell lies
  /// inside one emission piece of this policy. Policies that read their own
  /// history track it internally, so simulators owe them nothing beyond the
  /// per-cell state snapshots.
  [[nodiscard]] std::vector<double> required_knots() const;
};

/// The oscillation kernels H^{parity}(x)^2 for a band with a margin set:
///   parity +1:  sigma_hi^2       if x >= mid, else 2x - sigma_lo^2
///   parity -1:  2x - sigma_hi^2  if x >= mid, else sigma_lo^2
/// with mid = (sigma_lo^2 + sigma_hi^2)/2. The argument must lie in the
/// shrunk band [lo+eps, hi-eps]; there the two parities sum to 2x exactly
/// and differ by at least 2*eps.
double adversary_volatility(const VolatilityBand& band, int parity, double x);

/// Builds the oscillating feedback control from an m-step cylinder base.
/// `base_policy` must be a Constant or CoarseFeedback control on the same
/// uniform m-partition as `base_integrand`, whose marks must all be
/// X-snapshots at coarse-cell boundaries (that is what "cylinder in the
/// increments" means here). The result alternates between
/// H^{+s}(a_i^2) and H^{-s}(a_i^2) on the 2n subcells of each coarse cell,
/// with a_i^2 from the base policy and s = sgn of the integrand coefficient,
/// both evaluated on the path's own realized increments.
ControlPolicy adversary_policy(const VolatilityBand& band, const ControlPolicy& base_policy,
                               const Integrand& base_integrand, int n);

/// Per-path stateful evaluator. Cells must be visited in increasing order
/// starting at cell 0; the snapshot carries the state at the cell's left
/// endpoint. Mark slots for times > snapshot time may be unset (NaN).
class PolicyEvaluator {
 public:
  PolicyEvaluator(const ControlPolicy& policy, const TimeGrid& grid);
  ~PolicyEvaluator();
  PolicyEvaluator(PolicyEvaluator&&) noexcept;
  PolicyEvaluator& operator=(PolicyEvaluator&&) noexcept;

  /// Variance to hold over (knot(cell), knot(cell+1)].
  double sigma_sq(int cell, const StateSnapshot& state);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace gexp::paths
