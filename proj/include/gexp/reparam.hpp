#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gexp/policy.hpp"

namespace gexp::paths {

/// m-step volatility functional of the driver's own coarse increments:
/// phi[i] maps the first i W-increments (oldest first) to a volatility
/// value (not a variance) in [c, C]; phi[0] ignores its argument. The
/// lipschitz entry i bounds phi[i]'s Lipschitz constant with respect to the
/// joint Euclidean norm of its arguments.
struct WDomainBase {
  double horizon = 1.0;
  double c = 0.0;
  double C = 0.0;
  std::vector<CoarseFn> phi;
  std::vector<double> lipschitz;
};

struct ReparamOptions {
  /// Clamp radius of the increment-inversion chain, in units of the coarse
  /// standard deviation sqrt(T/m). Draws beyond it are astronomically rare
  /// at the default; the clamp only exists to keep the rebuilt coefficients
  /// globally Lipschitz.
  double clip_radius_stds = 8.0;
  int n_paths = 20000;
  std::uint64_t seed = 1;
};

struct ReparamReport {
  std::vector<double> eps;                  // resolved tolerance schedule
  std::vector<double> effective_lipschitz;  // certified Lipschitz bounds of the built psi_i
  Eigen::MatrixXd a_coeffs;                 // propagation weights, entries (i, j) for j < i
  Eigen::MatrixXd b_coeffs;                 // total weights: 2 on the diagonal, 2*A below
  std::vector<double> stage_mse;            // E|psi_i(base increments) - xi_i|^2
  std::vector<double> stage_se;
  std::vector<double> gap_mse;              // E|xi_hat_i - xi_i|^2, self-referential build
  std::vector<double> gap_se;
  std::vector<double> bound;                // sum_j B(i, j) * eps_j^2

  /// True when every empirical gap sits below its bound, allowing the given
  /// multiple of the gap's standard error.
  [[nodiscard]] bool within_bounds(double stderr_mult = 3.0) const;
};

/// The error-propagation weights for an m-stage feedback rebuild with the
/// given per-stage Lipschitz constants:
///   A(i, j) = 2 T L_i^2 * (sum_{k=j+1}^{i-1} A(k, j) + 1)   for j < i,
/// so in particular A(i, i-1) = 2 T L_i^2. Entries with j >= i are zero.
[[nodiscard]] Eigen::MatrixXd reparam_bound_coeffs(double horizon,
                                                   const std::vector<double>& lipschitz);

/// Rebuilds a W-increment volatility functional as a feedback control on
/// the increments of its own controlled integral. Stage i inverts the
/// earlier X-increments through the unperturbed coefficient chain (exact on
/// the base law up to a far-tail clamp), adds a bounded dither of size eps[i],
/// and clamps back to [c, C]. With eps identically zero the rebuilt control
/// reproduces the base exactly, path by path. The report carries the
/// certified Lipschitz constants of the rebuilt coefficients, the
/// propagation weights computed from them, and Monte Carlo estimates (at
/// the coarse granularity, which is exact) of the per-stage and end-to-end
/// mean-square coefficient gaps. `eps` may be empty (all zero) or length m.
std::pair<ControlPolicy, ReparamReport> feedback_reparameterize(const WDomainBase& base,
                                                                const std::vector<double>& eps,
                                                                const ReparamOptions& opt = {});

}  // namespace gexp::paths
