#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gexp/band.hpp"
#include "gexp/functional.hpp"
#include "gexp/integrand.hpp"
#include "gexp/policy.hpp"
#include "gexp/sign_process.hpp"
#include "gexp/state.hpp"
#include "gexp/time_grid.hpp"

namespace gexp::paths {

struct SimOptions {
  /// Band check applied to every emitted variance: with Margin::on the
  /// policy must stay inside the shrunk band.
  Margin margin = Margin::off;
  int threads = 1;
};

/// Simulated driver and controlled integrals at the grid knots; one column
/// per path. W_0 = X_0 = Q_0 = 0 on every path.
struct PathBundle {
  TimeGrid grid;
  Eigen::ArrayXXd w;  // driver
  Eigen::ArrayXXd x;  // controlled integral of sqrt(sigma^2) dW
  Eigen::ArrayXXd q;  // quadratic variation, accumulates sigma^2 dt
  std::string policy_id;
  std::uint64_t seed = 0;

  [[nodiscard]] int n_paths() const { return static_cast<int>(x.cols()); }
  [[nodiscard]] int n_knots() const { return static_cast<int>(x.rows()); }
};

/// Euler simulation of X = int sqrt(sigma^2) dW under the policy:
///   X_{k+1} = X_k + sqrt(sigma_k^2) dW_k,  Q_{k+1} = Q_k + sigma_k^2 dt_k,
/// with sigma_k^2 the policy evaluated on the realized history at the cell's
/// left endpoint. Deterministic given (seed, n_paths, grid, policy): each
/// path owns an RNG stream derived from (seed, path index), and results do
/// not depend on the thread count. Throws on a grid missing a policy knot
/// and, as a hard invariant breach, on any emitted variance outside the
/// (optionally margin-shrunk) band.
PathBundle simulate_paths(const VolatilityBand& band, const TimeGrid& grid,
                          const ControlPolicy& policy, int n_paths, std::uint64_t seed,
                          const SimOptions& opt = {});

/// Which measure the per-path Riemann sums integrate against.
enum class IntegrationMode { d_qv, ds };

/// Per-path left-endpoint Riemann sums of the integrand: against dQ
/// (optionally weighted by the alternating sign process) or against dt.
/// The bundle grid must refine the integrand's pieces, the sign cells, and
/// contain every mark time.
Eigen::ArrayXd integrate(const PathBundle& bundle, const Integrand& eta, IntegrationMode mode,
                         const std::optional<SignProcess>& sign = std::nullopt);

/// Per-path value of a terminal-plus-running functional, quadrature-matched
/// to the lattice solver: running rates are sampled with the state at each
/// cell's left endpoint and the time at the cell midpoint, weighted by dt;
/// the realized variance on a cell is dQ/dt. `marks` declares the snapshot
/// slots the functional reads, frozen from the path arrays.
Eigen::ArrayXd evaluate_functional(const PathBundle& bundle, const control::Functional& f,
                                   const std::vector<Mark>& marks = {});

/// Monte Carlo lower bound: the best sample mean of the functional across
/// the candidate policies (every policy induces one represented law, and
/// the sublinear expectation dominates each of them). The report carries
/// the argmax policy's 3*stderr as error proxy. Throws on an empty policy
/// list.
EstimateReport mc_estimate(const VolatilityBand& band, const TimeGrid& grid,
                           const std::vector<ControlPolicy>& policies, const control::Functional& f,
                           const std::vector<Mark>& marks, int n_paths, std::uint64_t seed,
                           const SimOptions& opt = {});

/// Comma-separated dump: a header line with seed and policy id, a column
/// line "t,W,X,Q", then every knot of path 0, every knot of path 1, ...
void write_paths_csv(const PathBundle& bundle, const std::string& file_path);

}  // namespace gexp::paths
