#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "gexp/band.hpp"
#include "gexp/functional.hpp"
#include "gexp/state.hpp"
#include "gexp/time_grid.hpp"

namespace gexp::control {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Which coordinates the lattice carries. X diffuses under the chosen
/// variance, Q drifts by sigma^2 dt, marks freeze a coordinate at a fixed
/// time (at most two, each inheriting its source axis's grid). Ranges left
/// at zero width are filled with the defaults: X covers +-6*sigma_hi*sqrt(T),
/// Q covers [0, sigma_hi_sq*T].
struct StateSpec {
  bool track_x = false;
  bool track_q = false;
  std::vector<Mark> marks;
  Interval x_range{};
  Interval q_range{};
  int resolution = 201;  // points per axis
};

/// Fills default ranges and validates the spec against band and horizon.
[[nodiscard]] StateSpec resolve_spec(StateSpec spec, const VolatilityBand& band, double horizon);

/// State spec sized for a given integrand: tracks what the coefficients
/// read, inherits the integrand's mark declarations.
[[nodiscard]] StateSpec spec_for_integrand(const Integrand& eta, bool need_x_dynamics = false);

struct SolveOptions {
  int sigma_levels = 2;       // >= 2; endpoints of the (effective) band included
  Margin margin = Margin::off;
  int threads = 1;
  bool want_policy = false;
  double cfl_cap = 1.0;       // each step must satisfy dt <= cfl_cap * dx^2 / sigma_hi_eff^2
};

struct ClampStats {
  long long x_edge_reads = 0;   // stencil touched a grid edge
  long long q_shift_clamps = 0; // drifted Q landed outside the grid
};

/// Value function restricted to one time: active axes plus nodal values.
/// eval() interpolates multilinearly and is exact at the nodes.
class ValueSlice {
 public:
  struct Axis {
    enum class Kind { x, q, mark };
    Kind kind;
    int mark_index = -1;  // declared index when kind == mark
    Eigen::ArrayXd nodes;
  };

  ValueSlice(std::vector<Axis> axes, Eigen::ArrayXd values, double t);

  [[nodiscard]] double t() const { return t_; }
  [[nodiscard]] const std::vector<Axis>& axes() const { return axes_; }
  [[nodiscard]] const Eigen::ArrayXd& values() const { return values_; }

  /// Interpolated value; reads snap.x / snap.q / snap.marks as the axes demand.
  [[nodiscard]] double eval(const StateSnapshot& snap) const;

 private:
  std::vector<Axis> axes_;
  Eigen::ArrayXd values_;
  double t_;
};

/// Per-step argmax variance levels on the lattice, exportable so a path
/// simulation can replay the optimizer's decisions.
struct DpPolicy {
  TimeGrid grid;
  std::vector<double> sigma_levels;
  struct Step {
    std::vector<ValueSlice::Axis> axes;
    std::vector<std::uint8_t> argmax;
  };
  std::vector<Step> steps;  // one per grid cell

  /// Variance chosen at cell k for the given state (nearest-node lookup).
  [[nodiscard]] double sigma_sq_at(int k, double x, double q,
                                   std::span<const double> marks) const;
};

struct SolveResult {
  double value = 0.0;
  EstimateReport report;
  ClampStats clamps;
  std::optional<DpPolicy> policy;
};

/// Supremum over adapted band-valued variance controls of the expected
/// payoff, by backward induction on the tensor lattice. The grid must
/// contain every running breakpoint and mark time, and each step must
/// satisfy the diffusion stability bound when X is tracked.
[[nodiscard]] SolveResult solve_expectation(const VolatilityBand& band, const TimeGrid& grid,
                                            const StateSpec& spec, const Functional& f,
                                            const SolveOptions& opt = {});

/// Value slice at an interior knot t: the backward induction stopped there,
/// marks at t already folded in.
[[nodiscard]] ValueSlice conditional_expectation(const VolatilityBand& band, const TimeGrid& grid,
                                                 const StateSpec& spec, const Functional& f,
                                                 double t, const SolveOptions& opt = {});

/// Aligned grid whose substeps satisfy dt <= target_safety * dx^2 / sigma_hi_eff^2
/// for the spec's X axis and keep the Q drift per step below one Q cell.
/// n_sign_cells = 0 skips sign alignment.
[[nodiscard]] TimeGrid build_dp_grid(const VolatilityBand& band, double horizon,
                                     const StateSpec& spec,
                                     const std::vector<double>& breakpoints,
                                     int n_sign_cells = 0, double target_safety = 1.0 / 3.0,
                                     Margin margin = Margin::off);

}  // namespace gexp::control
