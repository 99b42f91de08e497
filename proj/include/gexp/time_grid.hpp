#pragma once

#include <vector>

namespace gexp {

/// Strictly increasing knot sequence from 0 to the horizon. Cells are the
/// half-open intervals (knot[k], knot[k+1]].
class TimeGrid {
 public:
  explicit TimeGrid(std::vector<double> knots);

  [[nodiscard]] const std::vector<double>& knots() const { return knots_; }
  [[nodiscard]] int n_cells() const { return static_cast<int>(knots_.size()) - 1; }
  [[nodiscard]] double horizon() const { return knots_.back(); }
  [[nodiscard]] double knot(int k) const { return knots_[static_cast<size_t>(k)]; }
  [[nodiscard]] double dt(int k) const {
    return knots_[static_cast<size_t>(k) + 1] - knots_[static_cast<size_t>(k)];
  }

  /// Index of the knot equal to t (within the alignment tolerance), or -1.
  [[nodiscard]] int find_knot(double t) const;

  /// True when every knot of this grid appears in `finer`.
  [[nodiscard]] bool refined_by(const TimeGrid& finer) const;

  /// Matching tolerance used for knot lookups: 1e-12 * horizon.
  [[nodiscard]] double tol() const;

 private:
  std::vector<double> knots_;
};

/// Union of base knots, the n equal sign-process cells, and the given
/// breakpoints, with each resulting cell split into `substeps` equal parts.
[[nodiscard]] TimeGrid align_grid(const TimeGrid& base, int n_cells,
                                  const std::vector<double>& breakpoints,
                                  int substeps = 1);

/// Uniform grid {0, T/n, ..., T}.
[[nodiscard]] TimeGrid uniform_grid(double horizon, int n_cells);

}  // namespace gexp
