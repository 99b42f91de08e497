#include "gexp/time_grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gexp {

TimeGrid::TimeGrid(std::vector<double> knots) : knots_(std::move(knots)) {
  if (knots_.size() < 2) throw std::invalid_argument("time grid: need at least two knots");
  if (knots_.front() != 0.0) throw std::invalid_argument("time grid: first knot must be 0");
  for (size_t i = 1; i < knots_.size(); ++i)
    if (!(knots_[i] > knots_[i - 1]))
      throw std::invalid_argument("time grid: knots must be strictly increasing");
  if (!(knots_.back() > 0.0)) throw std::invalid_argument("time grid: horizon must be > 0");
}

double TimeGrid::tol() const { return 1e-12 * horizon(); }

int TimeGrid::find_knot(double t) const {
  auto it = std::lower_bound(knots_.begin(), knots_.end(), t - tol());
  if (it == knots_.end() || std::abs(*it - t) > tol()) return -1;
  return static_cast<int>(it - knots_.begin());
}

bool TimeGrid::refined_by(const TimeGrid& finer) const {
  if (std::abs(finer.horizon() - horizon()) > tol()) return false;
  for (double t : knots_)
    if (finer.find_knot(t) < 0) return false;
  return true;
}

TimeGrid align_grid(const TimeGrid& base, int n_cells,
                    const std::vector<double>& breakpoints, int substeps) {
  if (n_cells < 1) throw std::invalid_argument("align_grid: n_cells must be >= 1");
  if (substeps < 1) throw std::invalid_argument("align_grid: substeps must be >= 1");
  const double horizon = base.horizon();
  const double tol = 1e-12 * horizon;

  std::vector<double> knots = base.knots();
  for (int i = 1; i < n_cells; ++i) knots.push_back(horizon * i / n_cells);
  for (double t : breakpoints) {
    if (t < -tol || t > horizon + tol)
      throw std::invalid_argument("align_grid: breakpoint outside [0, horizon]");
    if (t > tol && t < horizon - tol) knots.push_back(t);
  }
  std::sort(knots.begin(), knots.end());
  std::vector<double> merged;
  merged.reserve(knots.size());
  for (double t : knots)
    if (merged.empty() || t - merged.back() > tol) merged.push_back(t);

  if (substeps == 1) return TimeGrid(std::move(merged));

  std::vector<double> out;
  out.reserve(merged.size() * static_cast<size_t>(substeps));
  for (size_t k = 0; k + 1 < merged.size(); ++k) {
    const double a = merged[k], b = merged[k + 1];
    out.push_back(a);
    for (int j = 1; j < substeps; ++j) out.push_back(a + (b - a) * j / substeps);
  }
  out.push_back(merged.back());
  return TimeGrid(std::move(out));
}

TimeGrid uniform_grid(double horizon, int n_cells) {
  if (n_cells < 1) throw std::invalid_argument("uniform_grid: n_cells must be >= 1");
  std::vector<double> knots(static_cast<size_t>(n_cells) + 1);
  for (int i = 0; i <= n_cells; ++i) knots[static_cast<size_t>(i)] = horizon * i / n_cells;
  return TimeGrid(std::move(knots));
}

}  // namespace gexp
