#pragma once

#include <span>
#include <string>
#include <vector>

namespace gexp {

/// Which running coordinate a frozen mark copies.
enum class MarkSource { x, q };

/// A state coordinate frozen at a fixed time and carried forward unchanged.
struct Mark {
  double time = 0.0;
  MarkSource source = MarkSource::q;
};

/// View of the state at one instant: controlled integral X, accumulated
/// quadratic variation Q, and any marks frozen so far. Coefficient callbacks
/// receive this; marks are ordered as declared.
struct StateSnapshot {
  double t = 0.0;
  double x = 0.0;
  double q = 0.0;
  std::span<const double> marks{};
};

/// Point estimate of a sublinear expectation with its method tag, an error
/// proxy (refinement delta for the lattice solver, 3*stderr scale for Monte
/// Carlo), and per-n diagnostics when a schedule was involved.
struct EstimateReport {
  double value = 0.0;
  double error_proxy = 0.0;
  std::string method;           // "dp" or "mc"
  std::vector<int> schedule;    // empty when no n-schedule applies
  std::vector<double> per_n;    // one value per schedule entry
  std::vector<double> per_n_error;
};

}  // namespace gexp
