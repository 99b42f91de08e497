#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "gexp/band.hpp"
#include "gexp/integrand.hpp"
#include "gexp/sign_process.hpp"
#include "gexp/state.hpp"

namespace gexp::control {

/// Reward accrued along the path. The solver samples `rate` with the state
/// at each substep's left endpoint and the time at the substep midpoint, so
/// piecewise-constant time dependence is exact on aligned grids. The rate is
/// expected to be affine in sigma_sq; breakpoints list every time where the
/// rate's time dependence can jump.
struct RunningReward {
  std::function<double(double t, const StateSnapshot&, double sigma_sq)> rate;
  std::vector<double> breakpoints;
  // Evaluation hints for the lattice solver. mark_only: the rate reads the
  // snapshot only through its marks (true for every integrand-based reward).
  // state_free: the rate ignores the snapshot entirely.
  bool mark_only = false;
  bool state_free = false;
};

/// Payoff: terminal part evaluated on the final state snapshot plus an
/// optional running part.
struct Functional {
  std::function<double(const StateSnapshot&)> terminal;  // null means 0
  std::optional<RunningReward> running;
};

/// Terminal-only payoff.
[[nodiscard]] Functional make_terminal(std::function<double(const StateSnapshot&)> f);

/// Running integral of eta against quadratic variation: rate eta * sigma^2,
/// optionally flipped by the alternating-sign process.
[[nodiscard]] Functional make_qv_functional(Integrand eta,
                                            std::optional<SignProcess> sign = std::nullopt);

/// Running integral of eta against time: rate eta, optionally sign-flipped.
/// Independent of sigma^2.
[[nodiscard]] Functional make_ds_functional(Integrand eta,
                                            std::optional<SignProcess> sign = std::nullopt);

/// The finite-variation combination scale * (eta d<B> - 2 G(eta) ds), i.e.
/// the running form of the martingale remainder K. scale = -1 gives -K.
[[nodiscard]] Functional make_k_functional(const Integrand& eta, const VolatilityBand& band,
                                           double scale = 1.0, Margin margin = Margin::off);

/// Pointwise sum; breakpoints merged, terminals added.
[[nodiscard]] Functional combine(const Functional& a, const Functional& b);

}  // namespace gexp::control
