#include "gexp/functional.hpp"

#include <utility>

namespace gexp::control {

Functional make_terminal(std::function<double(const StateSnapshot&)> f) {
  Functional out;
  out.terminal = std::move(f);
  return out;
}

namespace {

std::vector<double> reward_breakpoints(const Integrand& eta,
                                       const std::optional<SignProcess>& sign) {
  std::vector<double> bp = eta.knots();
  for (const Mark& m : eta.marks()) bp.push_back(m.time);
  if (sign) {
    auto cells = sign->boundaries();
    bp.insert(bp.end(), cells.begin(), cells.end());
  }
  return bp;
}

}  // namespace

Functional make_qv_functional(Integrand eta, std::optional<SignProcess> sign) {
  Functional out;
  out.running = RunningReward{};
  out.running->breakpoints = reward_breakpoints(eta, sign);
  out.running->mark_only = true;
  out.running->state_free = eta.is_deterministic();
  out.running->rate = [eta = std::move(eta), sign = std::move(sign)](
                          double t, const StateSnapshot& snap, double sigma_sq) {
    const double v = eta.value_at(t, snap) * sigma_sq;
    return sign ? sign->sign_at(t) * v : v;
  };
  return out;
}

Functional make_ds_functional(Integrand eta, std::optional<SignProcess> sign) {
  Functional out;
  out.running = RunningReward{};
  out.running->breakpoints = reward_breakpoints(eta, sign);
  out.running->mark_only = true;
  out.running->state_free = eta.is_deterministic();
  out.running->rate = [eta = std::move(eta), sign = std::move(sign)](
                          double t, const StateSnapshot& snap, double /*sigma_sq*/) {
    const double v = eta.value_at(t, snap);
    return sign ? sign->sign_at(t) * v : v;
  };
  return out;
}

Functional make_k_functional(const Integrand& eta, const VolatilityBand& band, double scale,
                             Margin margin) {
  Integrand drift = g_drift(eta, band, margin);
  Functional out;
  out.running = RunningReward{};
  out.running->breakpoints = reward_breakpoints(eta, std::nullopt);
  out.running->mark_only = true;
  out.running->state_free = eta.is_deterministic();
  out.running->rate = [eta, drift = std::move(drift), scale](
                          double t, const StateSnapshot& snap, double sigma_sq) {
    return scale * (eta.value_at(t, snap) * sigma_sq - drift.value_at(t, snap));
  };
  return out;
}

Functional combine(const Functional& a, const Functional& b) {
  Functional out;
  if (a.terminal && b.terminal) {
    auto fa = a.terminal, fb = b.terminal;
    out.terminal = [fa, fb](const StateSnapshot& s) { return fa(s) + fb(s); };
  } else {
    out.terminal = a.terminal ? a.terminal : b.terminal;
  }
  if (a.running && b.running) {
    out.running = RunningReward{};
    out.running->breakpoints = a.running->breakpoints;
    out.running->breakpoints.insert(out.running->breakpoints.end(),
                                    b.running->breakpoints.begin(),
                                    b.running->breakpoints.end());
    out.running->mark_only = a.running->mark_only && b.running->mark_only;
    out.running->state_free = a.running->state_free && b.running->state_free;
    auto ra = a.running->rate, rb = b.running->rate;
    out.running->rate = [ra, rb](double t, const StateSnapshot& s, double sq) {
      return ra(t, s, sq) + rb(t, s, sq);
    };
  } else if (a.running || b.running) {
    out.running = a.running ? a.running : b.running;
  }
  return out;
}

}  // namespace gexp::control
