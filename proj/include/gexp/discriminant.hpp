#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gexp/band.hpp"
#include "gexp/functional.hpp"
#include "gexp/integrand.hpp"
#include "gexp/state.hpp"

namespace gexp::discriminant {

enum class Method { dp, mc, both };

/// Against which measure the signed integral runs.
enum class DMode { d_qv, ds };

/// Increasing schedule of sign-process cell counts. Every n must be even
/// and a multiple of the integrand's piece count, so the alternation never
/// straddles a coefficient change.
struct DSchedule {
  std::vector<int> n_values;
  Method method = Method::dp;

  /// m * {2, 4, 8, 16, 32}, evaluated by dynamic programming.
  static DSchedule defaults(int m);

  /// Throws on an empty, non-increasing, odd, or partition-incompatible
  /// schedule.
  void validate(int pieces) const;
};

struct DOptions {
  int resolution = 201;  // lattice nodes per axis
  int threads = 1;
  int mc_paths = 20000;       // mc / both methods
  std::uint64_t seed = 1;     // mc / both methods
  double cfl_safety = 1.0 / 3.0;
};

/// A lattice value plus a refinement error proxy: the change in the value
/// when the spatial resolution is halved.
struct RefinedValue {
  double value = 0.0;
  double delta = 0.0;
};

/// Dynamic-programming value of the functional over the band, with the
/// state space sized for `eta` (whose marks decide the tracked axes) and
/// the grid aligned to the functional's breakpoints and `n_sign_cells`
/// alternation cells.
RefinedValue solve_refined(const VolatilityBand& band, const Integrand& eta,
                           const control::Functional& f, int n_sign_cells, Margin margin,
                           const DOptions& opts = {});

/// Discriminant estimate: the limsup proxy (max over the tail half of the
/// schedule) of the per-n values of the signed integral of eta. `report`
/// holds the headline numbers; `mc` additionally carries the oscillating-
/// policy Monte Carlo lower bound when the schedule method requests it.
struct DEstimate {
  EstimateReport report;
  std::optional<EstimateReport> mc;

  /// Error proxies of everything that went into the headline value.
  [[nodiscard]] double combined_tolerance() const {
    return report.error_proxy + (mc ? mc->error_proxy : 0.0);
  }
};

DEstimate estimate_d(const VolatilityBand& band, const Integrand& eta, const DSchedule& schedule,
                     DMode mode, const DOptions& opts = {});

/// Two-sided envelope of the discriminant by the width of the band:
///   -(w/2) * E[-int |eta| ds]  <=  d(eta)  <=  (w/2) * E[int |eta| ds],
/// with w = sigma_hi^2 - sigma_lo^2 and both sides evaluated by dynamic
/// programming.
struct Prop31Result {
  DEstimate d;
  double lower = 0.0;
  double upper = 0.0;
  double bound_tolerance = 0.0;  // refinement deltas of the two bound solves
  bool pass = false;
};

Prop31Result check_prop31(const VolatilityBand& band, const Integrand& eta,
                          const DSchedule& schedule, const DOptions& opts = {});

/// Decay of the ds-mode signed integral: per-n values must shrink like 1/n
/// (reported constant c_emp <= 2 in units of pieces * sup-bound * horizon)
/// and the last value must fall below `final_tol`.
struct Thm34Result {
  DEstimate d;
  double c_emp = 0.0;
  double final_value = 0.0;
  bool pass = false;
};

Thm34Result check_thm34(const VolatilityBand& band, const Integrand& eta,
                        const DSchedule& schedule, double final_tol = 1e-3,
                        const DOptions& opts = {});

/// One CSV with columns n,value,error_proxy,method; reports are emitted in
/// order, one row per schedule entry.
void write_schedule_csv(const std::vector<EstimateReport>& reports, const std::string& file_path);

}  // namespace gexp::discriminant
