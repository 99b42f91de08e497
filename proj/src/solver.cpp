#include "gexp/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace gexp::control {
namespace {

struct Axis {
  int n = 0;
  double lo = 0.0;
  double hi = 0.0;
  double d = 0.0;  // node spacing
  Eigen::ArrayXd nodes;
};

Axis make_axis(const Interval& r, int n) {
  Axis a;
  a.n = n;
  a.lo = r.lo;
  a.hi = r.hi;
  a.d = (r.hi - r.lo) / (n - 1);
  a.nodes = Eigen::ArrayXd::LinSpaced(n, r.lo, r.hi);
  return a;
}

// Tensor lattice over the tracked coordinates. Memory layout, innermost
// first: x (when tracked, else q), then q when both are tracked, then the
// still-active marks in declaration order. Each mark axis reuses its source
// axis's nodes, so folding a mark back into the live coordinate is an exact
// gather instead of an interpolation.
struct Lattice {
  bool has_x = false;
  bool has_q = false;
  Axis x;
  Axis q;
  std::vector<Mark> declared;
  std::vector<int> active;  // declared indices still carried as axes
  int n_inner = 0;
  Eigen::ArrayXd v;

  [[nodiscard]] const Axis& source_axis(int declared_id) const {
    return declared[static_cast<size_t>(declared_id)].source == MarkSource::x ? x : q;
  }

  [[nodiscard]] long long outer_count() const {
    long long n = (has_x && has_q) ? q.n : 1;
    for (int id : active) n *= source_axis(id).n;
    return n;
  }

  [[nodiscard]] long long total() const { return n_inner * outer_count(); }

  // Stride of the axis holding the active mark at position `pos`.
  [[nodiscard]] long long mark_stride(int pos) const {
    long long s = static_cast<long long>(n_inner) * ((has_x && has_q) ? q.n : 1);
    for (int j = 0; j < pos; ++j) s *= source_axis(active[static_cast<size_t>(j)]).n;
    return s;
  }

  [[nodiscard]] std::vector<ValueSlice::Axis> slice_axes() const {
    std::vector<ValueSlice::Axis> out;
    if (has_x) out.push_back({ValueSlice::Axis::Kind::x, -1, x.nodes});
    if (has_q) out.push_back({ValueSlice::Axis::Kind::q, -1, q.nodes});
    for (int id : active)
      out.push_back({ValueSlice::Axis::Kind::mark, id, source_axis(id).nodes});
    return out;
  }
};

// Splits [0, count) into one contiguous block per thread. The work done for
// each index is independent of the partition, so results do not depend on
// the thread count.
void run_chunked(long long count, int threads,
                 const std::function<void(long long, long long)>& body) {
  if (threads <= 1 || count < 2 * threads) {
    body(0, count);
    return;
  }
  const long long chunk = (count + threads - 1) / threads;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  for (int w = 0; w < threads; ++w) {
    const long long b = w * chunk;
    const long long e = std::min(count, b + chunk);
    if (b >= e) break;
    pool.emplace_back(body, b, e);
  }
  for (auto& th : pool) th.join();
}

constexpr double kNodeSnapTol = 1e-9;

// Backward-induction engine. Owns the lattice and walks it from the horizon
// down to a stopping knot, folding marks into their live coordinate at their
// freeze times.
class Engine {
 public:
  Engine(const VolatilityBand& band, const TimeGrid& grid, StateSpec spec, const Functional& f,
         const SolveOptions& opt)
      : band_(band), grid_(grid), spec_(std::move(spec)), f_(f), opt_(opt) {
    if (opt_.sigma_levels < 2)
      throw std::invalid_argument("solver: need at least two variance levels");
    if (opt_.sigma_levels > 256)
      throw std::invalid_argument("solver: at most 256 variance levels");
    if (opt_.threads < 1) throw std::invalid_argument("solver: thread count must be >= 1");
    if (!(opt_.cfl_cap > 0.0)) throw std::invalid_argument("solver: cfl_cap must be positive");
    if (f_.running && !f_.running->rate)
      throw std::invalid_argument("solver: running reward has no rate function");

    const double lo = band_.lo_eff(opt_.margin);
    const double hi = band_.hi_eff(opt_.margin);
    levels_.resize(static_cast<size_t>(opt_.sigma_levels));
    for (int i = 0; i < opt_.sigma_levels; ++i)
      levels_[static_cast<size_t>(i)] = lo + (hi - lo) * i / (opt_.sigma_levels - 1);
    levels_.front() = lo;
    levels_.back() = hi;

    if (f_.running)
      for (double bp : f_.running->breakpoints)
        if (grid_.find_knot(bp) < 0)
          throw std::invalid_argument("solver: running breakpoint " + std::to_string(bp) +
                                      " is not a grid knot");
    for (const Mark& m : spec_.marks)
      if (grid_.find_knot(m.time) < 0)
        throw std::invalid_argument("solver: mark time " + std::to_string(m.time) +
                                    " is not a grid knot");

    lat_.has_x = spec_.track_x;
    lat_.has_q = spec_.track_q;
    if (lat_.has_x) lat_.x = make_axis(spec_.x_range, spec_.resolution);
    if (lat_.has_q) lat_.q = make_axis(spec_.q_range, spec_.resolution);
    lat_.declared = spec_.marks;
    lat_.active.resize(spec_.marks.size());
    for (size_t i = 0; i < spec_.marks.size(); ++i) lat_.active[i] = static_cast<int>(i);
    lat_.n_inner = lat_.has_x ? lat_.x.n : lat_.q.n;
    if (lat_.total() > 200'000'000)
      throw std::invalid_argument(
          "solver: state lattice exceeds 2e8 nodes; reduce the resolution or the marks");

    if (lat_.has_x) {
      const double dx2 = lat_.x.d * lat_.x.d;
      const double cap = opt_.cfl_cap * dx2 / hi;
      for (int k = 0; k < grid_.n_cells(); ++k)
        if (grid_.dt(k) > cap * (1.0 + 1e-9))
          throw std::invalid_argument(
              "solver: step " + std::to_string(k) + " has dt = " + std::to_string(grid_.dt(k)) +
              " above the stability bound " + std::to_string(cap) +
              "; refine the time grid (build_dp_grid does this)");
    }

    if (opt_.want_policy) {
      policy_ = DpPolicy{grid_, levels_, {}};
      policy_->steps.resize(static_cast<size_t>(grid_.n_cells()));
    }
  }

  void backward_to(double t_stop) {
    const int k_stop = grid_.find_knot(t_stop);
    if (k_stop < 0) throw std::invalid_argument("solver: stopping time is not a grid knot");
    fill_terminal();
    for (int k = grid_.n_cells() - 1; k >= k_stop; --k) {
      consume_marks_at(grid_.knot(k + 1));
      step(k);
    }
    consume_marks_at(grid_.knot(k_stop));
  }

  [[nodiscard]] const Lattice& lattice() const { return lat_; }
  [[nodiscard]] const ClampStats& clamps() const { return clamps_; }
  [[nodiscard]] std::optional<DpPolicy>& policy() { return policy_; }

 private:
  void fill_terminal() {
    lat_.v.resize(lat_.total());
    const double horizon = grid_.horizon();
    const long long n_out = lat_.outer_count();
    const int n_marks = static_cast<int>(lat_.declared.size());
    run_chunked(n_out, opt_.threads, [&](long long b, long long e) {
      std::vector<double> mk(static_cast<size_t>(n_marks));
      for (long long o = b; o < e; ++o) {
        long long rem = o;
        int iq = 0;
        if (lat_.has_x && lat_.has_q) {
          iq = static_cast<int>(rem % lat_.q.n);
          rem /= lat_.q.n;
        }
        std::fill(mk.begin(), mk.end(), std::numeric_limits<double>::quiet_NaN());
        for (int id : lat_.active) {
          const Axis& src = lat_.source_axis(id);
          mk[static_cast<size_t>(id)] = src.nodes[rem % src.n];
          rem /= src.n;
        }
        StateSnapshot snap;
        snap.t = horizon;
        snap.marks = std::span<const double>(mk);
        if (lat_.has_x && lat_.has_q) snap.q = lat_.q.nodes[iq];
        double* out = lat_.v.data() + o * lat_.n_inner;
        for (int i = 0; i < lat_.n_inner; ++i) {
          if (lat_.has_x)
            snap.x = lat_.x.nodes[i];
          else
            snap.q = lat_.q.nodes[i];
          out[i] = f_.terminal ? f_.terminal(snap) : 0.0;
        }
      }
    });
  }

  // One backward step over cell (knot(k), knot(k+1)]: per variance level,
  // drift Q by sigma^2 dt, diffuse X with the three-point stencil in second-
  // difference form (flat extension at the edges), accrue the running
  // reward, then keep the best level per node. Ties keep the lowest level,
  // which makes the sweep deterministic.
  void step(int k) {
    const double t0 = grid_.knot(k);
    const double dt = grid_.dt(k);
    const double t_mid = t0 + 0.5 * dt;
    const int n_levels = static_cast<int>(levels_.size());
    const bool sep_q = lat_.has_x && lat_.has_q;  // q carried as its own outer digit
    const int nq = lat_.has_q ? lat_.q.n : 0;
    const int ni = lat_.n_inner;
    const long long n_out = lat_.outer_count();
    const int n_marks = static_cast<int>(lat_.declared.size());
    const RunningReward* run = f_.running ? &*f_.running : nullptr;

    std::vector<double> p(static_cast<size_t>(n_levels), 0.0);
    if (lat_.has_x) {
      const double dx2 = lat_.x.d * lat_.x.d;
      for (int l = 0; l < n_levels; ++l)
        p[static_cast<size_t>(l)] = levels_[static_cast<size_t>(l)] * dt / (2.0 * dx2);
    }

    // Per-level Q advection tables: node iq reads the bracket (jq, jq+1)
    // with weight th. Drifts past the top of the grid clamp flat and are
    // counted; exact hits keep th at exactly 0 or 1 so constant and nodal
    // reads stay bit-exact.
    std::vector<int> jq_tab;
    std::vector<double> th_tab;
    if (lat_.has_q) {
      jq_tab.resize(static_cast<size_t>(n_levels) * static_cast<size_t>(nq));
      th_tab.resize(static_cast<size_t>(n_levels) * static_cast<size_t>(nq));
      for (int l = 0; l < n_levels; ++l) {
        const double shift = levels_[static_cast<size_t>(l)] * dt / lat_.q.d;
        for (int iq = 0; iq < nq; ++iq) {
          double pos = iq + shift;
          if (pos > nq - 1 + 1e-12) ++clamps_.q_shift_clamps;
          pos = std::clamp(pos, 0.0, static_cast<double>(nq - 1));
          const int j = std::min(static_cast<int>(pos), nq - 2);
          jq_tab[static_cast<size_t>(l) * nq + iq] = j;
          th_tab[static_cast<size_t>(l) * nq + iq] = pos - j;
        }
      }
    }

    if (lat_.has_x)
      for (int l = 0; l < n_levels; ++l)
        if (p[static_cast<size_t>(l)] > 0.0) clamps_.x_edge_reads += 2 * n_out;

    std::vector<double> rew_const(static_cast<size_t>(n_levels), 0.0);
    const bool hoist_all = run && run->state_free;
    const bool hoist_row = run && run->mark_only && !hoist_all;
    if (hoist_all) {
      StateSnapshot nowhere;
      nowhere.t = t0;
      for (int l = 0; l < n_levels; ++l)
        rew_const[static_cast<size_t>(l)] =
            run->rate(t_mid, nowhere, levels_[static_cast<size_t>(l)]) * dt;
    }

    if (vnew_.size() != lat_.v.size()) vnew_.resize(lat_.v.size());
    DpPolicy::Step* pstep = nullptr;
    if (policy_) {
      pstep = &policy_->steps[static_cast<size_t>(k)];
      pstep->axes = lat_.slice_axes();
      pstep->argmax.assign(static_cast<size_t>(lat_.total()), 0);
    }

    const double* vold = lat_.v.data();
    double* vout = vnew_.data();

    run_chunked(n_out, opt_.threads, [&](long long b, long long e) {
      std::vector<double> w(static_cast<size_t>(ni));
      std::vector<double> cur(static_cast<size_t>(ni));
      std::vector<double> mk(static_cast<size_t>(n_marks));
      for (long long o = b; o < e; ++o) {
        long long rem = o;
        int iq = 0;
        if (sep_q) {
          iq = static_cast<int>(rem % nq);
          rem /= nq;
        }
        std::fill(mk.begin(), mk.end(), std::numeric_limits<double>::quiet_NaN());
        for (int id : lat_.active) {
          const Axis& srca = lat_.source_axis(id);
          mk[static_cast<size_t>(id)] = srca.nodes[rem % srca.n];
          rem /= srca.n;
        }
        StateSnapshot snap;
        snap.t = t0;
        snap.marks = std::span<const double>(mk);
        if (sep_q) snap.q = lat_.q.nodes[iq];

        double* best = vout + o * ni;
        std::uint8_t* amax = pstep ? pstep->argmax.data() + o * ni : nullptr;
        for (int l = 0; l < n_levels; ++l) {
          // Source row after the Q drift for this level.
          const double* src = nullptr;
          if (sep_q) {
            const int j = jq_tab[static_cast<size_t>(l) * nq + iq];
            const double th = th_tab[static_cast<size_t>(l) * nq + iq];
            const double* r0 = vold + (o - iq + j) * ni;
            const double* r1 = r0 + ni;
            if (th == 0.0) {
              src = r0;
            } else if (th == 1.0) {
              src = r1;
            } else {
              for (int i = 0; i < ni; ++i)
                w[static_cast<size_t>(i)] = r0[i] + th * (r1[i] - r0[i]);
              src = w.data();
            }
          } else if (lat_.has_x) {
            src = vold + o * ni;
          } else {
            // The inner axis is Q itself: advect within the row.
            const double* r = vold + o * ni;
            for (int i = 0; i < ni; ++i) {
              const int j = jq_tab[static_cast<size_t>(l) * nq + i];
              const double th = th_tab[static_cast<size_t>(l) * nq + i];
              if (th == 0.0)
                w[static_cast<size_t>(i)] = r[j];
              else if (th == 1.0)
                w[static_cast<size_t>(i)] = r[j + 1];
              else
                w[static_cast<size_t>(i)] = r[j] + th * (r[j + 1] - r[j]);
            }
            src = w.data();
          }

          if (lat_.has_x && p[static_cast<size_t>(l)] > 0.0) {
            const double pl = p[static_cast<size_t>(l)];
            cur[0] = src[0] + pl * (src[1] - src[0]);
            for (int i = 1; i + 1 < ni; ++i)
              cur[static_cast<size_t>(i)] =
                  src[i] + pl * ((src[i + 1] - src[i]) - (src[i] - src[i - 1]));
            cur[static_cast<size_t>(ni - 1)] = src[ni - 1] - pl * (src[ni - 1] - src[ni - 2]);
          } else if (src != cur.data()) {
            std::copy(src, src + ni, cur.data());
          }

          if (run) {
            if (hoist_all) {
              const double radd = rew_const[static_cast<size_t>(l)];
              if (radd != 0.0)
                for (int i = 0; i < ni; ++i) cur[static_cast<size_t>(i)] += radd;
            } else if (hoist_row) {
              const double radd =
                  run->rate(t_mid, snap, levels_[static_cast<size_t>(l)]) * dt;
              if (radd != 0.0)
                for (int i = 0; i < ni; ++i) cur[static_cast<size_t>(i)] += radd;
            } else {
              for (int i = 0; i < ni; ++i) {
                if (lat_.has_x)
                  snap.x = lat_.x.nodes[i];
                else
                  snap.q = lat_.q.nodes[i];
                cur[static_cast<size_t>(i)] +=
                    run->rate(t_mid, snap, levels_[static_cast<size_t>(l)]) * dt;
              }
            }
          }

          if (l == 0) {
            std::copy(cur.data(), cur.data() + ni, best);
          } else {
            for (int i = 0; i < ni; ++i) {
              if (cur[static_cast<size_t>(i)] > best[i]) {
                best[i] = cur[static_cast<size_t>(i)];
                if (amax) amax[i] = static_cast<std::uint8_t>(l);
              }
            }
          }
        }
      }
    });

    lat_.v.swap(vnew_);
  }

  // Fold every mark frozen at time t back into its live coordinate: the new
  // value at (state) is the old value at (state, mark = live coordinate).
  // Mark axes are exact copies of their source axis, so this is a pure
  // gather along the diagonal.
  void consume_marks_at(double t) {
    for (;;) {
      int pos = -1;
      for (size_t j = 0; j < lat_.active.size(); ++j)
        if (std::abs(lat_.declared[static_cast<size_t>(lat_.active[j])].time - t) <=
            grid_.tol()) {
          pos = static_cast<int>(j);
          break;
        }
      if (pos < 0) return;

      const int id = lat_.active[static_cast<size_t>(pos)];
      const long long dead_stride = lat_.mark_stride(pos);
      const bool pin_inner =
          lat_.declared[static_cast<size_t>(id)].source == MarkSource::x || !lat_.has_x;
      const bool sep_q = lat_.has_x && lat_.has_q;
      const int ni = lat_.n_inner;
      const int nq = lat_.has_q ? lat_.q.n : 0;

      std::vector<int> new_active = lat_.active;
      new_active.erase(new_active.begin() + pos);
      long long new_outer = sep_q ? nq : 1;
      for (int nid : new_active) new_outer *= lat_.source_axis(nid).n;

      Eigen::ArrayXd nv(new_outer * ni);
      const double* vold = lat_.v.data();
      run_chunked(new_outer, opt_.threads, [&](long long b, long long e) {
        for (long long o = b; o < e; ++o) {
          // Rebuild the old-layout row base from the new-layout digits,
          // leaving the dead axis at index 0.
          long long rem = o;
          long long old_base = 0;
          long long old_stride = ni;
          int iq = 0;
          if (sep_q) {
            iq = static_cast<int>(rem % nq);
            rem /= nq;
            old_base += static_cast<long long>(iq) * ni;
            old_stride *= nq;
          }
          for (size_t j = 0; j < lat_.active.size(); ++j) {
            const Axis& aj = lat_.source_axis(lat_.active[j]);
            if (static_cast<int>(j) == pos) {
              old_stride *= aj.n;
              continue;
            }
            const long long dj = rem % aj.n;
            rem /= aj.n;
            old_base += dj * old_stride;
            old_stride *= aj.n;
          }
          double* out = nv.data() + o * ni;
          if (pin_inner) {
            const double* row = vold + old_base;
            for (int i = 0; i < ni; ++i) out[i] = row[i + dead_stride * i];
          } else {
            const double* row = vold + old_base + dead_stride * iq;
            for (int i = 0; i < ni; ++i) out[i] = row[i];
          }
        }
      });

      lat_.v.swap(nv);
      lat_.active = std::move(new_active);
      vnew_.resize(0);  // sized lazily on the next step
    }
  }

  const VolatilityBand& band_;
  const TimeGrid& grid_;
  StateSpec spec_;
  const Functional& f_;
  SolveOptions opt_;
  std::vector<double> levels_;
  Lattice lat_;
  Eigen::ArrayXd vnew_;
  ClampStats clamps_;
  std::optional<DpPolicy> policy_;
};

// Node index of coordinate `c` on a uniform axis; `c` must land on a node
// up to a small fraction of the axis width.
int exact_node_index(const Axis& a, double c, const char* what) {
  const double span = a.hi - a.lo;
  const int i = static_cast<int>(std::lround((c - a.lo) / a.d));
  if (i < 0 || i >= a.n || std::abs(a.nodes[i] - c) > kNodeSnapTol * std::max(span, 1.0))
    throw std::invalid_argument(std::string("solver: ") + what +
                                " does not land on a lattice node");
  return i;
}

}  // namespace

StateSpec resolve_spec(StateSpec spec, const VolatilityBand& band, double horizon) {
  if (!(horizon > 0.0)) throw std::invalid_argument("state spec: horizon must be positive");
  if (!spec.track_x && !spec.track_q)
    throw std::invalid_argument("state spec: track at least one of X and Q");
  if (spec.resolution < 3) throw std::invalid_argument("state spec: resolution must be >= 3");
  if (spec.resolution % 2 == 0)
    throw std::invalid_argument("state spec: resolution must be odd so the origin is a node");
  if (spec.marks.size() > 2)
    throw std::invalid_argument("state spec: at most two marks are supported");
  for (const Mark& m : spec.marks) {
    if (!(m.time >= 0.0) || !(m.time < horizon))
      throw std::invalid_argument("state spec: mark time must lie in [0, horizon)");
    if (m.source == MarkSource::x && !spec.track_x)
      throw std::invalid_argument("state spec: mark copies X but X is not tracked");
    if (m.source == MarkSource::q && !spec.track_q)
      throw std::invalid_argument("state spec: mark copies Q but Q is not tracked");
  }

  const double q_top = band.sigma_hi_sq() * horizon;
  if (spec.track_x && !(spec.x_range.hi > spec.x_range.lo)) {
    const double half = 6.0 * std::sqrt(band.sigma_hi_sq() * horizon);
    spec.x_range = {-half, half};
  }
  if (spec.track_q && !(spec.q_range.hi > spec.q_range.lo)) spec.q_range = {0.0, q_top};

  if (spec.track_x && (!(spec.x_range.lo < 0.0) || !(spec.x_range.hi > 0.0)))
    throw std::invalid_argument("state spec: X range must straddle the start point 0");
  if (spec.track_q) {
    if (spec.q_range.lo != 0.0)
      throw std::invalid_argument("state spec: Q range must start at 0");
    if (spec.q_range.hi > q_top * (1.0 + 1e-9))
      throw std::invalid_argument(
          "state spec: Q range exceeds the reachable maximum sigma_hi_sq * horizon");
  }
  return spec;
}

StateSpec spec_for_integrand(const Integrand& eta, bool need_x_dynamics) {
  StateSpec spec;
  spec.marks = eta.marks();
  for (const Mark& m : spec.marks) {
    if (m.source == MarkSource::x) spec.track_x = true;
    if (m.source == MarkSource::q) spec.track_q = true;
  }
  if (need_x_dynamics) spec.track_x = true;
  if (!spec.track_x && !spec.track_q) spec.track_q = true;
  return spec;
}

ValueSlice::ValueSlice(std::vector<Axis> axes, Eigen::ArrayXd values, double t)
    : axes_(std::move(axes)), values_(std::move(values)), t_(t) {
  long long n = 1;
  for (const auto& a : axes_) n *= a.nodes.size();
  if (n != values_.size())
    throw std::invalid_argument("value slice: node count does not match the axes");
}

double ValueSlice::eval(const StateSnapshot& snap) const {
  const int d = static_cast<int>(axes_.size());
  if (d == 0) return values_[0];
  if (d > 4) throw std::logic_error("value slice: more than four axes");

  int base[4];
  double th[4];
  long long stride[4];
  long long s = 1;
  for (int i = 0; i < d; ++i) {
    const Axis& a = axes_[static_cast<size_t>(i)];
    const long long n = a.nodes.size();
    double c = 0.0;
    switch (a.kind) {
      case Axis::Kind::x: c = snap.x; break;
      case Axis::Kind::q: c = snap.q; break;
      case Axis::Kind::mark: c = snap.marks[static_cast<size_t>(a.mark_index)]; break;
    }
    if (n == 1) {
      base[i] = 0;
      th[i] = 0.0;
    } else {
      const double step = (a.nodes[n - 1] - a.nodes[0]) / static_cast<double>(n - 1);
      double pos = (c - a.nodes[0]) / step;
      const double r = std::round(pos);
      if (std::abs(pos - r) < kNodeSnapTol) pos = r;  // keep nodal reads exact
      pos = std::clamp(pos, 0.0, static_cast<double>(n - 1));
      const int j = std::min(static_cast<int>(pos), static_cast<int>(n - 2));
      base[i] = j;
      th[i] = pos - j;
    }
    stride[i] = s;
    s *= n;
  }

  double acc = 0.0;
  for (int corner = 0; corner < (1 << d); ++corner) {
    double wgt = 1.0;
    long long idx = 0;
    for (int i = 0; i < d; ++i) {
      const bool up = (corner >> i) & 1;
      wgt *= up ? th[i] : 1.0 - th[i];
      idx += (base[i] + (up ? 1 : 0)) * stride[i];
    }
    if (wgt != 0.0) acc += wgt * values_[idx];
  }
  return acc;
}

double DpPolicy::sigma_sq_at(int k, double x, double q, std::span<const double> marks) const {
  const Step& st = steps.at(static_cast<size_t>(k));
  long long idx = 0;
  long long stride = 1;
  for (const auto& a : st.axes) {
    const long long n = a.nodes.size();
    double c = 0.0;
    switch (a.kind) {
      case ValueSlice::Axis::Kind::x: c = x; break;
      case ValueSlice::Axis::Kind::q: c = q; break;
      case ValueSlice::Axis::Kind::mark: c = marks[static_cast<size_t>(a.mark_index)]; break;
    }
    long long j = 0;
    if (n > 1) {
      const double step = (a.nodes[n - 1] - a.nodes[0]) / static_cast<double>(n - 1);
      j = std::clamp<long long>(std::llround((c - a.nodes[0]) / step), 0, n - 1);
    }
    idx += j * stride;
    stride *= n;
  }
  return sigma_levels[st.argmax.at(static_cast<size_t>(idx))];
}

SolveResult solve_expectation(const VolatilityBand& band, const TimeGrid& grid,
                              const StateSpec& spec, const Functional& f,
                              const SolveOptions& opt) {
  Engine eng(band, grid, resolve_spec(spec, band, grid.horizon()), f, opt);
  eng.backward_to(0.0);

  const Lattice& lat = eng.lattice();
  if (!lat.active.empty()) throw std::logic_error("solver: marks survived to time 0");
  long long idx = 0;
  if (lat.has_x) idx = exact_node_index(lat.x, 0.0, "start point X = 0");
  if (lat.has_q) {
    const long long iq0 = exact_node_index(lat.q, 0.0, "start point Q = 0");
    idx = lat.has_x ? idx + iq0 * lat.n_inner : iq0;
  }

  SolveResult out;
  out.value = lat.v[idx];
  out.report.value = out.value;
  out.report.error_proxy = 0.0;
  out.report.method = "dp";
  out.clamps = eng.clamps();
  out.policy = std::move(eng.policy());
  return out;
}

ValueSlice conditional_expectation(const VolatilityBand& band, const TimeGrid& grid,
                                   const StateSpec& spec, const Functional& f, double t,
                                   const SolveOptions& opt) {
  Engine eng(band, grid, resolve_spec(spec, band, grid.horizon()), f, opt);
  eng.backward_to(t);
  const Lattice& lat = eng.lattice();
  return ValueSlice(lat.slice_axes(), lat.v, t);
}

TimeGrid build_dp_grid(const VolatilityBand& band, double horizon, const StateSpec& spec,
                       const std::vector<double>& breakpoints, int n_sign_cells,
                       double target_safety, Margin margin) {
  if (!(target_safety > 0.0))
    throw std::invalid_argument("build_dp_grid: target_safety must be positive");
  const StateSpec rs = resolve_spec(spec, band, horizon);
  const double hi = band.hi_eff(margin);

  double dt_max = std::numeric_limits<double>::infinity();
  if (rs.track_x) {
    const double dx = (rs.x_range.hi - rs.x_range.lo) / (rs.resolution - 1);
    dt_max = std::min(dt_max, target_safety * dx * dx / hi);
  }
  if (rs.track_q) {
    const double dq = (rs.q_range.hi - rs.q_range.lo) / (rs.resolution - 1);
    dt_max = std::min(dt_max, dq / hi);
  }

  std::vector<double> bps = breakpoints;
  for (const Mark& m : rs.marks)
    if (m.time > 0.0) bps.push_back(m.time);
  const TimeGrid coarse = align_grid(TimeGrid({0.0, horizon}), std::max(n_sign_cells, 1), bps, 1);

  std::vector<double> knots;
  for (int k = 0; k < coarse.n_cells(); ++k) {
    const double a = coarse.knot(k);
    const double b = coarse.knot(k + 1);
    const int m = std::max(1, static_cast<int>(std::ceil((b - a) / dt_max - 1e-9)));
    knots.push_back(a);
    for (int j = 1; j < m; ++j) knots.push_back(a + (b - a) * j / m);
  }
  knots.push_back(horizon);
  return TimeGrid(std::move(knots));
}

}  // namespace gexp::control
