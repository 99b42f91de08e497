#include "gexp/paths.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <utility>

#include "gexp/rng.hpp"

namespace gexp::paths {

namespace {

/// Runs body(begin, end) over contiguous chunks of [0, count); the partition
/// never influences results because paths are independent. The first
/// exception thrown by any worker is rethrown on the calling thread.
void run_chunked(int count, int threads, const std::function<void(int, int)>& body) {
  threads = std::min(std::max(threads, 1), count);
  if (threads <= 1) {
    body(0, count);
    return;
  }
  const int chunk = (count + threads - 1) / threads;
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::mutex error_mu;
  for (int t = 0; t < threads; ++t) {
    const int b = t * chunk;
    const int e = std::min(count, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&, b, e] {
      try {
        body(b, e);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

void require_knot(const TimeGrid& grid, double t, const char* what) {
  if (grid.find_knot(t) < 0)
    throw std::invalid_argument(std::string("paths: grid misses a knot required by ") + what +
                                " (unaligned grid)");
}

/// Mark values for one path, read straight off the bundle arrays. Safe to
/// prefill: integrand adaptedness (validated at construction) already
/// guarantees no coefficient reads a mark from its future.
std::vector<int> mark_knot_indices(const PathBundle& bundle, const std::vector<Mark>& marks) {
  std::vector<int> idx(marks.size());
  for (size_t j = 0; j < marks.size(); ++j) {
    const int k = bundle.grid.find_knot(marks[j].time);
    if (k < 0) throw std::invalid_argument("paths: grid misses a mark time (unaligned grid)");
    idx[j] = k;
  }
  return idx;
}

}  // namespace

PathBundle simulate_paths(const VolatilityBand& band, const TimeGrid& grid,
                          const ControlPolicy& policy, int n_paths, std::uint64_t seed,
                          const SimOptions& opt) {
  if (n_paths < 1) throw std::invalid_argument("paths: need at least one path");

  // Fail fast on alignment and horizon problems before spawning workers.
  { PolicyEvaluator probe(policy, grid); }

  const int n = grid.n_cells();
  PathBundle bundle{grid,
                    Eigen::ArrayXXd::Zero(n + 1, n_paths),
                    Eigen::ArrayXXd::Zero(n + 1, n_paths),
                    Eigen::ArrayXXd::Zero(n + 1, n_paths),
                    policy.id,
                    seed};

  std::vector<double> sqrt_dt(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) sqrt_dt[static_cast<size_t>(k)] = std::sqrt(grid.dt(k));

  run_chunked(n_paths, opt.threads, [&](int begin, int end) {
    for (int p = begin; p < end; ++p) {
      PathRng rng(seed, p);
      PolicyEvaluator ev(policy, grid);
      auto wc = bundle.w.col(p);
      auto xc = bundle.x.col(p);
      auto qc = bundle.q.col(p);
      for (int k = 0; k < n; ++k) {
        StateSnapshot snap;
        snap.t = grid.knot(k);
        snap.x = xc(k);
        snap.q = qc(k);
        const double sq = ev.sigma_sq(k, snap);
        if (!band.contains(sq, opt.margin))
          throw std::runtime_error(
              "paths: policy produced a variance outside the band (invariant breach)");
        const double dw = sqrt_dt[static_cast<size_t>(k)] * rng.normal();
        wc(k + 1) = wc(k) + dw;
        xc(k + 1) = xc(k) + std::sqrt(sq) * dw;
        qc(k + 1) = qc(k) + sq * grid.dt(k);
      }
    }
  });
  return bundle;
}

Eigen::ArrayXd integrate(const PathBundle& bundle, const Integrand& eta, IntegrationMode mode,
                         const std::optional<SignProcess>& sign) {
  const TimeGrid& grid = bundle.grid;
  if (sign && mode != IntegrationMode::d_qv)
    throw std::invalid_argument("paths: the sign process only weights d_qv integrals");
  if (std::abs(eta.horizon() - grid.horizon()) > grid.tol())
    throw std::invalid_argument("paths: integrand horizon differs from bundle horizon");
  for (double t : eta.knots()) require_knot(grid, t, "an integrand breakpoint");
  if (sign)
    for (double t : sign->boundaries()) require_knot(grid, t, "a sign-process cell");

  const std::vector<int> mark_idx = mark_knot_indices(bundle, eta.marks());

  const int n = grid.n_cells();
  std::vector<int> piece(static_cast<size_t>(n));
  std::vector<double> weight_scale(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double tm = grid.knot(k) + 0.5 * grid.dt(k);
    piece[static_cast<size_t>(k)] = eta.piece_index(tm);
    weight_scale[static_cast<size_t>(k)] = sign ? static_cast<double>(sign->sign_at(tm)) : 1.0;
  }

  Eigen::ArrayXd out(bundle.n_paths());
  std::vector<double> markbuf(eta.marks().size());
  for (int p = 0; p < bundle.n_paths(); ++p) {
    for (size_t j = 0; j < mark_idx.size(); ++j) {
      const int k = mark_idx[j];
      markbuf[j] = eta.marks()[j].source == MarkSource::x ? bundle.x(k, p) : bundle.q(k, p);
    }
    double acc = 0.0;
    for (int k = 0; k < n; ++k) {
      StateSnapshot snap;
      snap.t = grid.knot(k);
      snap.x = bundle.x(k, p);
      snap.q = bundle.q(k, p);
      snap.marks = markbuf;
      const double xi = eta.value_of_piece(piece[static_cast<size_t>(k)], snap);
      const double dm = mode == IntegrationMode::d_qv ? bundle.q(k + 1, p) - bundle.q(k, p)
                                                      : grid.dt(k);
      acc += xi * weight_scale[static_cast<size_t>(k)] * dm;
    }
    out(p) = acc;
  }
  return out;
}

Eigen::ArrayXd evaluate_functional(const PathBundle& bundle, const control::Functional& f,
                                   const std::vector<Mark>& marks) {
  const TimeGrid& grid = bundle.grid;
  if (f.running) {
    if (!f.running->rate) throw std::invalid_argument("paths: running reward with no rate");
    for (double t : f.running->breakpoints)
      if (t > grid.tol() && t < grid.horizon() - grid.tol())
        require_knot(grid, t, "a running-reward breakpoint");
  }
  const std::vector<int> mark_idx = mark_knot_indices(bundle, marks);

  const int n = grid.n_cells();
  Eigen::ArrayXd out(bundle.n_paths());
  std::vector<double> markbuf(marks.size());
  for (int p = 0; p < bundle.n_paths(); ++p) {
    for (size_t j = 0; j < mark_idx.size(); ++j) {
      const int k = mark_idx[j];
      markbuf[j] = marks[j].source == MarkSource::x ? bundle.x(k, p) : bundle.q(k, p);
    }
    double acc = 0.0;
    if (f.running) {
      for (int k = 0; k < n; ++k) {
        const double dt = grid.dt(k);
        StateSnapshot snap;
        snap.t = grid.knot(k);
        snap.x = bundle.x(k, p);
        snap.q = bundle.q(k, p);
        snap.marks = markbuf;
        const double sq = (bundle.q(k + 1, p) - bundle.q(k, p)) / dt;
        acc += f.running->rate(snap.t + 0.5 * dt, snap, sq) * dt;
      }
    }
    if (f.terminal) {
      StateSnapshot snap;
      snap.t = grid.horizon();
      snap.x = bundle.x(n, p);
      snap.q = bundle.q(n, p);
      snap.marks = markbuf;
      acc += f.terminal(snap);
    }
    out(p) = acc;
  }
  return out;
}

EstimateReport mc_estimate(const VolatilityBand& band, const TimeGrid& grid,
                           const std::vector<ControlPolicy>& policies, const control::Functional& f,
                           const std::vector<Mark>& marks, int n_paths, std::uint64_t seed,
                           const SimOptions& opt) {
  if (policies.empty()) throw std::invalid_argument("paths: mc_estimate needs at least one policy");
  if (n_paths < 2) throw std::invalid_argument("paths: mc_estimate needs at least two paths");

  double best_mean = 0.0;
  double best_stderr = 0.0;
  bool have_best = false;
  for (const auto& policy : policies) {
    const PathBundle bundle = simulate_paths(band, grid, policy, n_paths, seed, opt);
    const Eigen::ArrayXd vals = evaluate_functional(bundle, f, marks);
    double mean = 0.0;
    for (int p = 0; p < vals.size(); ++p) mean += vals(p);
    mean /= static_cast<double>(vals.size());
    double ss = 0.0;
    for (int p = 0; p < vals.size(); ++p) ss += (vals(p) - mean) * (vals(p) - mean);
    const double se = std::sqrt(ss / static_cast<double>(vals.size() - 1) /
                                static_cast<double>(vals.size()));
    if (!have_best || mean > best_mean) {
      have_best = true;
      best_mean = mean;
      best_stderr = se;
    }
  }

  EstimateReport report;
  report.value = best_mean;
  report.error_proxy = 3.0 * best_stderr;
  report.method = "mc-lower-bound";
  return report;
}

void write_paths_csv(const PathBundle& bundle, const std::string& file_path) {
  std::ofstream out(file_path);
  if (!out) throw std::runtime_error("paths: cannot open " + file_path + " for writing");
  char buf[512];
  std::snprintf(buf, sizeof buf, "# seed=%llu policy=%s\n",
                static_cast<unsigned long long>(bundle.seed), bundle.policy_id.c_str());
  out << buf << "t,W,X,Q\n";
  for (int p = 0; p < bundle.n_paths(); ++p) {
    for (int k = 0; k < bundle.n_knots(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", bundle.grid.knot(k),
                    bundle.w(k, p), bundle.x(k, p), bundle.q(k, p));
      out << buf;
    }
  }
  if (!out) throw std::runtime_error("paths: failed writing " + file_path);
}

}  // namespace gexp::paths
