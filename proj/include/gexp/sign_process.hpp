#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace gexp {

/// Alternating-sign step process on (0, T]: value (-1)^i on the cell
/// (i*T/n, (i+1)*T/n]. The value at s = 0 is fixed to +1 by convention.
class SignProcess {
 public:
  SignProcess(int n, double horizon) : n_(n), horizon_(horizon) {
    if (n_ < 1) throw std::invalid_argument("sign process: n must be >= 1");
    if (!(horizon_ > 0.0)) throw std::invalid_argument("sign process: horizon must be > 0");
  }

  [[nodiscard]] int n() const { return n_; }
  [[nodiscard]] double horizon() const { return horizon_; }
  [[nodiscard]] double cell_length() const { return horizon_ / n_; }

  /// Index of the cell (i*T/n, (i+1)*T/n] containing s; -1 for s <= 0.
  [[nodiscard]] int cell_index(double s) const {
    if (s <= 0.0) return -1;
    if (s > horizon_) throw std::out_of_range("sign process: s beyond horizon");
    // Right-closed cells: a point sitting exactly on i*T/n belongs to cell i-1.
    double scaled = s * n_ / horizon_;
    int idx = static_cast<int>(std::ceil(scaled)) - 1;
    if (idx < 0) idx = 0;
    if (idx > n_ - 1) idx = n_ - 1;
    return idx;
  }

  [[nodiscard]] int sign_at(double s) const {
    const int idx = cell_index(s);
    if (idx < 0) return +1;
    return (idx % 2 == 0) ? +1 : -1;
  }

  /// Cell boundaries {0, T/n, ..., T}, used to align evaluation grids.
  [[nodiscard]] std::vector<double> boundaries() const {
    std::vector<double> b(static_cast<size_t>(n_) + 1);
    for (int i = 0; i <= n_; ++i) b[static_cast<size_t>(i)] = horizon_ * i / n_;
    return b;
  }

 private:
  int n_;
  double horizon_;
};

}  // namespace gexp
