#pragma once

#include <optional>
#include <stdexcept>

namespace gexp {

/// Whether an evaluation uses the full variance band or the band shrunk by
/// the safety margin on both ends.
enum class Margin { off, on };

/// Closed variance band [sigma_lo_sq, sigma_hi_sq] with an optional margin
/// eps that shrinks it to [sigma_lo_sq + eps, sigma_hi_sq - eps].
class VolatilityBand {
 public:
  VolatilityBand(double sigma_lo_sq, double sigma_hi_sq,
                 std::optional<double> margin_eps = std::nullopt)
      : lo_(sigma_lo_sq), hi_(sigma_hi_sq), eps_(margin_eps) {
    if (!(lo_ >= 0.0)) throw std::invalid_argument("band: sigma_lo_sq must be >= 0");
    if (!(lo_ < hi_)) throw std::invalid_argument("band: need sigma_lo_sq < sigma_hi_sq");
    if (eps_) {
      if (!(*eps_ >= 0.0)) throw std::invalid_argument("band: margin_eps must be >= 0");
      if (!(*eps_ < 0.5 * (hi_ - lo_)))
        throw std::invalid_argument("band: margin_eps must be < (sigma_hi_sq - sigma_lo_sq)/2");
    }
  }

  [[nodiscard]] double sigma_lo_sq() const { return lo_; }
  [[nodiscard]] double sigma_hi_sq() const { return hi_; }
  [[nodiscard]] bool has_margin() const { return eps_.has_value(); }

  [[nodiscard]] double margin_eps() const {
    if (!eps_) throw std::logic_error("band: margin_eps requested but never set");
    return *eps_;
  }

  [[nodiscard]] double lo_eff(Margin m) const { return m == Margin::on ? lo_ + margin_eps() : lo_; }
  [[nodiscard]] double hi_eff(Margin m) const { return m == Margin::on ? hi_ - margin_eps() : hi_; }

  [[nodiscard]] double width() const { return hi_ - lo_; }
  [[nodiscard]] double mid() const { return 0.5 * (hi_ + lo_); }

  /// Band with the margin folded into the endpoints and no margin of its own.
  [[nodiscard]] VolatilityBand shrunk() const {
    return VolatilityBand(lo_eff(Margin::on), hi_eff(Margin::on));
  }

  [[nodiscard]] bool contains(double sq, Margin m) const {
    return sq >= lo_eff(m) && sq <= hi_eff(m);
  }

 private:
  double lo_;
  double hi_;
  std::optional<double> eps_;
};

/// Generator value (1/2)*(hi*a^+ - lo*a^-), the envelope of (1/2)*s*a over
/// s in the (possibly margin-shrunk) band. Positively homogeneous,
/// subadditive, and monotone in the band ordering.
[[nodiscard]] inline double eval_g(const VolatilityBand& band, double a,
                                   Margin margin = Margin::off) {
  const double hi = band.hi_eff(margin);
  const double lo = band.lo_eff(margin);
  return a >= 0.0 ? 0.5 * hi * a : 0.5 * lo * a;
}

}  // namespace gexp
