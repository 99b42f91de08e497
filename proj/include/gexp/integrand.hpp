#pragma once

#include <functional>
#include <span>
#include <vector>

#include "gexp/band.hpp"
#include "gexp/state.hpp"

namespace gexp {

/// Piecewise-constant-in-time integrand on (0, T]. Piece i lives on
/// (knots[i], knots[i+1]] and its coefficient is either a constant or a
/// bounded Lipschitz function of marks frozen no later than the piece start
/// (that ordering is what keeps the process adapted, and it is validated).
class Integrand {
 public:
  using MarkFn = std::function<double(std::span<const double>)>;

  struct Coefficient {
    bool is_constant = true;
    double constant = 0.0;
    MarkFn fn;                    // used when !is_constant
    std::vector<int> reads;       // indices into marks(), for validation
    double bound = 0.0;           // sup |coefficient|
    double lipschitz = 0.0;       // w.r.t. the read marks jointly
  };

  Integrand(std::vector<double> knots, std::vector<Coefficient> coeffs,
            std::vector<Mark> marks = {});

  /// All-constant integrand with the given per-piece values.
  static Integrand step(std::vector<double> knots, const std::vector<double>& values);

  /// Single piece with constant value on (0, T].
  static Integrand constant(double value, double horizon);

  [[nodiscard]] const std::vector<double>& knots() const { return knots_; }
  [[nodiscard]] const std::vector<Coefficient>& coefficients() const { return coeffs_; }
  [[nodiscard]] const std::vector<Mark>& marks() const { return marks_; }
  [[nodiscard]] int pieces() const { return static_cast<int>(coeffs_.size()); }
  [[nodiscard]] double horizon() const { return knots_.back(); }
  [[nodiscard]] bool is_deterministic() const;
  [[nodiscard]] double sup_bound() const;

  /// Piece index for the cell (knots[i], knots[i+1]] containing t; t = 0
  /// maps to the first piece.
  [[nodiscard]] int piece_index(double t) const;

  [[nodiscard]] double value_at(double t, const StateSnapshot& snap) const;
  [[nodiscard]] double value_of_piece(int i, const StateSnapshot& snap) const;

 private:
  std::vector<double> knots_;
  std::vector<Coefficient> coeffs_;
  std::vector<Mark> marks_;
};

/// |eta|, piece by piece.
[[nodiscard]] Integrand abs_of(const Integrand& eta);

/// lambda * eta.
[[nodiscard]] Integrand scaled(const Integrand& eta, double lambda);

/// 2*G(eta) evaluated pointwise through the band's generator; the drift leg
/// of the finite-variation representation.
[[nodiscard]] Integrand g_drift(const Integrand& eta, const VolatilityBand& band,
                                Margin margin = Margin::off);

/// eta - zeta on the merged knot set. Marks are concatenated (eta's first);
/// duplicate (time, source) declarations are collapsed.
[[nodiscard]] Integrand difference(const Integrand& eta, const Integrand& zeta);

}  // namespace gexp
