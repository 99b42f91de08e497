#include "gexp/integrand.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gexp {

Integrand::Integrand(std::vector<double> knots, std::vector<Coefficient> coeffs,
                     std::vector<Mark> marks)
    : knots_(std::move(knots)), coeffs_(std::move(coeffs)), marks_(std::move(marks)) {
  if (knots_.size() < 2) throw std::invalid_argument("integrand: need at least two knots");
  if (knots_.front() != 0.0) throw std::invalid_argument("integrand: knots must start at 0");
  for (size_t i = 1; i < knots_.size(); ++i)
    if (!(knots_[i] > knots_[i - 1]))
      throw std::invalid_argument("integrand: knots must be strictly increasing");
  if (coeffs_.size() + 1 != knots_.size())
    throw std::invalid_argument("integrand: need one coefficient per piece");

  const double tol = 1e-12 * horizon();
  for (const Mark& m : marks_)
    if (m.time < -tol || m.time > horizon() + tol)
      throw std::invalid_argument("integrand: mark time outside [0, horizon]");
  for (size_t i = 0; i < coeffs_.size(); ++i) {
    const Coefficient& c = coeffs_[i];
    if (c.is_constant) continue;
    if (!c.fn) throw std::invalid_argument("integrand: state coefficient without callable");
    for (int r : c.reads) {
      if (r < 0 || r >= static_cast<int>(marks_.size()))
        throw std::invalid_argument("integrand: coefficient reads undeclared mark");
      if (marks_[static_cast<size_t>(r)].time > knots_[i] + tol)
        throw std::invalid_argument(
            "integrand: coefficient reads a mark frozen after its piece starts");
    }
  }
}

Integrand Integrand::step(std::vector<double> knots, const std::vector<double>& values) {
  std::vector<Coefficient> cs(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    cs[i].is_constant = true;
    cs[i].constant = values[i];
    cs[i].bound = std::abs(values[i]);
  }
  return Integrand(std::move(knots), std::move(cs));
}

Integrand Integrand::constant(double value, double horizon) {
  return step({0.0, horizon}, {value});
}

bool Integrand::is_deterministic() const {
  return std::all_of(coeffs_.begin(), coeffs_.end(),
                     [](const Coefficient& c) { return c.is_constant; });
}

double Integrand::sup_bound() const {
  double b = 0.0;
  for (const Coefficient& c : coeffs_) b = std::max(b, c.bound);
  return b;
}

int Integrand::piece_index(double t) const {
  if (t <= knots_.front()) return 0;
  if (t > horizon() + 1e-12 * horizon())
    throw std::out_of_range("integrand: t beyond horizon");
  auto it = std::lower_bound(knots_.begin(), knots_.end(), t);
  int idx = static_cast<int>(it - knots_.begin()) - 1;
  // lower_bound lands on the knot itself when t matches one; the right-closed
  // convention keeps that point in the piece ending there.
  if (it != knots_.end() && *it == t) return std::max(0, idx);
  return std::min(idx, pieces() - 1);
}

double Integrand::value_of_piece(int i, const StateSnapshot& snap) const {
  const Coefficient& c = coeffs_[static_cast<size_t>(i)];
  return c.is_constant ? c.constant : c.fn(snap.marks);
}

double Integrand::value_at(double t, const StateSnapshot& snap) const {
  return value_of_piece(piece_index(t), snap);
}

namespace {

Integrand map_coefficients(const Integrand& eta,
                           const std::function<Integrand::Coefficient(
                               const Integrand::Coefficient&)>& map) {
  std::vector<Integrand::Coefficient> cs;
  cs.reserve(eta.coefficients().size());
  for (const auto& c : eta.coefficients()) cs.push_back(map(c));
  return Integrand(eta.knots(), std::move(cs), eta.marks());
}

}  // namespace

Integrand abs_of(const Integrand& eta) {
  return map_coefficients(eta, [](const Integrand::Coefficient& c) {
    Integrand::Coefficient out = c;
    if (c.is_constant) {
      out.constant = std::abs(c.constant);
    } else {
      auto fn = c.fn;
      out.fn = [fn](std::span<const double> m) { return std::abs(fn(m)); };
    }
    return out;  // |.| is 1-Lipschitz, bound and lipschitz carry over
  });
}

Integrand scaled(const Integrand& eta, double lambda) {
  return map_coefficients(eta, [lambda](const Integrand::Coefficient& c) {
    Integrand::Coefficient out = c;
    out.bound = std::abs(lambda) * c.bound;
    out.lipschitz = std::abs(lambda) * c.lipschitz;
    if (c.is_constant) {
      out.constant = lambda * c.constant;
    } else {
      auto fn = c.fn;
      out.fn = [fn, lambda](std::span<const double> m) { return lambda * fn(m); };
    }
    return out;
  });
}

Integrand g_drift(const Integrand& eta, const VolatilityBand& band, Margin margin) {
  const double hi = band.hi_eff(margin);
  return map_coefficients(eta, [&band, margin, hi](const Integrand::Coefficient& c) {
    Integrand::Coefficient out = c;
    out.bound = hi * c.bound;
    out.lipschitz = hi * c.lipschitz;
    if (c.is_constant) {
      out.constant = 2.0 * eval_g(band, c.constant, margin);
    } else {
      auto fn = c.fn;
      VolatilityBand b = band;
      out.fn = [fn, b, margin](std::span<const double> m) {
        return 2.0 * eval_g(b, fn(m), margin);
      };
    }
    return out;
  });
}

Integrand difference(const Integrand& eta, const Integrand& zeta) {
  const double T = eta.horizon();
  if (std::abs(zeta.horizon() - T) > 1e-12 * T)
    throw std::invalid_argument("difference: horizons disagree");

  // Merge mark declarations, remembering where zeta's land.
  std::vector<Mark> marks = eta.marks();
  std::vector<int> zeta_mark_pos(zeta.marks().size());
  const double tol = 1e-12 * T;
  for (size_t j = 0; j < zeta.marks().size(); ++j) {
    const Mark& mz = zeta.marks()[j];
    int found = -1;
    for (size_t i = 0; i < marks.size(); ++i)
      if (marks[i].source == mz.source && std::abs(marks[i].time - mz.time) <= tol) {
        found = static_cast<int>(i);
        break;
      }
    if (found < 0) {
      marks.push_back(mz);
      found = static_cast<int>(marks.size()) - 1;
    }
    zeta_mark_pos[j] = found;
  }
  const int n_eta_marks = static_cast<int>(eta.marks().size());

  std::vector<double> knots = eta.knots();
  knots.insert(knots.end(), zeta.knots().begin(), zeta.knots().end());
  std::sort(knots.begin(), knots.end());
  std::vector<double> merged;
  for (double t : knots)
    if (merged.empty() || t - merged.back() > tol) merged.push_back(t);

  std::vector<Integrand::Coefficient> cs;
  cs.reserve(merged.size() - 1);
  for (size_t k = 0; k + 1 < merged.size(); ++k) {
    const double mid = 0.5 * (merged[k] + merged[k + 1]);
    const auto& ce = eta.coefficients()[static_cast<size_t>(eta.piece_index(mid))];
    const auto& cz = zeta.coefficients()[static_cast<size_t>(zeta.piece_index(mid))];
    Integrand::Coefficient out;
    out.bound = ce.bound + cz.bound;
    out.lipschitz = ce.lipschitz + cz.lipschitz;
    if (ce.is_constant && cz.is_constant) {
      out.is_constant = true;
      out.constant = ce.constant - cz.constant;
    } else {
      out.is_constant = false;
      out.reads = ce.reads;  // eta marks keep their indices
      for (int r : cz.reads) out.reads.push_back(zeta_mark_pos[static_cast<size_t>(r)]);
      // Re-index zeta's mark span: it declared marks by its own positions.
      auto pos = zeta_mark_pos;
      Integrand::Coefficient e = ce, z = cz;
      out.fn = [e, z, pos, n_eta_marks](std::span<const double> m) {
        const double ve = e.is_constant ? e.constant : e.fn(m.subspan(0, static_cast<size_t>(n_eta_marks)));
        double vz;
        if (z.is_constant) {
          vz = z.constant;
        } else {
          std::vector<double> zm(pos.size());
          for (size_t j = 0; j < pos.size(); ++j) zm[j] = m[static_cast<size_t>(pos[j])];
          vz = z.fn(zm);
        }
        return ve - vz;
      };
    }
    cs.push_back(std::move(out));
  }
  return Integrand(std::move(merged), std::move(cs), std::move(marks));
}

}  // namespace gexp
