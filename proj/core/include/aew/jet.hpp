#pragma once

#include <array>
#include <span>

namespace aew {

/// Multi-index over the three coordinate axes (unused axes stay zero).
using MultiIndex = std::array<int, 3>;

inline int order(const MultiIndex& a) { return a[0] + a[1] + a[2]; }

/// Truncated multivariate Taylor expansion about a point, through total degree 3.
///
/// Arithmetic on jets propagates exact partial derivatives, which is how the
/// analytic metric families get their derivative oracle without hand-expanded
/// formulas. Coefficients are Taylor coefficients, so d^a f = a! * coeff(a).
class Jet {
 public:
  static constexpr int kMaxOrder = 3;
  static constexpr int kTerms = 20;

  Jet() { c_.fill(0.0); }
  Jet(double constant) {  // NOLINT: implicit promotion keeps formulas readable
    c_.fill(0.0);
    c_[0] = constant;
  }

  /// The coordinate function x_axis expanded about `value`.
  static Jet variable(int axis, double value);

  [[nodiscard]] double value() const { return c_[0]; }
  [[nodiscard]] double coefficient(const MultiIndex& a) const;
  [[nodiscard]] double derivative(const MultiIndex& a) const;

  Jet& operator+=(const Jet& o);
  Jet& operator-=(const Jet& o);
  Jet& operator*=(const Jet& o);
  Jet& operator*=(double s);

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator*(Jet a, const Jet& b) { return a *= b; }
  friend Jet operator*(Jet a, double s) { return a *= s; }
  friend Jet operator*(double s, Jet a) { return a *= s; }
  friend Jet operator-(Jet a) { return a *= -1.0; }
  friend Jet operator/(const Jet& a, const Jet& b);

  /// f(jet) given f and its first three derivatives at jet.value().
  friend Jet compose(const Jet& x, const std::array<double, 4>& f_derivs);

  [[nodiscard]] std::span<const double> coefficients() const { return c_; }

 private:
  std::array<double, kTerms> c_;
};

Jet reciprocal(const Jet& x);
Jet sqrt(const Jet& x);
Jet pow(const Jet& x, double p);
Jet exp(const Jet& x);

/// All multi-indices of total order <= 3 restricted to the first `dim` axes.
std::span<const MultiIndex> multi_indices(int dim, int max_order);

}  // namespace aew
