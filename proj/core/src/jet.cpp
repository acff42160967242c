#include "aew/jet.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace aew {
namespace {

struct Tables {
  std::array<MultiIndex, Jet::kTerms> monomials{};
  // (i, j, k) with monomial_i * monomial_j = monomial_k and deg <= 3
  std::vector<std::array<int, 3>> products;
  std::array<std::array<std::vector<MultiIndex>, 4>, 4> restricted;  // [dim][max_order]

  Tables() {
    int n = 0;
    for (int deg = 0; deg <= Jet::kMaxOrder; ++deg)
      for (int a = deg; a >= 0; --a)
        for (int b = deg - a; b >= 0; --b) monomials[n++] = {a, b, deg - a - b};

    for (int i = 0; i < Jet::kTerms; ++i)
      for (int j = 0; j < Jet::kTerms; ++j) {
        MultiIndex s{monomials[i][0] + monomials[j][0], monomials[i][1] + monomials[j][1],
                     monomials[i][2] + monomials[j][2]};
        if (order(s) > Jet::kMaxOrder) continue;
        products.push_back({i, j, index_of(s)});
      }

    for (int dim = 1; dim <= 3; ++dim)
      for (int mo = 0; mo <= 3; ++mo)
        for (const auto& m : monomials) {
          bool ok = order(m) <= mo;
          for (int ax = dim; ax < 3; ++ax) ok = ok && m[ax] == 0;
          if (ok) restricted[dim][mo].push_back(m);
        }
  }

  [[nodiscard]] int index_of(const MultiIndex& a) const {
    for (int i = 0; i < Jet::kTerms; ++i)
      if (monomials[i] == a) return i;
    return -1;
  }
};

const Tables& tables() {
  static const Tables t;
  return t;
}

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

}  // namespace

Jet Jet::variable(int axis, double value) {
  Jet j(value);
  MultiIndex e{0, 0, 0};
  e.at(static_cast<std::size_t>(axis)) = 1;
  j.c_[tables().index_of(e)] = 1.0;
  return j;
}

double Jet::coefficient(const MultiIndex& a) const {
  if (order(a) > kMaxOrder) throw std::out_of_range("jet order exceeded");
  return c_[tables().index_of(a)];
}

double Jet::derivative(const MultiIndex& a) const {
  return coefficient(a) * factorial(a[0]) * factorial(a[1]) * factorial(a[2]);
}

Jet& Jet::operator+=(const Jet& o) {
  for (int i = 0; i < kTerms; ++i) c_[i] += o.c_[i];
  return *this;
}

Jet& Jet::operator-=(const Jet& o) {
  for (int i = 0; i < kTerms; ++i) c_[i] -= o.c_[i];
  return *this;
}

Jet& Jet::operator*=(const Jet& o) {
  std::array<double, kTerms> r{};
  for (const auto& [i, j, k] : tables().products) r[k] += c_[i] * o.c_[j];
  c_ = r;
  return *this;
}

Jet& Jet::operator*=(double s) {
  for (double& v : c_) v *= s;
  return *this;
}

Jet compose(const Jet& x, const std::array<double, 4>& f) {
  Jet h = x;
  h.c_[0] = 0.0;
  Jet out(f[0]);
  Jet hk(1.0);
  for (int k = 1; k <= Jet::kMaxOrder; ++k) {
    hk *= h;
    out += hk * (f[k] / factorial(k));
  }
  return out;
}

Jet reciprocal(const Jet& x) {
  const double a = x.value();
  return compose(x, {1.0 / a, -1.0 / (a * a), 2.0 / (a * a * a), -6.0 / (a * a * a * a)});
}

Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }

Jet pow(const Jet& x, double p) {
  const double a = x.value();
  const double v = std::pow(a, p);
  return compose(x, {v, p * v / a, p * (p - 1) * v / (a * a), p * (p - 1) * (p - 2) * v / (a * a * a)});
}

Jet sqrt(const Jet& x) { return pow(x, 0.5); }

Jet exp(const Jet& x) {
  const double v = std::exp(x.value());
  return compose(x, {v, v, v, v});
}

std::span<const MultiIndex> multi_indices(int dim, int max_order) {
  if (dim < 1 || dim > 3 || max_order < 0 || max_order > 3)
    throw std::out_of_range("multi_indices: unsupported dimension or order");
  return tables().restricted[dim][max_order];
}

}  // namespace aew
