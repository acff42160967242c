#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace aew {

using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;
using SpMat = Eigen::SparseMatrix<double>;
using Point = Eigen::Vector3d;  // unused trailing components are zero when d < 3
using cplx = std::complex<double>;

/// Every failure the library reports to callers derives from this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Closed real interval [lo, hi].
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  [[nodiscard]] bool contains(double x) const { return x >= lo && x <= hi; }
  [[nodiscard]] double width() const { return hi - lo; }
  [[nodiscard]] bool empty() const { return hi < lo; }
};

/// <x> = (1 + |x|^2)^{1/2}
inline double japanese_bracket(const Point& x) { return std::sqrt(1.0 + x.squaredNorm()); }

}  // namespace aew
