#include "aew/linalg.hpp"

#include <cmath>
#include <mutex>
#include <numbers>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>
#include <Eigen/SVD>
#include <lapacke.h>

namespace aew {

void verify_blas() {
  static std::once_flag once;
  static std::string failure;
  std::call_once(once, [] {
    const Eigen::Index n = 320;
    Mat A(n, n), B(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i) {
        A(i, j) = std::sin(0.37 * i + 1.1 * j);
        B(i, j) = std::cos(0.91 * i - 0.53 * j);
      }
    const Mat C = A * B;
    double worst = 0.0;
    for (Eigen::Index j = 0; j < n; j += 7)
      for (Eigen::Index i = 0; i < n; i += 5) {
        double s = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) s += A(i, k) * B(k, j);
        worst = std::max(worst, std::abs(s - C(i, j)));
      }
    if (!(worst < 1e-9))
      failure = "BLAS matrix product is wrong (max error " + std::to_string(worst) +
                "); with OpenBLAS set OPENBLAS_CORETYPE=Haswell";
  });
  if (!failure.empty()) throw Error(failure);
}

Vec symmetric_eigen(Mat& A) {
  verify_blas();
  if (A.rows() != A.cols()) throw Error("symmetric_eigen needs a square matrix");
  const lapack_int n = static_cast<lapack_int>(A.rows());
  Vec w(n);
  if (n == 0) return w;
  const lapack_int info =
      LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'U', n, A.data(), n, w.data());
  if (info != 0) throw Error("dsyevd failed with info " + std::to_string(info));
  return w;
}

Vec generalized_eigenvalues(const Mat& A, const Mat& B) {
  Eigen::LLT<Mat> llt(B);
  if (llt.info() != Eigen::Success) throw Error("singular pencil: B is not positive definite");
  const Mat L = llt.matrixL();
  Mat C = L.triangularView<Eigen::Lower>().solve(A);
  C = L.triangularView<Eigen::Lower>().solve(C.transpose()).transpose();
  C = 0.5 * (C + C.transpose());
  return symmetric_eigen(C);
}

std::pair<Vec, Vec> gauss_legendre(int n) {
  if (n < 1) throw Error("gauss_legendre needs n >= 1");
  Vec x(n), w(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return {x, w};
}

double simpson(std::span<const double> y, double dt) {
  const std::size_t panels = y.empty() ? 0 : y.size() - 1;
  if (panels == 0) return 0.0;
  if (panels == 1) return 0.5 * dt * (y[0] + y[1]);
  std::size_t even = panels % 2 == 0 ? panels : panels - 3;
  double s = 0.0;
  for (std::size_t i = 0; i + 2 <= even; i += 2) s += y[i] + 4.0 * y[i + 1] + y[i + 2];
  s *= dt / 3.0;
  if (even != panels) {
    const std::size_t i = even;
    s += 3.0 * dt / 8.0 * (y[i] + 3.0 * y[i + 1] + 3.0 * y[i + 2] + y[i + 3]);
  }
  return s;
}

NormEstimate operator_norm(const LinearMap& apply, const LinearMap& apply_transpose,
                           Eigen::Index cols, double rel_tol, int max_iter, std::uint64_t seed) {
  NormEstimate out;
  if (cols == 0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Vec v(cols);
  for (Eigen::Index i = 0; i < cols; ++i) v[i] = gauss(rng);
  v.normalize();
  double prev = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    const Vec w = apply_transpose(apply(v));
    const double lam = w.norm();
    out.iterations = it;
    out.value = std::sqrt(lam);
    if (lam == 0.0) {
      out.converged = true;
      break;
    }
    v = w / lam;
    if (it > 1 && std::abs(lam - prev) <= rel_tol * lam) {
      out.converged = true;
      break;
    }
    prev = lam;
  }
  return out;
}

namespace {

template <class M>
double spectral_norm_impl(const M& A, Eigen::Index exact_limit) {
  if (A.size() == 0) return 0.0;
  if (std::min(A.rows(), A.cols()) <= exact_limit) {
    Eigen::BDCSVD<M> svd(A);
    return svd.singularValues()(0);
  }
  // Hermitian Gram power iteration
  const M G = A.adjoint() * A;
  using V = Eigen::Matrix<typename M::Scalar, Eigen::Dynamic, 1>;
  V v = V::Ones(G.cols()) / std::sqrt(static_cast<double>(G.cols()));
  double lam = 0.0;
  for (int it = 0; it < 1000; ++it) {
    V w = G * v;
    const double nl = w.norm();
    if (nl == 0.0) return 0.0;
    v = w / nl;
    if (std::abs(nl - lam) <= 1e-12 * nl) {
      lam = nl;
      break;
    }
    lam = nl;
  }
  return std::sqrt(lam);
}

}  // namespace

double spectral_norm(const Mat& A, Eigen::Index exact_limit) {
  return spectral_norm_impl(A, exact_limit);
}

double spectral_norm(const CMat& A, Eigen::Index exact_limit) {
  return spectral_norm_impl(A, exact_limit);
}

double largest_eigenvalue(const SpMat& A, double rel_tol, int max_iter) {
  Vec v = Vec::Ones(A.rows());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] += 0.1 * std::sin(1.0 + 3.7 * i);
  v.normalize();
  double lam = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vec w = A * v;
    const double nl = v.dot(w);
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    v = w / nw;
    if (it > 0 && std::abs(nl - lam) <= rel_tol * std::abs(nl)) return nl;
    lam = nl;
  }
  return lam;
}

double smallest_eigenvalue(const SpMat& A, double rel_tol, int max_iter) {
  Eigen::SimplicialLDLT<SpMat> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw Error("factorization failed in inverse iteration");
  Vec v = Vec::Ones(A.rows());
  v.normalize();
  double mu = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vec w = ldlt.solve(v);
    const double nm = v.dot(w);
    v = w / w.norm();
    if (it > 0 && std::abs(nm - mu) <= rel_tol * std::abs(nm)) {
      mu = nm;
      break;
    }
    mu = nm;
  }
  return 1.0 / mu;
}

}  // namespace aew
