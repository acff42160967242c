#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>

#include "aew/common.hpp"

namespace aew {

/// Checks a mid-sized BLAS matrix product against a plain loop once per process.
/// Throws Error when the BLAS kernel returns wrong results (seen with OpenBLAS
/// 0.3.20 auto-selecting Cooperlake kernels; OPENBLAS_CORETYPE=Haswell avoids it).
void verify_blas();

/// Symmetric eigendecomposition (LAPACK dsyevd). A is overwritten by the
/// orthonormal eigenvectors; the ascending eigenvalues are returned.
Vec symmetric_eigen(Mat& A);

/// Eigenvalues of the pencil A v = c B v with B symmetric positive definite.
Vec generalized_eigenvalues(const Mat& A, const Mat& B);

/// Gauss-Legendre nodes and weights on [-1, 1].
std::pair<Vec, Vec> gauss_legendre(int n);

/// Composite Simpson on uniform samples; an odd panel count ends with a 3/8 panel.
double simpson(std::span<const double> y, double dt);

using LinearMap = std::function<Vec(const Vec&)>;

struct NormEstimate {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Largest singular value of A by power iteration on A^T A.
NormEstimate operator_norm(const LinearMap& apply, const LinearMap& apply_transpose,
                           Eigen::Index cols, double rel_tol = 1e-8, int max_iter = 200,
                           std::uint64_t seed = 7);

/// Spectral norm of a dense matrix: exact SVD below `exact_limit` columns, power iteration above.
double spectral_norm(const Mat& A, Eigen::Index exact_limit = 800);
double spectral_norm(const CMat& A, Eigen::Index exact_limit = 800);

/// Largest eigenvalue of a symmetric positive semidefinite sparse matrix by power iteration.
double largest_eigenvalue(const SpMat& A, double rel_tol = 1e-10, int max_iter = 5000);

/// Smallest eigenvalue of a symmetric positive definite sparse matrix by inverse iteration.
double smallest_eigenvalue(const SpMat& A, double rel_tol = 1e-12, int max_iter = 2000);

}  // namespace aew
