#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>

#include "aew/common.hpp"
#include "aew/discretize.hpp"

namespace aew {

enum class SpectralMode { dense_eig, iterative };
enum class OperatorKind { P, P0, Ptilde };

SpectralMode parse_mode(const std::string& name);
OperatorKind parse_operator(const std::string& name);
std::string to_string(OperatorKind k);

const SpMat& select_operator(const DiscreteModel& model, OperatorKind which);

/// Eigendecomposition (dense mode) or factorization handle (iterative mode) of one operator.
struct SpectralData {
  SpectralMode mode = SpectralMode::dense_eig;
  OperatorKind which = OperatorKind::P;
  const SpMat* op = nullptr;  // borrowed from the model

  // dense mode
  Vec eigenvalues;   ///< ascending, clamped at 0
  Mat eigenvectors;  ///< orthonormal columns
  int clamped = 0;   ///< eigenvalues that were slightly negative and set to 0
  double reconstruction_residual = 0.0;  ///< ||P V - V S||_F / ||P||_F
  double orthogonality_residual = 0.0;   ///< ||V^T V - I||_max (probe estimate above 2000)

  // iterative mode
  std::shared_ptr<Eigen::SimplicialLDLT<SpMat>> factor;

  double sigma_min = 0.0;
  double sigma_max = 0.0;

  [[nodiscard]] Eigen::Index size() const { return op ? op->rows() : 0; }
  [[nodiscard]] bool dense() const { return mode == SpectralMode::dense_eig; }
  /// Coefficients V^T v.
  [[nodiscard]] Vec to_eigen(const Vec& v) const;
  /// Field V c.
  [[nodiscard]] Vec from_eigen(const Vec& c) const;
};

struct DecomposeOptions {
  Eigen::Index dense_cap = 5000;
  bool verify = true;
};

SpectralData decompose(const DiscreteModel& model, OperatorKind which, SpectralMode mode,
                       const DecomposeOptions& opts = {});

/// V f(S) V^T v.
Vec apply_function(const SpectralData& s, const std::function<double(double)>& f, const Vec& v);
CVec apply_complex_function(const SpectralData& s, const std::function<cplx(double)>& f,
                            const CVec& v);

struct SqrtQuadratureResult {
  Vec value;
  double sigma_min = 0.0;
  double sigma_max = 0.0;
  double sigma_ref = 0.0;
  double worst_residual = 0.0;  ///< largest relative residual over the node solves
  bool kernel_warning = false;  ///< sigma_min below 1e-12 sigma_max
};

struct SqrtQuadratureOptions {
  double solve_tol = 1e-12;
  /// Spectral bounds; estimated by power and inverse iteration when <= 0.
  double sigma_min = 0.0;
  double sigma_max = 0.0;
};

/// P^{1/2} v = (1/pi) int_0^inf s^{-1/2} P (s + P)^{-1} v ds with s = c tan^2(theta) and
/// Gauss-Legendre nodes in theta on (0, pi/2). c is the geometric mean of the spectral bounds.
SqrtQuadratureResult sqrt_quadrature(const SpMat& P, const Vec& v, int n_nodes,
                                     const SqrtQuadratureOptions& opts = {});

/// C^3 cutoff: 1 on (-inf, 1], 0 on [2, inf), 1 - S(t - 1) between with
/// S(t) = 35t^4 - 84t^5 + 70t^6 - 20t^7.
double smooth_cutoff(double t);
double smooth_cutoff_derivative(double t);

/// Dyadic partition phi(x) = chi(x) - chi(2x), supported in [1/2, 2].
class DyadicPartition {
 public:
  explicit DyadicPartition(int n_max) : n_max_(n_max) {}

  [[nodiscard]] int n_max() const { return n_max_; }
  [[nodiscard]] double chi(double x) const { return smooth_cutoff(x); }
  [[nodiscard]] double phi(double x) const;
  /// chi(x/2) - chi(4x): equals 1 on supp phi, supported in [1/4, 4].
  [[nodiscard]] double phi_tilde(double x) const;
  [[nodiscard]] double phi_derivative(double x) const;
  /// Sum_{n=0}^{n_max} phi(2^n x).
  [[nodiscard]] double partition_sum(double x) const;
  /// Range where the partition sums to one: [2^{-n_max}, 1].
  [[nodiscard]] Interval coverage() const;
  [[nodiscard]] Interval support() const { return {0.5, 2.0}; }
  /// Largest open interval around 1 with phi > delta.
  [[nodiscard]] Interval interval_above(double delta) const;

 private:
  int n_max_;
};

DyadicPartition build_dyadic(int n_max);

/// Indices k with eigenvalue in J.
std::vector<Eigen::Index> spectral_indices(const SpectralData& s, const Interval& J);

/// Orthogonal projector onto the eigenvectors with eigenvalue in J (dense n x n).
Mat spectral_projector(const SpectralData& s, const Interval& J);

/// (op - z)^{-1} v; dense mode through the eigendecomposition, iterative mode by sparse LU.
CVec resolvent_apply(const SpectralData& s, cplx z, const CVec& v);

/// CSV with columns index,eigenvalue.
void write_eigenvalues_csv(std::ostream& os, const SpectralData& s);

}  // namespace aew
