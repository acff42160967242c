#include "aew/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>

#include <Eigen/SparseLU>
#include <spdlog/spdlog.h>

#include "aew/linalg.hpp"
#include "aew/report.hpp"

namespace aew {

SpectralMode parse_mode(const std::string& name) {
  if (name == "dense_eig" || name == "dense") return SpectralMode::dense_eig;
  if (name == "iterative") return SpectralMode::iterative;
  throw Error("unknown spectral mode '" + name + "'");
}

OperatorKind parse_operator(const std::string& name) {
  if (name == "P") return OperatorKind::P;
  if (name == "P0") return OperatorKind::P0;
  if (name == "Ptilde") return OperatorKind::Ptilde;
  throw Error("unknown operator '" + name + "'");
}

std::string to_string(OperatorKind k) {
  switch (k) {
    case OperatorKind::P:
      return "P";
    case OperatorKind::P0:
      return "P0";
    case OperatorKind::Ptilde:
      return "Ptilde";
  }
  return "P";
}

const SpMat& select_operator(const DiscreteModel& model, OperatorKind which) {
  switch (which) {
    case OperatorKind::P0:
      return model.P0;
    case OperatorKind::Ptilde:
      return model.Ptilde;
    case OperatorKind::P:
      break;
  }
  return model.P;
}

Vec SpectralData::to_eigen(const Vec& v) const {
  if (!dense()) throw Error("eigen coordinates need dense spectral data");
  return eigenvectors.transpose() * v;
}

Vec SpectralData::from_eigen(const Vec& c) const {
  if (!dense()) throw Error("eigen coordinates need dense spectral data");
  return eigenvectors * c;
}

namespace {

double max_abs(const SpMat& A) {
  double m = 0.0;
  for (int k = 0; k < A.outerSize(); ++k)
    for (SpMat::InnerIterator it(A, k); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

}  // namespace

SpectralData decompose(const DiscreteModel& model, OperatorKind which, SpectralMode mode,
                       const DecomposeOptions& opts) {
  SpectralData s;
  s.mode = mode;
  s.which = which;
  s.op = &select_operator(model, which);
  const SpMat& A = *s.op;
  const Eigen::Index n = A.rows();

  if (mode == SpectralMode::iterative) {
    s.factor = std::make_shared<Eigen::SimplicialLDLT<SpMat>>(A);
    if (s.factor->info() != Eigen::Success) throw Error("sparse factorization failed");
    s.sigma_max = largest_eigenvalue(A);
    s.sigma_min = smallest_eigenvalue(A);
    return s;
  }

  if (n > opts.dense_cap)
    throw Error("dense decomposition refused: " + std::to_string(n) + " unknowns exceed cap " +
                std::to_string(opts.dense_cap));
  Mat V = Mat(A);
  Vec w = symmetric_eigen(V);
  const double scale = max_abs(A);
  for (Eigen::Index k = 0; k < n; ++k) {
    if (w[k] >= 0.0) continue;
    if (w[k] < -1e-10 * scale)
      throw Error("operator is not positive semidefinite: eigenvalue " + format_number(w[k]));
    w[k] = 0.0;
    ++s.clamped;
  }
  if (s.clamped > 0) spdlog::warn("{} slightly negative eigenvalues clamped to 0", s.clamped);
  s.eigenvalues = std::move(w);
  s.eigenvectors = std::move(V);
  s.sigma_min = n > 0 ? s.eigenvalues[0] : 0.0;
  s.sigma_max = n > 0 ? s.eigenvalues[n - 1] : 0.0;

  if (opts.verify && n > 0) {
    const Mat PV = A * s.eigenvectors;
    const Mat VS = s.eigenvectors * s.eigenvalues.asDiagonal();
    s.reconstruction_residual = (PV - VS).norm() / Mat(A).norm();
    if (n <= 2000) {
      const Mat G = s.eigenvectors.transpose() * s.eigenvectors;
      s.orthogonality_residual = (G - Mat::Identity(n, n)).cwiseAbs().maxCoeff();
    } else {
      std::mt19937_64 rng(11);
      std::normal_distribution<double> gauss;
      Mat X(n, 16);
      for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = gauss(rng);
      const Mat Y = s.eigenvectors.transpose() * (s.eigenvectors * X);
      s.orthogonality_residual = (Y - X).cwiseAbs().maxCoeff() / X.cwiseAbs().maxCoeff();
    }
    if (s.reconstruction_residual > 1e-10 || s.orthogonality_residual > 1e-11)
      spdlog::warn("decomposition residuals above contract: reconstruction {}, orthogonality {}",
                   s.reconstruction_residual, s.orthogonality_residual);
  }
  return s;
}

Vec apply_function(const SpectralData& s, const std::function<double(double)>& f, const Vec& v) {
  if (!s.dense()) throw Error("apply_function needs dense spectral data");
  Vec c = s.eigenvectors.transpose() * v;
  for (Eigen::Index k = 0; k < c.size(); ++k) c[k] *= f(s.eigenvalues[k]);
  return s.eigenvectors * c;
}

CVec apply_complex_function(const SpectralData& s, const std::function<cplx(double)>& f,
                            const CVec& v) {
  if (!s.dense()) throw Error("apply_function needs dense spectral data");
  const Vec re = s.eigenvectors.transpose() * v.real();
  const Vec im = s.eigenvectors.transpose() * v.imag();
  Vec out_re(re.size()), out_im(re.size());
  for (Eigen::Index k = 0; k < re.size(); ++k) {
    const cplx c = f(s.eigenvalues[k]) * cplx(re[k], im[k]);
    out_re[k] = c.real();
    out_im[k] = c.imag();
  }
  CVec out(v.size());
  out.real() = s.eigenvectors * out_re;
  out.imag() = s.eigenvectors * out_im;
  return out;
}

SqrtQuadratureResult sqrt_quadrature(const SpMat& P, const Vec& v, int n_nodes,
                                     const SqrtQuadratureOptions& opts) {
  if (n_nodes < 8) throw Error("sqrt_quadrature needs at least 8 nodes");
  SqrtQuadratureResult r;
  r.sigma_max = opts.sigma_max > 0.0 ? opts.sigma_max : largest_eigenvalue(P);
  r.sigma_min = opts.sigma_min > 0.0 ? opts.sigma_min : smallest_eigenvalue(P);
  r.kernel_warning = r.sigma_min < 1e-12 * r.sigma_max;
  if (r.kernel_warning)
    spdlog::warn("operator is numerically singular (sigma_min = {}); the square root "
                 "quadrature is inaccurate on the kernel",
                 r.sigma_min);
  const double lo = std::max(r.sigma_min, 1e-12 * r.sigma_max);
  r.sigma_ref = std::sqrt(lo * r.sigma_max);
  const double c = r.sigma_ref;

  const auto [x, w] = gauss_legendre(n_nodes);
  r.value = Vec::Zero(v.size());
  const double vnorm = v.norm();
  if (vnorm == 0.0) return r;

  Eigen::SimplicialLDLT<SpMat> ldlt;
  ldlt.analyzePattern(P);
  for (int q = 0; q < n_nodes; ++q) {
    const double theta = 0.25 * std::numbers::pi * (x[q] + 1.0);
    const double wq = 0.25 * std::numbers::pi * w[q];
    const double tn = std::tan(theta);
    const double sec2 = 1.0 + tn * tn;
    const double s = c * tn * tn;
    ldlt.setShift(s);
    ldlt.factorize(P);
    if (ldlt.info() != Eigen::Success) throw Error("resolvent factorization failed");
    Vec y = ldlt.solve(v);
    Vec res = v - (P * y + s * y);
    double rel = res.norm() / vnorm;
    if (rel > opts.solve_tol) {
      y += ldlt.solve(res);
      res = v - (P * y + s * y);
      rel = res.norm() / vnorm;
    }
    r.worst_residual = std::max(r.worst_residual, rel);
    r.value += (wq * 2.0 * std::sqrt(c) * sec2 / std::numbers::pi) * (P * y);
  }
  if (r.worst_residual > opts.solve_tol)
    spdlog::warn("sqrt_quadrature: worst node residual {} above tolerance", r.worst_residual);
  return r;
}

double smooth_cutoff(double t) {
  if (t <= 1.0) return 1.0;
  if (t >= 2.0) return 0.0;
  const double u = t - 1.0;
  const double u4 = u * u * u * u;
  return 1.0 - u4 * (35.0 + u * (-84.0 + u * (70.0 - 20.0 * u)));
}

double smooth_cutoff_derivative(double t) {
  if (t <= 1.0 || t >= 2.0) return 0.0;
  const double u = t - 1.0;
  const double u3 = u * u * u;
  return -u3 * (140.0 + u * (-420.0 + u * (420.0 - 140.0 * u)));
}

double DyadicPartition::phi(double x) const {
  if (x <= 0.0) return 0.0;
  return smooth_cutoff(x) - smooth_cutoff(2.0 * x);
}

double DyadicPartition::phi_tilde(double x) const {
  if (x <= 0.0) return 0.0;
  return smooth_cutoff(0.5 * x) - smooth_cutoff(4.0 * x);
}

double DyadicPartition::phi_derivative(double x) const {
  if (x <= 0.0) return 0.0;
  return smooth_cutoff_derivative(x) - 2.0 * smooth_cutoff_derivative(2.0 * x);
}

double DyadicPartition::partition_sum(double x) const {
  double s = 0.0, scale = 1.0;
  for (int n = 0; n <= n_max_; ++n) {
    s += phi(scale * x);
    scale *= 2.0;
  }
  return s;
}

Interval DyadicPartition::coverage() const { return {std::ldexp(1.0, -n_max_), 1.0}; }

Interval DyadicPartition::interval_above(double delta) const {
  if (!(delta < 1.0)) return {1.0, 0.0};
  auto bisect = [&](double a, double b) {
    // phi(a) <= delta < phi(b) or the reverse; find the crossing
    const bool rising = phi(a) < phi(b);
    for (int it = 0; it < 200; ++it) {
      const double m = 0.5 * (a + b);
      if ((phi(m) > delta) == rising)
        b = m;
      else
        a = m;
    }
    return 0.5 * (a + b);
  };
  return {bisect(0.5, 1.0), bisect(1.0, 2.0)};
}

DyadicPartition build_dyadic(int n_max) {
  if (n_max < 1) throw Error("dyadic partition needs n_max >= 1");
  return DyadicPartition(n_max);
}

std::vector<Eigen::Index> spectral_indices(const SpectralData& s, const Interval& J) {
  if (!s.dense()) throw Error("spectral indices need dense spectral data");
  std::vector<Eigen::Index> idx;
  for (Eigen::Index k = 0; k < s.eigenvalues.size(); ++k)
    if (J.contains(s.eigenvalues[k])) idx.push_back(k);
  return idx;
}

Mat spectral_projector(const SpectralData& s, const Interval& J) {
  const auto idx = spectral_indices(s, J);
  if (idx.empty()) spdlog::warn("spectral projector onto an empty window has rank 0");
  Mat Vj(s.size(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t c = 0; c < idx.size(); ++c) Vj.col(c) = s.eigenvectors.col(idx[c]);
  return Vj * Vj.transpose();
}

CVec resolvent_apply(const SpectralData& s, cplx z, const CVec& v) {
  if (s.dense()) return apply_complex_function(s, [z](double x) { return 1.0 / (x - z); }, v);
  using CSp = Eigen::SparseMatrix<cplx>;
  CSp A = s.op->cast<cplx>();
  CSp I(A.rows(), A.cols());
  I.setIdentity();
  A -= z * I;
  Eigen::SparseLU<CSp> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) throw Error("complex resolvent factorization failed");
  CVec x = lu.solve(v);
  const CVec r = v - A * x;
  x += lu.solve(r);
  return x;
}

void write_eigenvalues_csv(std::ostream& os, const SpectralData& s) {
  os << "index,eigenvalue\n";
  for (Eigen::Index k = 0; k < s.eigenvalues.size(); ++k)
    os << k << ',' << format_number(s.eigenvalues[k]) << '\n';
}

}  // namespace aew
