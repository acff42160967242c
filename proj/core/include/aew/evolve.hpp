#pragma once

#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "aew/spectral.hpp"

namespace aew {

/// (u, du/dt) at time t, grid basis.
struct WaveState {
  Vec u;
  Vec v;
  double t = 0.0;
  std::string warning;  ///< set when the run leaves the causal window
};

/// Source samples G(j dt), j = 0..m-1, one column per sample (grid basis).
struct SourceSamples {
  double dt = 0.0;
  Mat values;

  [[nodiscard]] Eigen::Index count() const { return values.cols(); }
  [[nodiscard]] double duration() const { return dt * static_cast<double>(count() - 1); }
};

/// Eigen-coordinate samples of a solution on a uniform time grid.
struct Trajectory {
  double dt = 0.0;
  Mat cu;  ///< V^T u(j dt), one column per sample
  Mat cv;  ///< V^T du/dt(j dt)

  [[nodiscard]] Eigen::Index count() const { return cu.cols(); }
  [[nodiscard]] double time(Eigen::Index j) const { return dt * static_cast<double>(j); }
};

struct PropagateOptions {
  double causal_window = std::numeric_limits<double>::infinity();
};

/// Exact propagator in eigen-coordinates. Between source samples the source is
/// linear in time and the Duhamel integral is done in closed form.
WaveState propagate_exact(const SpectralData& s, const WaveState& state, double t,
                          const SourceSamples* source = nullptr,
                          const PropagateOptions& opts = {});

/// Samples j dt, j = 0..n_steps, of the solution with data (u0, u1) and a source
/// given in eigen-coordinates (n x (n_steps + 1)), or none.
Trajectory propagate_trajectory(const SpectralData& s, const Vec& u0, const Vec& u1, double dt,
                                Eigen::Index n_steps, const Mat* source_eigen = nullptr);

/// Eigen-coordinates of d_t^k u for k = 0..order on the trajectory samples, from the
/// equation d_t^k c = -sigma d_t^{k-2} c + d_t^{k-2} g. Source time derivatives are
/// second-order finite differences of the samples.
std::vector<Mat> time_derivatives(const SpectralData& s, const Trajectory& tr, int order,
                                  const Mat* source_eigen);

/// Explicit leapfrog on the sparse operator. Throws when dt breaks the CFL bound
/// 0.9 * 2 / sqrt(sigma_max), on NaN, or on unbounded growth without a source.
WaveState propagate_leapfrog(const SpMat& P, const WaveState& state, double dt,
                             Eigen::Index n_steps, const SourceSamples* source = nullptr,
                             double sigma_max = 0.0);

/// <P u, u> + |v|^2 (Euclidean, not h-weighted).
double energy(const SpectralData& s, const WaveState& state);

/// e^{-it P^{1/2}} v.
CVec half_wave(const SpectralData& s, const CVec& v, double t);

/// The wave equation as i d/dt (u, du/dt) = R (u, du/dt), R = [[0, i],[-iP, 0]],
/// and its diagonalization U R U* = diag(P^{1/2}, -P^{1/2}) in energy-orthonormal
/// coordinates (P^{1/2} u, du/dt).
class FirstOrderSystem {
 public:
  explicit FirstOrderSystem(const SpectralData& s);

  [[nodiscard]] std::pair<CVec, CVec> apply_R(const CVec& u, const CVec& v) const;
  /// (w+, w-) = ((P^{1/2} u + i v), (P^{1/2} u - i v)) / sqrt 2.
  [[nodiscard]] std::pair<CVec, CVec> apply_U(const CVec& u, const CVec& v) const;
  /// Inverse of apply_U on the strictly positive spectral subspace.
  [[nodiscard]] std::pair<CVec, CVec> apply_U_inverse(const CVec& wp, const CVec& wm) const;
  /// e^{-itR}(u, v) through the diagonal form.
  [[nodiscard]] std::pair<CVec, CVec> evolve(const CVec& u, const CVec& v, double t) const;

  /// max over modes of |U_e U_e* - I|, relative.
  [[nodiscard]] double unitarity_residual() const;
  /// max over positive modes of |U_e R_e U_e* - L_e| / max sqrt(sigma).
  [[nodiscard]] double diagonalization_residual() const;

 private:
  const SpectralData* s_;
};

}  // namespace aew
