#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "aew/discretize.hpp"
#include "aew/estimates.hpp"
#include "aew/evolve.hpp"
#include "aew/report.hpp"
#include "aew/spectral.hpp"

namespace aew {

/// Q(u') = sum_ab q_ab u'_a u'_b over u' = (d/dt u, dtilde_1 u, ..., dtilde_d u) at the nodes.
struct QuadraticForm {
  Mat q;

  static QuadraticForm zero(int d);
  /// (d/dt u)^2
  static QuadraticForm time_squared(int d);

  [[nodiscard]] int dimension() const { return static_cast<int>(q.rows()) - 1; }
  [[nodiscard]] bool is_zero() const { return q.isZero(0.0); }
  [[nodiscard]] bool uses_gradient() const;
  /// Pointwise evaluation; columns are time samples.
  [[nodiscard]] Mat evaluate(const Mat& ut, const std::vector<Mat>& grad) const;
  void validate() const;
};

/// Sum_{|a|+j<=M+1} ||d_x^j Omega^a u0|| + Sum_{|a|+j<=M} ||d_x^j Omega^a u1||, h-weighted.
/// d_x^j is the set of centered differences of order j (norm of the collection), Omega^a runs
/// over multi-indices in the rotations.
double data_norm(const DiscreteModel& model, const Vec& u0, const Vec& u1, int M);

/// M = 2 (ceil((d - 1)/2) + 1).
int default_data_order(int d);

/// One Picard iterate: trajectory plus the source (eigen-coordinates) that produced it.
struct Iterate {
  Trajectory traj;
  Mat source;  ///< empty for the linear solution
};

/// Zero trajectory on m = n_steps + 1 samples: the starting point u_{-1} = 0.
Iterate zero_iterate(const SpectralData& s, double dt, Eigen::Index n_steps);

/// Solves d_t^2 u + P u = Q(u'_{prev}) with the given data on the samples of prev.
/// Throws Error("iteration_divergence ...") when Q is not finite.
Iterate picard_step(const DiscreteModel& model, const SpectralData& s, const Iterate& prev,
                    const WaveData& data, const QuadraticForm& q);

/// Difference u_a - u_b as an iterate (linear in both trajectory and source).
Iterate difference(const Iterate& a, const Iterate& b);

/// sup_t Sum_{1<=i+j<=M+1} ||d_t^i P^{j/2} u|| + Sum_{|a|<=M} K_n(T)^{-1} ||<x>^{-mu_d}(Z^a u)'||
/// with K_n(T) = T^{1/n} over the trajectory window.
double functional_M(const DiscreteModel& model, const SpectralData& s, const Iterate& it,
                    double mu_d, int M, int n);

/// (d - 1) / 4
double default_mu_d(int d);

enum class Termination { horizon_reached, functional_blowup, iteration_divergence };
std::string to_string(Termination t);

struct NonlinearOptions {
  double dt = 1.0 / 32.0;      ///< trajectory sample spacing
  int max_iter = 20;
  double tol = 1e-8;           ///< A_k < tol * M_0
  int functional_order = 2;    ///< M in the functional
  int n = 2;                   ///< K_n(T) = T^{1/n}
  double blowup_factor = 1e3;
  int refinements = 3;         ///< bisection steps after the first failed window
  int threads = 1;             ///< concurrent sweep entries
};

struct PicardRun {
  bool converged = false;
  Termination reason = Termination::horizon_reached;
  int iterations = 0;
  std::vector<double> A;  ///< A_k = M(u_k - u_{k-1}), k >= 1
  std::vector<double> M;  ///< M(u_k), k >= 0
  double sup_u = 0.0;
  Iterate last;
};

/// Picard iteration on [0, T] with u_{-1} = 0.
PicardRun picard_run(const DiscreteModel& model, const SpectralData& s, const WaveData& data,
                     const QuadraticForm& q, double T, const NonlinearOptions& opts);

struct LifespanRecord {
  double delta = 0.0;
  double T_obs = 0.0;
  Termination reason = Termination::horizon_reached;
  int iterations = 0;
  double final_M = 0.0;
  std::vector<double> M_trace;
  bool truncated = false;  ///< T_obs hit the horizon
};

/// Scales (u0, u1) to data_norm = delta and grows windows T = 1, 2, 4, ... up to T_max,
/// then bisects the first failing window.
LifespanRecord lifespan(const DiscreteModel& model, const SpectralData& s, const WaveData& shape,
                        double delta, const QuadraticForm& q, double T_max,
                        const NonlinearOptions& opts);

/// Lifespans over a descending delta list and the fitted slope of log T_obs vs log(1/delta).
EstimateReport lifespan_sweep(const DiscreteModel& model, const SpectralData& s,
                              const WaveData& shape, const std::vector<double>& deltas,
                              const QuadraticForm& q, double T_max, const NonlinearOptions& opts,
                              std::vector<LifespanRecord>* records = nullptr);

/// CSV with columns delta,T_obs,reason,iterations,final_M.
void write_lifespan_csv(std::ostream& os, const std::vector<LifespanRecord>& records);

/// sup over R/2 <= |x| <= R of |h| against R^{(1-d)/2} Sum_{|a|<=ceil((d-1)/2)+1} ||Y^a h||,
/// Y = {d_x, Omega}, for each column of `samples` and each radius.
EstimateReport sobolev_weight_check(const DiscreteModel& model, const Mat& samples,
                                    const std::vector<double>& radii);

/// Bumps centered at 3R/4 on the first axis with radius R/4, one per R.
Mat annulus_samples(const Grid& g, const std::vector<double>& radii);

}  // namespace aew
