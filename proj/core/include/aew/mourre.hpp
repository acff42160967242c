#pragma once

#include <functional>
#include <string>
#include <vector>

#include "aew/discretize.hpp"
#include "aew/report.hpp"
#include "aew/spectral.hpp"

namespace aew {

enum class Regime { low, intermediate, high };

std::string to_string(Regime r);

/// f(P) A0 f(P) expressed in the eigenbasis of P.
///
/// Only eigen-indices where the cutoff is nonzero carry the operator, so it is
/// stored as a real antisymmetric block S on that support; the conjugate
/// operator itself is A = -i V_s S V_s^T.
struct ConjugateOperator {
  Regime regime = Regime::low;
  double lambda = 1.0;                ///< scale for the low regime, threshold for high
  Vec cutoff;                         ///< f at every eigenvalue
  std::vector<Eigen::Index> support;  ///< eigen-indices with f != 0
  Mat S;                              ///< support x support block
  double antisymmetry_residual = 0.0; ///< before explicit antisymmetrization, relative

  [[nodiscard]] Eigen::Index rank() const { return static_cast<Eigen::Index>(support.size()); }
  /// Real antisymmetric n x n matrix V_s S V_s^T.
  [[nodiscard]] Mat grid_matrix(const SpectralData& s) const;
};

/// low: f = phi(lambda x); intermediate: f = phi(x); high: f = 1 - chi(x / lambda).
ConjugateOperator conjugate(Regime regime, const SpectralData& s, const DiscreteModel& model,
                            double lambda, const DyadicPartition& partition = DyadicPartition(6));

/// Same sandwich with an arbitrary cutoff f evaluated at the eigenvalues.
ConjugateOperator conjugate_with_cutoff(Regime regime, const SpectralData& s,
                                        const DiscreteModel& model, double lambda,
                                        const std::function<double(double)>& f);

struct MourreReport {
  Interval interval;  ///< in units of lambda P
  double lambda = 1.0;
  Eigen::Index rank = 0;
  double commutator_min = 0.0;
  double commutator_trace = 0.0;
  double paper_bound = 0.0;  ///< delta^2 sqrt(inf I) / 2
  double slack = 0.2;
  double remainder_norm = 0.0;  ///< ||R 1_I||, R = [i(lambda P)^{1/2}, A] - (lambda P)^{1/2} f^2
  bool pass = false;
};

/// Forms K = 1_I [i (lambda P)^{1/2}, A] 1_I on ran 1_I and compares its smallest
/// eigenvalue with delta^2 sqrt(inf I)/2 (1 - slack). Throws on an empty window.
MourreReport mourre_check(const ConjugateOperator& c, const SpectralData& s, const Interval& I,
                          double delta, double slack = 0.2);

/// mourre_check over a list of scales; flags non-monotone verdicts.
EstimateReport mourre_scan(const SpectralData& s, const DiscreteModel& model,
                           const std::vector<double>& lambdas, const Interval& I, double delta,
                           double slack, const DyadicPartition& partition);

struct LapResult {
  double constant = 0.0;             ///< max over the z grid
  std::vector<double> eta;           ///< descending
  std::vector<double> max_over_re;   ///< per eta
  double last_ratio = 0.0;           ///< value at the last eta over the one before
  bool stabilized = false;           ///< last_ratio < 2
};

/// <A>^{-mu} (H - z)^{-1} <A>^{-mu} with H = (lambda P)^{1/2} for the low regime
/// (P^{1/2} otherwise), J in spectral units of H, Re z on 21 points of J.
LapResult lap_constant(const SpectralData& s, const ConjugateOperator& A, const Interval& J,
                       double mu, const std::vector<double>& eta_grid);

/// Default eta grid 10^{-k/2}, k = 2..12.
std::vector<double> default_eta_grid();

/// int_0^T ||<A>^{-mu} e^{-itH} 1_J(H) u||^2 dt in closed form for each column of `samples`.
/// mu > 1/2: ratio against 8 C ||u||^2 at T_max. mu <= 1/2: fitted T exponent over
/// T = 2, 4, ..., T_max against 1 - 2 mu + 0.1.
EstimateReport kato_smoothness_check(const SpectralData& s, const ConjugateOperator& A,
                                     const Interval& J, double mu, const Mat& samples,
                                     double T_max, double lap_C);

/// ||<x>^{-mu}||-weighted norms of |A_lambda|^mu and <A_lambda>^mu psi(lambda P) over lambda.
EstimateReport weight_bound_scan(const SpectralData& s, const DiscreteModel& model,
                                 const std::vector<double>& lambdas, double mu,
                                 const DyadicPartition& partition);

}  // namespace aew
