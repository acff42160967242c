#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "aew/discretize.hpp"
#include "aew/report.hpp"
#include "aew/spectral.hpp"

namespace aew {

/// Initial data (u(0), du/dt(0)) on the grid.
struct WaveData {
  std::string label;
  Vec u0;
  Vec u1;
};

/// (1 - |x - c|^2 / R^2)^4 inside the ball of radius R, zero outside.
Vec bump(const Grid& g, double radius, const Point& center = Point::Zero(), double amplitude = 1.0);

/// Three fixed data sets supported in |x| <= R_data: a centered displacement, a
/// centered velocity, and an off-center modulated pair.
std::vector<WaveData> standard_data(const Grid& g, double R_data);

/// G(t, x) = profile(t) b(x).
struct SeparableSource {
  std::string label;
  Vec spatial;
  std::function<double(double)> profile;
};

/// <F(T)> = (1 + F^2)^{1/2} with F = T^{1 - 2mu + 2eps} for mu <= 1/2 and 1 above.
double F_weight(double mu, double eps, double T);
double F_bracket(double mu, double eps, double T);

struct KssOptions {
  double dt = 1.0 / 64.0;       ///< time step of the Simpson rule; checked against dt/2
  double eps = 0.0;
  double slack = 0.15;
  double R_data = 2.0;          ///< data support radius for the causal window
  bool sqrt_variant = false;    ///< (d/dt u, P^{1/2} u) instead of (d/dt u, dtilde u)
  double top_ratio_limit = 2.0; ///< max/min of ratios over the top half of T_list
};

/// Both sides of the weighted space-time estimate for one datum.
struct KssSeries {
  std::vector<double> T;
  std::vector<double> lhs2;        ///< int_0^T ||<x>^{-mu} u'||^2
  std::vector<double> rhs;         ///< ||u'(0)|| + int_0^T ||G||
  std::vector<double> ratio;       ///< sqrt(lhs2) / (<F>^{1/2} rhs)
  double richardson = 0.0;         ///< relative dt vs dt/2 disagreement, worst over T
};

KssSeries kss_series(const DiscreteModel& model, const SpectralData& s, double mu,
                     const WaveData& datum, const std::vector<double>& T_list,
                     const SeparableSource* source, const KssOptions& opts);

EstimateReport kss_scan(const DiscreteModel& model, const SpectralData& s, double mu,
                        const std::vector<WaveData>& data, const std::vector<double>& T_list,
                        const SeparableSource* source, const KssOptions& opts);

/// Z^a = Z_1^{a_1} ... Z_m^{a_m} over Z = {d/dt, dtilde_j (node), rot_tilde_kl}; acting on u
/// it is S_a d_t^k u with k the number of d/dt factors and S_a the spatial product.
struct ZWord {
  std::string label;
  int time_order = 0;
  std::vector<const SpMat*> spatial;  ///< applied right to left
};

/// All words with |a| <= N.
std::vector<ZWord> z_words(const DiscreteModel& model, int N);

/// Per column: h^d (||<x>^{-mu} S_a F_{k+1}||^2 + sum_j ||<x>^{-mu} dtilde_j S_a F_k||^2), where
/// F_k are grid fields of d_t^k u (columns = time samples).
std::vector<double> z_word_integrand(const DiscreteModel& model, const ZWord& word,
                                     const std::vector<Mat>& fields, double mu);

/// Left and right sides of the higher-order estimate with vector fields
/// Z = {d/dt, dtilde_j (node), rot_tilde_kl}; derivatives of Z^a u are taken last.
struct HigherSeries {
  std::vector<double> T;
  std::vector<double> energy_sup;    ///< sup_t sum_{1<=k+j<=N+1} ||d_t^k P^{j/2} u||
  std::vector<double> weighted_sum;  ///< sum_a <F>^{-1} ||<x>^{-mu} (Z^a u)'||_{L2([0,T])}
  std::vector<double> rhs;           ///< sum_a ||(Z^a u)'(0)||
  std::vector<double> ratio;         ///< (energy_sup + weighted_sum) / rhs
  std::vector<std::string> words;
  std::vector<std::vector<double>> word_norms;  ///< per word, per T: ||<x>^{-mu}(Z^a u)'||
  double richardson = 0.0;
};

HigherSeries kss_higher_series(const DiscreteModel& model, const SpectralData& s, double mu,
                               int N_order, const WaveData& datum,
                               const std::vector<double>& T_list, const KssOptions& opts);

EstimateReport kss_higher(const DiscreteModel& model, const SpectralData& s, double mu,
                          int N_order, const std::vector<WaveData>& data,
                          const std::vector<double>& T_list, const KssOptions& opts);

/// Zero data, source G: int ||<x>^{-mu} u'||^2 against int ||<x>^{mu} G||^2.
struct SourceSeries {
  std::vector<double> T;
  std::vector<double> lhs2;
  std::vector<double> rhs2;
  std::vector<double> ratio;  ///< lhs2 / rhs2
  double richardson = 0.0;
};

SourceSeries weighted_source_series(const DiscreteModel& model, const SpectralData& s, double mu,
                                    const SeparableSource& source,
                                    const std::vector<double>& T_list, const KssOptions& opts);

EstimateReport weighted_source(const DiscreteModel& model, const SpectralData& s, double mu,
                               const std::vector<SeparableSource>& sources,
                               const std::vector<double>& T_list, const KssOptions& opts);

struct ResolventOptions {
  bool derivative = false;  ///< lambda^{1/2} dtilde (lambda P + 1)^{-1}, stacked over j
  double rel_tol = 1e-8;
  int max_iter = 200;
  std::uint64_t seed = 7;
};

/// Norm of <x>^beta (lambda Op + 1)^{-1} <x>^{-beta - 2 gamma} per lambda and the fitted slope.
EstimateReport resolvent_scan(const DiscreteModel& model, OperatorKind which, double beta,
                              double gamma, const std::vector<double>& lambdas,
                              const ResolventOptions& opts = {});

struct EquivalenceOptions {
  double mu_lw5 = 1.0;
  std::vector<double> mu_c16 = {1.5, 0.5};
};

struct EquivalenceConstants {
  double b53_min = 0.0, b53_max = 0.0;
  double b16_min = 0.0, b16_max = 0.0;
  double lw5 = 0.0;
  std::vector<double> c16;
};

EquivalenceConstants equivalence_constants(const DiscreteModel& model, const SpectralData& s,
                                           const EquivalenceOptions& opts = {});

EstimateReport norm_equivalences(const DiscreteModel& model, const SpectralData& s,
                                 const EquivalenceOptions& opts = {});

}  // namespace aew
