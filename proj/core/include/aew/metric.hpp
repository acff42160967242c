#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "aew/common.hpp"
#include "aew/jet.hpp"
#include "aew/report.hpp"

namespace aew {

enum class MetricFamily { flat, radial_bump, anisotropic_bump, custom };

MetricFamily parse_family(const std::string& name);
std::string to_string(MetricFamily f);

/// Coordinates as jets, one per axis (unused axes are constant zero).
using JetPoint = std::array<Jet, 3>;

/// Entry g_ij as a function of jet coordinates. Only i <= j is queried.
using JetEntries = std::function<Jet(int i, int j, const JetPoint& x)>;

/// Entry matrix as a plain function of position (d x d, symmetric).
using TabulatedEntries = std::function<Mat(const Point& x)>;

/// Smooth Riemannian metric on R^d with declared decay rate rho.
///
/// Immutable after construction. Analytic families carry exact derivatives
/// through jets; tabulated metrics fall back to central differences.
class MetricField {
 public:
  MetricField(int dimension, double decay_rate, MetricFamily family, double amplitude,
              JetEntries entries);
  MetricField(int dimension, double decay_rate, TabulatedEntries entries);

  [[nodiscard]] int dimension() const { return d_; }
  [[nodiscard]] double decay_rate() const { return rho_; }
  [[nodiscard]] MetricFamily family() const { return family_; }
  [[nodiscard]] double amplitude() const { return amplitude_; }
  /// True when derivatives come from jets, false for the finite-difference fallback.
  [[nodiscard]] bool analytic_derivatives() const { return analytic_; }
  [[nodiscard]] bool is_flat() const { return family_ == MetricFamily::flat; }

  [[nodiscard]] Mat entries(const Point& x) const;
  [[nodiscard]] Mat inverse(const Point& x) const;
  /// g(x) = det(g_ij)^{1/4}
  [[nodiscard]] double conformal_factor(const Point& x) const;

  /// d^alpha g_ij at x for |alpha| <= 3.
  [[nodiscard]] double derivative(int i, int j, const MultiIndex& alpha, const Point& x) const;

  /// Gradient of the inverse entries: out[k] = d_k g^{..}(x), each d x d.
  [[nodiscard]] std::vector<Mat> inverse_gradient(const Point& x) const;

  /// Largest eigenvalue of (g^{jk})^{1/2}: the local wave speed bound.
  [[nodiscard]] double max_speed(const Point& x) const;

 private:
  [[nodiscard]] Mat fd_derivative(const MultiIndex& alpha, const Point& x) const;

  int d_;
  double rho_;
  MetricFamily family_;
  double amplitude_;
  bool analytic_;
  JetEntries jet_entries_;
  TabulatedEntries tab_entries_;
};

/// Builds a built-in family and validates positivity on a low-discrepancy probe set.
/// radial_bump: g_ij = (1 + a<x>^{-rho}) delta_ij.
/// anisotropic_bump: g_ij = delta_ij + a x_i x_j <x>^{-rho-2} for i != j.
MetricField make_metric(MetricFamily family, int d, double rho, double amplitude,
                        double probe_half_width = 16.0);

/// Custom metric from jet-valued entries (exact derivatives), positivity-checked.
MetricField make_analytic_metric(int d, double rho, JetEntries entries,
                                 double probe_half_width = 16.0);

/// Custom metric from plain entries; derivatives by central differences with h = 1e-4 <x>.
MetricField make_tabulated_metric(int d, double rho, TabulatedEntries entries,
                                  double probe_half_width = 16.0);

/// Halton points in [-w, w]^d, with the origin prepended.
std::vector<Point> probe_points(int d, std::size_t count, double half_width);

/// Smallest eigenvalue of g_ij over the probe set; throws Error if not positive.
double check_positivity(const MetricField& m, double probe_half_width);

/// sup over probes at each radius of |d^a(g_ij - delta_ij)| <x>^{|a| + rate}.
/// rate defaults to the declared decay rate. Verdict pass = no growth trend.
EstimateReport decay_check(const MetricField& m, const std::vector<double>& probe_radii,
                           int alpha_max, std::optional<double> rate = std::nullopt);

struct GeodesicOptions {
  double seed_radius = 0.5;
  double rtol = 1e-10;
  double atol = 1e-12;
  int max_steps = 200000;
};

/// Ray-samples the Hamiltonian flow of p0 = g^{jk} xi_j xi_k / 2 on p0 = 1/2.
/// Verdict pass ("escaped") if every ray leaves |x| <= R_escape before T_max.
EstimateReport geodesic_escape(const MetricField& m, int n_rays, double T_max, double R_escape,
                               const GeodesicOptions& opts = {});

}  // namespace aew
