#pragma once

#include <array>
#include <iosfwd>
#include <vector>

#include "aew/common.hpp"
#include "aew/metric.hpp"

namespace aew {

/// Uniform tensor grid on [-L, L]^d with N points per axis.
///
/// Flattened index: i0 + N * (i1 + N * i2), axis 0 fastest. Homogeneous
/// Dirichlet ghost nodes sit one spacing outside the box, so every grid point
/// is an unknown.
class Grid {
 public:
  Grid(int d, int N, double L);

  [[nodiscard]] int dimension() const { return d_; }
  [[nodiscard]] int points_per_axis() const { return n_; }
  [[nodiscard]] double half_width() const { return L_; }
  [[nodiscard]] double spacing() const { return h_; }
  [[nodiscard]] Eigen::Index size() const { return size_; }
  /// h^d: the quadrature weight of one cell.
  [[nodiscard]] double cell_volume() const { return std::pow(h_, d_); }

  [[nodiscard]] double coordinate(int i) const { return -L_ + i * h_; }
  [[nodiscard]] Eigen::Index index(const std::array<int, 3>& ijk) const;
  [[nodiscard]] std::array<int, 3> multi_index(Eigen::Index flat) const;
  [[nodiscard]] Point x(Eigen::Index flat) const;

  /// Number of edges along `axis`, counting the two ghost edges per grid line.
  [[nodiscard]] Eigen::Index edge_count(int /*axis*/) const { return size_ / n_ * (n_ + 1); }
  /// Edge e along axis joins node (k-1) and node k on its line, k = 0..N; midpoint below.
  [[nodiscard]] Point edge_midpoint(int axis, Eigen::Index edge) const;

  /// Coordinate vector of `axis` over all nodes.
  [[nodiscard]] Vec coordinates(int axis) const;
  /// |x| over all nodes.
  [[nodiscard]] Vec radii() const;
  /// <x> over all nodes.
  [[nodiscard]] Vec brackets() const;

 private:
  int d_;
  int n_;
  double L_;
  double h_;
  Eigen::Index size_;
};

/// Builds a grid. Requires d in {1,2,3}, N >= 3, L > 0.
Grid build_grid(int d, int N, double L);

/// Assembled symmetric operators on a grid. Immutable once built.
struct DiscreteModel {
  explicit DiscreteModel(Grid g) : grid(std::move(g)) {}

  Grid grid;
  const MetricField* metric = nullptr;  // borrowed; must outlive the model

  SpMat P;       ///< G^{-1} D^T W D G^{-1}
  SpMat P0;      ///< D^T D, the free Dirichlet Laplacian
  SpMat Ptilde;  ///< D^T W D

  Vec conformal;  ///< g at nodes
  Vec bracket;    ///< <x> at nodes

  std::vector<SpMat> D;           ///< forward edge differences, one per axis
  std::vector<Vec> edge_bracket;  ///< <x> at edge midpoints, one per axis
  std::vector<SpMat> Dc;          ///< centered node differences (antisymmetric)
  std::vector<SpMat> dtilde;      ///< D_j G^{-1}: edge version of d_j g^{-1}
  std::vector<SpMat> dtilde_node; ///< Dc_j G^{-1}: node version of d_j g^{-1}
  /// rotations, indexed by pair (k, l) with k < l in lexicographic order
  std::vector<std::pair<int, int>> rotation_pairs;
  std::vector<SpMat> rot;        ///< X_k Dc_l - X_l Dc_k
  std::vector<SpMat> rot_tilde;  ///< X_k Dc_l G^{-1} - X_l Dc_k G^{-1}
  /// Real antisymmetric S = (X Dc + Dc X)/2 summed over axes; the dilation
  /// generator is A0 = -i S, so i[H, A0] = [H, S].
  SpMat A0;

  /// <x>^s at nodes.
  [[nodiscard]] Vec weight(double s) const { return bracket.array().pow(s).matrix(); }
  /// <x>^s at edge midpoints of `axis`.
  [[nodiscard]] Vec edge_weight(int axis, double s) const {
    return edge_bracket[axis].array().pow(s).matrix();
  }
  /// h^{d/2}-weighted L2 norm on nodes.
  [[nodiscard]] double l2(const Vec& v) const { return std::sqrt(grid.cell_volume()) * v.norm(); }
};

/// Assembles P, P0, Ptilde and the vector-field matrices for metric m on grid g.
DiscreteModel assemble_operators(const MetricField& m, const Grid& g);

/// Dilation generator S (A0 = -i S) on its own.
SpMat assemble_dilation(const Grid& g);

/// Largest |A - A^T| entry relative to the largest |A| entry.
double symmetry_residual(const SpMat& A);

/// Sparse triplet text format: "rows cols nnz" then one "row col value" per line.
void write_triplets(std::ostream& os, const SpMat& A);
SpMat read_triplets(std::istream& is);

/// Largest T with (L - R_data) / c_max, c_max = sup over grid of the local wave speed.
double causal_window(const DiscreteModel& model, double R_data);

}  // namespace aew
