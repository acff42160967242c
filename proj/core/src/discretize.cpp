#include "aew/discretize.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <string>

namespace aew {

Grid::Grid(int d, int N, double L) : d_(d), n_(N), L_(L) {
  if (d < 1 || d > 3) throw Error("unsupported dimension " + std::to_string(d));
  if (N < 3) throw Error("need at least 3 points per axis");
  if (!(L > 0.0)) throw Error("half width must be positive");
  h_ = 2.0 * L / (N - 1);
  size_ = 1;
  for (int k = 0; k < d; ++k) size_ *= N;
}

Eigen::Index Grid::index(const std::array<int, 3>& ijk) const {
  Eigen::Index flat = 0;
  for (int k = d_ - 1; k >= 0; --k) flat = flat * n_ + ijk[k];
  return flat;
}

std::array<int, 3> Grid::multi_index(Eigen::Index flat) const {
  std::array<int, 3> ijk{0, 0, 0};
  for (int k = 0; k < d_; ++k) {
    ijk[k] = static_cast<int>(flat % n_);
    flat /= n_;
  }
  return ijk;
}

Point Grid::x(Eigen::Index flat) const {
  const auto ijk = multi_index(flat);
  Point p = Point::Zero();
  for (int k = 0; k < d_; ++k) p[k] = coordinate(ijk[k]);
  return p;
}

namespace {

// Edge grid along `axis`: N+1 positions on that axis, N on the others.
struct EdgeLayout {
  int d, n, axis;
  [[nodiscard]] int extent(int k) const { return k == axis ? n + 1 : n; }
  [[nodiscard]] Eigen::Index index(const std::array<int, 3>& ijk) const {
    Eigen::Index flat = 0;
    for (int k = d - 1; k >= 0; --k) flat = flat * extent(k) + ijk[k];
    return flat;
  }
  [[nodiscard]] std::array<int, 3> multi_index(Eigen::Index flat) const {
    std::array<int, 3> ijk{0, 0, 0};
    for (int k = 0; k < d; ++k) {
      ijk[k] = static_cast<int>(flat % extent(k));
      flat /= extent(k);
    }
    return ijk;
  }
};

}  // namespace

Point Grid::edge_midpoint(int axis, Eigen::Index edge) const {
  const EdgeLayout lay{d_, n_, axis};
  const auto ijk = lay.multi_index(edge);
  Point p = Point::Zero();
  for (int k = 0; k < d_; ++k)
    p[k] = k == axis ? -L_ + (ijk[k] - 0.5) * h_ : coordinate(ijk[k]);
  return p;
}

Vec Grid::coordinates(int axis) const {
  Vec c(size_);
  for (Eigen::Index i = 0; i < size_; ++i) c[i] = coordinate(multi_index(i)[axis]);
  return c;
}

Vec Grid::radii() const {
  Vec r(size_);
  for (Eigen::Index i = 0; i < size_; ++i) r[i] = x(i).norm();
  return r;
}

Vec Grid::brackets() const {
  Vec r(size_);
  for (Eigen::Index i = 0; i < size_; ++i) r[i] = japanese_bracket(x(i));
  return r;
}

Grid build_grid(int d, int N, double L) { return Grid(d, N, L); }

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

SpMat forward_difference(const Grid& g, int axis) {
  const EdgeLayout lay{g.dimension(), g.points_per_axis(), axis};
  const int n = g.points_per_axis();
  const double inv_h = 1.0 / g.spacing();
  Triplets t;
  t.reserve(2 * g.edge_count(axis));
  for (Eigen::Index e = 0; e < g.edge_count(axis); ++e) {
    auto ijk = lay.multi_index(e);
    const int k = ijk[axis];
    if (k <= n - 1) t.emplace_back(e, g.index(ijk), inv_h);
    if (k >= 1) {
      ijk[axis] = k - 1;
      t.emplace_back(e, g.index(ijk), -inv_h);
    }
  }
  SpMat D(g.edge_count(axis), g.size());
  D.setFromTriplets(t.begin(), t.end());
  return D;
}

SpMat centered_difference(const Grid& g, int axis) {
  const int n = g.points_per_axis();
  const double c = 0.5 / g.spacing();
  Triplets t;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    auto ijk = g.multi_index(i);
    const int k = ijk[axis];
    if (k + 1 <= n - 1) {
      ijk[axis] = k + 1;
      t.emplace_back(i, g.index(ijk), c);
    }
    if (k - 1 >= 0) {
      ijk[axis] = k - 1;
      t.emplace_back(i, g.index(ijk), -c);
    }
  }
  SpMat Dc(g.size(), g.size());
  Dc.setFromTriplets(t.begin(), t.end());
  return Dc;
}

// Maps values on b-edges to a-edge positions by averaging the four b-edges
// adjacent to the two (real) nodes of each a-edge.
SpMat edge_average(const Grid& g, int a, int b) {
  const EdgeLayout la{g.dimension(), g.points_per_axis(), a};
  const EdgeLayout lb{g.dimension(), g.points_per_axis(), b};
  const int n = g.points_per_axis();
  Triplets t;
  for (Eigen::Index e = 0; e < g.edge_count(a); ++e) {
    const auto ijk = la.multi_index(e);
    for (int side = -1; side <= 0; ++side) {
      const int k = ijk[a] + side;
      if (k < 0 || k > n - 1) continue;
      auto node = ijk;
      node[a] = k;
      for (int off = 0; off <= 1; ++off) {
        auto be = node;
        be[b] = node[b] + off;
        t.emplace_back(e, lb.index(be), 0.25);
      }
    }
  }
  SpMat M(g.edge_count(a), g.edge_count(b));
  M.setFromTriplets(t.begin(), t.end());
  return M;
}

SpMat diagonal(const Vec& v) {
  SpMat S(v.size(), v.size());
  S.reserve(Eigen::VectorXi::Constant(v.size(), 1));
  for (Eigen::Index i = 0; i < v.size(); ++i) S.insert(i, i) = v[i];
  S.makeCompressed();
  return S;
}

SpMat symmetrized(const SpMat& A) {
  SpMat At = A.transpose();
  SpMat S = 0.5 * (A + At);
  S.prune(0.0);
  S.makeCompressed();
  return S;
}

}  // namespace

SpMat assemble_dilation(const Grid& g) {
  SpMat S(g.size(), g.size());
  for (int a = 0; a < g.dimension(); ++a) {
    const SpMat X = diagonal(g.coordinates(a));
    const SpMat Dc = centered_difference(g, a);
    SpMat term = X * Dc;
    SpMat term2 = Dc * X;
    S += 0.5 * (term + term2);
  }
  S.prune(0.0);
  S.makeCompressed();
  return S;
}

DiscreteModel assemble_operators(const MetricField& m, const Grid& g) {
  if (m.dimension() != g.dimension()) throw Error("metric and grid dimensions differ");
  const int d = g.dimension();
  DiscreteModel model(g);
  model.metric = &m;
  model.bracket = g.brackets();
  model.conformal.resize(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double c = m.conformal_factor(g.x(i));
    if (!(c > 0.0)) throw Error("conformal factor is not positive at a grid point");
    model.conformal[i] = c;
  }
  const SpMat Ginv = diagonal(model.conformal.cwiseInverse());

  // edge-midpoint coefficients g^2 g^{ab}, stored per (a, b) on a-edges
  std::vector<std::vector<Vec>> coef(d, std::vector<Vec>(d));
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < d; ++b) coef[a][b].resize(g.edge_count(a));
    Vec eb(g.edge_count(a));
    for (Eigen::Index e = 0; e < g.edge_count(a); ++e) {
      const Point x = g.edge_midpoint(a, e);
      eb[e] = japanese_bracket(x);
      const double gc = m.conformal_factor(x);
      if (!(gc > 0.0)) throw Error("singular coefficient at an edge midpoint");
      const Mat ginv = m.inverse(x);
      for (int b = 0; b < d; ++b) coef[a][b][e] = gc * gc * ginv(a, b);
    }
    model.edge_bracket.push_back(eb);
  }

  SpMat P0(g.size(), g.size()), Pt(g.size(), g.size());
  for (int a = 0; a < d; ++a) {
    model.D.push_back(forward_difference(g, a));
    const SpMat& Da = model.D.back();
    SpMat Dat = Da.transpose();
    P0 += SpMat(Dat * Da);
    Pt += SpMat(Dat * diagonal(coef[a][a]) * Da);
  }
  SpMat cross(g.size(), g.size());
  bool any_cross = false;
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) {
      if (a == b || coef[a][b].cwiseAbs().maxCoeff() == 0.0) continue;
      any_cross = true;
      SpMat Dat = model.D[a].transpose();
      cross += SpMat(Dat * diagonal(coef[a][b]) * edge_average(g, a, b) * model.D[b]);
    }
  if (any_cross) Pt += 0.5 * (cross + SpMat(cross.transpose()));

  model.P0 = symmetrized(P0);
  model.Ptilde = symmetrized(Pt);
  model.P = symmetrized(SpMat(Ginv * model.Ptilde * Ginv));

  for (int a = 0; a < d; ++a) {
    model.Dc.push_back(centered_difference(g, a));
    model.dtilde.push_back(SpMat(model.D[a] * Ginv));
    model.dtilde_node.push_back(SpMat(model.Dc[a] * Ginv));
  }
  for (int k = 0; k < d; ++k)
    for (int l = k + 1; l < d; ++l) {
      model.rotation_pairs.emplace_back(k, l);
      SpMat R = SpMat(diagonal(g.coordinates(k)) * model.Dc[l]) -
                SpMat(diagonal(g.coordinates(l)) * model.Dc[k]);
      R.prune(0.0);
      model.rot.push_back(R);
      model.rot_tilde.push_back(SpMat(R * Ginv));
    }
  model.A0 = assemble_dilation(g);
  return model;
}

double symmetry_residual(const SpMat& A) {
  SpMat diff = A - SpMat(A.transpose());
  double num = 0.0, den = 0.0;
  for (int k = 0; k < diff.outerSize(); ++k)
    for (SpMat::InnerIterator it(diff, k); it; ++it) num = std::max(num, std::abs(it.value()));
  for (int k = 0; k < A.outerSize(); ++k)
    for (SpMat::InnerIterator it(A, k); it; ++it) den = std::max(den, std::abs(it.value()));
  return den == 0.0 ? 0.0 : num / den;
}

void write_triplets(std::ostream& os, const SpMat& A) {
  os << A.rows() << ' ' << A.cols() << ' ' << A.nonZeros() << '\n';
  for (int k = 0; k < A.outerSize(); ++k)
    for (SpMat::InnerIterator it(A, k); it; ++it)
      os << it.row() << ' ' << it.col() << ' ' << format_number(it.value()) << '\n';
}

SpMat read_triplets(std::istream& is) {
  Eigen::Index rows = 0, cols = 0, nnz = 0;
  if (!(is >> rows >> cols >> nnz)) throw Error("malformed triplet header");
  Triplets t;
  t.reserve(nnz);
  for (Eigen::Index k = 0; k < nnz; ++k) {
    Eigen::Index r = 0, c = 0;
    double v = 0.0;
    if (!(is >> r >> c >> v)) throw Error("truncated triplet file");
    t.emplace_back(r, c, v);
  }
  SpMat A(rows, cols);
  A.setFromTriplets(t.begin(), t.end());
  return A;
}

double causal_window(const DiscreteModel& model, double R_data) {
  double cmax = 1.0;
  if (model.metric != nullptr && !model.metric->is_flat()) {
    cmax = 0.0;
    for (Eigen::Index i = 0; i < model.grid.size(); ++i)
      cmax = std::max(cmax, model.metric->max_speed(model.grid.x(i)));
  }
  return (model.grid.half_width() - R_data) / cmax;
}

}  // namespace aew
