#include "aew/evolve.hpp"

#include <cmath>

#include "aew/linalg.hpp"

namespace aew {

namespace {

// Per-mode one-step propagator for u'' + sigma u = g with g linear on [0, tau]:
//   u1 = C a + Sw b + alpha g0 + beta (g1 - g0)
//   v1 = Wv a + C b + gamma g0 + delta (g1 - g0)
struct StepCoefficients {
  Vec C, Sw, Wv, alpha, beta, gamma, delta;

  StepCoefficients(const Vec& sigma, double tau) {
    const Eigen::Index n = sigma.size();
    C.resize(n);
    Sw.resize(n);
    Wv.resize(n);
    alpha.resize(n);
    beta.resize(n);
    gamma.resize(n);
    delta.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      const double sg = std::max(sigma[k], 0.0);
      const double w = std::sqrt(sg);
      const double x = w * tau;
      const double x2 = x * x;
      C[k] = std::cos(x);
      if (x < 1e-2) {
        const double sinc = 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
        const double c2 = 0.5 - x2 / 24.0 + x2 * x2 / 720.0;
        const double c3 = 1.0 / 6.0 - x2 / 120.0 + x2 * x2 / 5040.0;
        Sw[k] = tau * sinc;
        Wv[k] = -sg * tau * sinc;
        alpha[k] = tau * tau * c2;
        beta[k] = tau * tau * c3;
        delta[k] = tau * c2;
      } else {
        const double sn = std::sin(x);
        Sw[k] = sn / w;
        Wv[k] = -w * sn;
        alpha[k] = (1.0 - C[k]) / sg;
        beta[k] = (x - sn) / (sg * w * tau);
        delta[k] = (1.0 - C[k]) / (sg * tau);
      }
      gamma[k] = Sw[k];
    }
  }

  void step(Vec& a, Vec& b, const Vec* g0, const Vec* g1) const {
    Vec an = C.cwiseProduct(a) + Sw.cwiseProduct(b);
    Vec bn = Wv.cwiseProduct(a) + C.cwiseProduct(b);
    if (g0 != nullptr) {
      const Vec dg = *g1 - *g0;
      an += alpha.cwiseProduct(*g0) + beta.cwiseProduct(dg);
      bn += gamma.cwiseProduct(*g0) + delta.cwiseProduct(dg);
    }
    a = std::move(an);
    b = std::move(bn);
  }
};

void require_dense(const SpectralData& s) {
  if (!s.dense()) throw Error("exact propagation needs the dense eigendecomposition");
}

}  // namespace

WaveState propagate_exact(const SpectralData& s, const WaveState& state, double t,
                          const SourceSamples* source, const PropagateOptions& opts) {
  require_dense(s);
  if (t < 0.0) throw Error("negative propagation time");
  WaveState out;
  out.t = state.t + t;
  if (out.t > opts.causal_window)
    out.warning = "t = " + format_number(out.t) + " exceeds the causal window " +
                  format_number(opts.causal_window);
  Vec a = s.to_eigen(state.u);
  Vec b = s.to_eigen(state.v);
  if (source == nullptr || source->count() == 0) {
    StepCoefficients(s.eigenvalues, t).step(a, b, nullptr, nullptr);
  } else {
    const double dt = source->dt;
    if (!(dt > 0.0)) throw Error("source sample spacing must be positive");
    if (t > source->duration() * (1.0 + 1e-12) + 1e-12)
      throw Error("source samples end before the requested time");
    const Mat ge = s.eigenvectors.transpose() * source->values;
    const auto full = static_cast<Eigen::Index>(std::floor(t / dt + 1e-9));
    const StepCoefficients sc(s.eigenvalues, dt);
    for (Eigen::Index j = 0; j < full; ++j) {
      const Vec g0 = ge.col(j), g1 = ge.col(j + 1);
      sc.step(a, b, &g0, &g1);
    }
    const double rest = t - dt * static_cast<double>(full);
    if (rest > 1e-14 * std::max(1.0, t)) {
      const Vec g0 = ge.col(full);
      const Vec gr = g0 + (rest / dt) * (ge.col(full + 1) - g0);
      StepCoefficients(s.eigenvalues, rest).step(a, b, &g0, &gr);
    }
  }
  out.u = s.from_eigen(a);
  out.v = s.from_eigen(b);
  return out;
}

Trajectory propagate_trajectory(const SpectralData& s, const Vec& u0, const Vec& u1, double dt,
                                Eigen::Index n_steps, const Mat* source_eigen) {
  require_dense(s);
  if (!(dt > 0.0) || n_steps < 0) throw Error("bad time grid");
  if (source_eigen != nullptr && source_eigen->cols() < n_steps + 1)
    throw Error("source has fewer samples than the time grid");
  Trajectory tr;
  tr.dt = dt;
  tr.cu.resize(s.size(), n_steps + 1);
  tr.cv.resize(s.size(), n_steps + 1);
  Vec a = s.to_eigen(u0);
  Vec b = s.to_eigen(u1);
  tr.cu.col(0) = a;
  tr.cv.col(0) = b;
  const StepCoefficients sc(s.eigenvalues, dt);
  for (Eigen::Index j = 0; j < n_steps; ++j) {
    if (source_eigen != nullptr) {
      const Vec g0 = source_eigen->col(j), g1 = source_eigen->col(j + 1);
      sc.step(a, b, &g0, &g1);
    } else {
      sc.step(a, b, nullptr, nullptr);
    }
    tr.cu.col(j + 1) = a;
    tr.cv.col(j + 1) = b;
  }
  return tr;
}

namespace {

Mat time_difference(const Mat& g, double dt) {
  const auto m = g.cols();
  Mat out(g.rows(), m);
  if (m < 2) return Mat::Zero(g.rows(), m);
  if (m == 2) {
    out.col(0) = out.col(1) = (g.col(1) - g.col(0)) / dt;
    return out;
  }
  for (Eigen::Index j = 1; j + 1 < m; ++j) out.col(j) = (g.col(j + 1) - g.col(j - 1)) / (2.0 * dt);
  out.col(0) = (-3.0 * g.col(0) + 4.0 * g.col(1) - g.col(2)) / (2.0 * dt);
  out.col(m - 1) = (3.0 * g.col(m - 1) - 4.0 * g.col(m - 2) + g.col(m - 3)) / (2.0 * dt);
  return out;
}

}  // namespace

std::vector<Mat> time_derivatives(const SpectralData& s, const Trajectory& tr, int order,
                                  const Mat* source_eigen) {
  require_dense(s);
  std::vector<Mat> out;
  out.push_back(tr.cu);
  if (order >= 1) out.push_back(tr.cv);
  std::vector<Mat> gk;
  if (source_eigen != nullptr) gk.push_back(source_eigen->leftCols(tr.count()));
  for (int k = 2; k <= order; ++k) {
    Mat next = -(s.eigenvalues.asDiagonal() * out[static_cast<std::size_t>(k - 2)]);
    if (source_eigen != nullptr) {
      while (static_cast<int>(gk.size()) <= k - 2) gk.push_back(time_difference(gk.back(), tr.dt));
      next += gk[static_cast<std::size_t>(k - 2)];
    }
    out.push_back(std::move(next));
  }
  return out;
}

WaveState propagate_leapfrog(const SpMat& P, const WaveState& state, double dt,
                             Eigen::Index n_steps, const SourceSamples* source,
                             double sigma_max) {
  if (!(dt > 0.0)) throw Error("time step must be positive");
  if (sigma_max <= 0.0) sigma_max = largest_eigenvalue(P);
  const double limit = 0.9 * 2.0 / std::sqrt(sigma_max);
  if (dt > limit)
    throw Error("leapfrog step " + format_number(dt) + " violates the CFL bound " +
                format_number(limit));
  const bool forced = source != nullptr && source->count() > 0;
  auto g_at = [&](double t) -> Vec {
    if (!forced) return Vec::Zero(P.rows());
    const double q = t / source->dt;
    const auto j = static_cast<Eigen::Index>(std::floor(q));
    if (j < 0) return source->values.col(0);
    if (j >= source->count() - 1) return source->values.col(source->count() - 1);
    const double w = q - static_cast<double>(j);
    return (1.0 - w) * source->values.col(j) + w * source->values.col(j + 1);
  };
  const double dt2 = dt * dt;
  Vec prev = state.u;
  Vec cur = state.u + dt * state.v + 0.5 * dt2 * (g_at(0.0) - P * state.u);
  auto discrete_energy = [&](const Vec& a, const Vec& b) {
    const Vec d = (b - a) / dt;
    return d.squaredNorm() + a.dot(P * b);
  };
  const double e0 = discrete_energy(prev, cur);
  for (Eigen::Index n = 1; n <= n_steps; ++n) {
    Vec next = 2.0 * cur - prev + dt2 * (g_at(dt * static_cast<double>(n)) - P * cur);
    if (!next.allFinite()) throw Error("leapfrog produced non-finite values");
    prev = std::move(cur);
    cur = std::move(next);
    if (!forced && n % 10 == 0 && discrete_energy(prev, cur) > 4.0 * std::max(e0, 1e-300))
      throw Error("leapfrog energy grew without a source; the scheme is unstable");
  }
  // prev = u_{n_steps}, cur = u_{n_steps + 1}
  WaveState out;
  out.t = state.t + dt * static_cast<double>(n_steps);
  out.u = prev;
  if (n_steps == 0) {
    out.v = state.v;
  } else {
    // recover u_{n-1} from the recurrence: u_{n-1} = 2 u_n - u_{n+1} + dt^2 (G - P u_n)
    const Vec back = 2.0 * prev - cur + dt2 * (g_at(out.t - state.t) - P * prev);
    out.v = (cur - back) / (2.0 * dt);
  }
  return out;
}

double energy(const SpectralData& s, const WaveState& state) {
  return state.u.dot(*s.op * state.u) + state.v.squaredNorm();
}

CVec half_wave(const SpectralData& s, const CVec& v, double t) {
  return apply_complex_function(
      s, [t](double sg) { return std::exp(cplx(0.0, -t * std::sqrt(std::max(sg, 0.0)))); }, v);
}

FirstOrderSystem::FirstOrderSystem(const SpectralData& s) : s_(&s) {
  if (!s.dense()) throw Error("the first-order system needs the dense eigendecomposition");
}

std::pair<CVec, CVec> FirstOrderSystem::apply_R(const CVec& u, const CVec& v) const {
  const cplx I(0.0, 1.0);
  const CVec Pu = s_->op->cast<cplx>() * u;
  return {I * v, -I * Pu};
}

std::pair<CVec, CVec> FirstOrderSystem::apply_U(const CVec& u, const CVec& v) const {
  const cplx I(0.0, 1.0);
  const CVec ru = apply_complex_function(
      *s_, [](double sg) { return cplx(std::sqrt(std::max(sg, 0.0)), 0.0); }, u);
  const double c = 1.0 / std::sqrt(2.0);
  return {c * (ru + I * v), c * (ru - I * v)};
}

std::pair<CVec, CVec> FirstOrderSystem::apply_U_inverse(const CVec& wp, const CVec& wm) const {
  const cplx I(0.0, 1.0);
  const double c = 1.0 / std::sqrt(2.0);
  const CVec ru = c * (wp + wm);
  const CVec u = apply_complex_function(
      *s_, [](double sg) { return cplx(sg > 0.0 ? 1.0 / std::sqrt(sg) : 0.0, 0.0); }, ru);
  const CVec v = c * (wp - wm) / I;
  return {u, v};
}

std::pair<CVec, CVec> FirstOrderSystem::evolve(const CVec& u, const CVec& v, double t) const {
  auto [wp, wm] = apply_U(u, v);
  wp = half_wave(*s_, wp, t);
  wm = half_wave(*s_, wm, -t);
  return apply_U_inverse(wp, wm);
}

namespace {

using C2 = Eigen::Matrix2cd;

C2 mode_U() {
  const cplx I(0.0, 1.0);
  C2 U;
  U << 1.0, I, 1.0, -I;
  return U / std::sqrt(2.0);
}

}  // namespace

double FirstOrderSystem::unitarity_residual() const {
  const C2 U = mode_U();
  return (U * U.adjoint() - C2::Identity()).cwiseAbs().maxCoeff();
}

double FirstOrderSystem::diagonalization_residual() const {
  const cplx I(0.0, 1.0);
  const C2 U = mode_U();
  double worst = 0.0, scale = 0.0;
  for (Eigen::Index k = 0; k < s_->eigenvalues.size(); ++k) {
    const double sg = s_->eigenvalues[k];
    if (!(sg > 0.0)) continue;
    const double w = std::sqrt(sg);
    C2 R;
    R << 0.0, I * w, -I * w, 0.0;
    C2 L = C2::Zero();
    L(0, 0) = w;
    L(1, 1) = -w;
    worst = std::max(worst, (U * R * U.adjoint() - L).cwiseAbs().maxCoeff());
    scale = std::max(scale, w);
  }
  return scale > 0.0 ? worst / scale : 0.0;
}

}  // namespace aew
