#pragma once

// Spatial evolutionary system for boundary traces (f, g) = (u, du/dr) on the
// sphere of radius t, its rescaled form in tau = log t, the split A + B(tau),
// residual checks, the adjoint transform and the Wronskian pairing.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "raddich/errors.hpp"
#include "raddich/potential.hpp"
#include "raddich/spectral.hpp"
#include "raddich/sphere_basis.hpp"

namespace raddich {

/// Dirichlet and Neumann data of a solution on the sphere of radius t.
struct TraceState {
  double t = 1.0;
  SphereField f;
  SphereField g;
};

/// (f~, g~) = (t^alpha f, t^{1+alpha} g) at tau = log t.
struct RescaledState {
  double tau = 0.0;
  double alpha = 0.0;
  SphereField f;
  SphereField g;
};

/// Forcing added to the g-equation: (time, Dirichlet field) -> field.
using Forcing = std::function<SphereField(double, const SphereField&)>;

// -- state vectors ----------------------------------------------------------

/// [f coefficients; g coefficients].
inline Eigen::VectorXcd stack(const SphereField& f, const SphereField& g) {
  require(f.compatible(g), "stack: f and g must share n, l_max, value_dim");
  Eigen::VectorXcd v(f.size() + g.size());
  v << f.coeffs(), g.coeffs();
  return v;
}

inline Eigen::VectorXcd to_vector(const RescaledState& s) { return stack(s.f, s.g); }
inline Eigen::VectorXcd to_vector(const TraceState& s) { return stack(s.f, s.g); }

inline RescaledState rescaled_from_vector(const Eigen::VectorXcd& v, double tau, double alpha, int n,
                                          int l_max, int value_dim = 1) {
  const Eigen::Index half = static_cast<Eigen::Index>(mode_count(n, l_max)) * value_dim;
  require(v.size() == 2 * half, "rescaled_from_vector: length mismatch");
  return {tau, alpha, SphereField(n, l_max, value_dim, v.head(half)),
          SphereField(n, l_max, value_dim, v.tail(half))};
}

/// Weights so that ||diag(w) v|| is the H^{1/2+beta} (+) H^{-1/2+beta} norm.
inline Eigen::VectorXd state_weights(int n, int l_max, int value_dim, double beta = 0.0) {
  const Eigen::VectorXd wf = sobolev_weights(n, l_max, value_dim, 0.5 + beta);
  const Eigen::VectorXd wg = sobolev_weights(n, l_max, value_dim, -0.5 + beta);
  Eigen::VectorXd w(wf.size() + wg.size());
  w << wf, wg;
  return w;
}

inline double state_norm(const SphereField& f, const SphereField& g, double beta = 0.0) {
  return std::hypot(sobolev_norm(f, 0.5 + beta), sobolev_norm(g, -0.5 + beta));
}
inline double state_norm(const RescaledState& s, double beta = 0.0) { return state_norm(s.f, s.g, beta); }
inline double state_norm(const TraceState& s, double beta = 0.0) { return state_norm(s.f, s.g, beta); }

// -- rescaling ----------------------------------------------------------------

inline RescaledState rescale_forward(const TraceState& x, double alpha) {
  require(x.t > 0.0, "rescale_forward: t must be positive");
  return {std::log(x.t), alpha, std::pow(x.t, alpha) * x.f, std::pow(x.t, 1.0 + alpha) * x.g};
}

inline TraceState rescale_inverse(const RescaledState& y) {
  const double t = std::exp(y.tau);
  return {t, std::pow(t, -y.alpha) * y.f, std::pow(t, -1.0 - y.alpha) * y.g};
}

/// (-t^{n-1-alpha} g, t^{n-2-alpha} f): maps solutions of the trace system to
/// solutions of the adjoint rescaled system.
inline RescaledState adjoint_transform(const TraceState& x, double alpha) {
  require(x.t > 0.0, "adjoint_transform: t must be positive");
  const int n = x.f.dimension();
  return {std::log(x.t), alpha, -std::pow(x.t, n - 1.0 - alpha) * x.g,
          std::pow(x.t, n - 2.0 - alpha) * x.f};
}

/// t^{n-1} (<f_x, g_y> - <g_x, f_y>), with <a, b> = sum a conj(b).
inline cplx wronskian(const TraceState& x, const TraceState& y) {
  require(std::abs(x.t - y.t) <= 1e-13 * std::max(1.0, std::abs(x.t)), "wronskian: mismatched t");
  require(x.f.compatible(y.f) && x.g.compatible(y.g), "wronskian: incompatible fields");
  const int n = x.f.dimension();
  const cplx pair = y.g.coeffs().dot(x.f.coeffs()) - y.f.coeffs().dot(x.g.coeffs());
  return std::pow(x.t, n - 1.0) * pair;
}

// -- limiting operator A --------------------------------------------------------

/// Block-diagonal limiting operator; per degree l and component the block is
/// [[alpha, 1], [l(l+n-2), alpha + 2 - n]].
class LimitingOperator {
 public:
  LimitingOperator(int n, double alpha, int l_max, int value_dim = 1)
      : n_(n), alpha_(alpha), l_max_(l_max), value_dim_(value_dim) {
    check_dimension(n);
    require(l_max >= 0 && value_dim >= 1, "LimitingOperator: bad sizes");
    modes_ = enumerate_modes(n, l_max);
  }

  int dimension() const { return n_; }
  double alpha() const { return alpha_; }
  int l_max() const { return l_max_; }
  int value_dim() const { return value_dim_; }
  const std::vector<ModeIndex>& modes() const { return modes_; }
  Eigen::Index half_dim() const { return static_cast<Eigen::Index>(modes_.size()) * value_dim_; }

  Eigen::Matrix2d block(int l) const {
    Eigen::Matrix2d b;
    b << alpha_, 1.0, lb_eigenvalue(n_, l), alpha_ + 2.0 - n_;
    return b;
  }

  /// {alpha + l, alpha + 2 - n - l}.
  std::array<double, 2> block_eigenvalues(int l) const {
    return {alpha_ + l, alpha_ + 2.0 - n_ - l};
  }

  Eigen::MatrixXd dense() const {
    const Eigen::Index h = half_dim();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * h, 2 * h);
    for (Eigen::Index i = 0; i < h; ++i) {
      const int l = modes_[static_cast<std::size_t>(i / value_dim_)].l;
      a(i, i) = alpha_;
      a(i, h + i) = 1.0;
      a(h + i, i) = lb_eigenvalue(n_, l);
      a(h + i, h + i) = alpha_ + 2.0 - n_;
    }
    return a;
  }

  /// All eigenvalues with multiplicity, degree-major.
  std::vector<double> spectrum() const {
    std::vector<double> out;
    for (const auto& k : modes_)
      for (int c = 0; c < value_dim_; ++c) {
        const auto ev = block_eigenvalues(k.l);
        out.push_back(ev[0]);
        out.push_back(ev[1]);
      }
    return out;
  }

  RescaledState apply(const RescaledState& s) const {
    const Eigen::VectorXcd v = dense().cast<cplx>() * to_vector(s);
    return rescaled_from_vector(v, s.tau, s.alpha, n_, l_max_, value_dim_);
  }

 private:
  int n_;
  double alpha_;
  int l_max_;
  int value_dim_;
  std::vector<ModeIndex> modes_;
};

inline LimitingOperator assemble_A(int n, double alpha, int l_max, int value_dim = 1) {
  return LimitingOperator(n, alpha, l_max, value_dim);
}

// -- coupling B(tau) ------------------------------------------------------------

/// Galerkin matrix of multiplication by a matrix potential: entry
/// ((k,c),(j,d)) = integral of Y_k Y_j V_cd.
inline Eigen::MatrixXd galerkin_multiplication(const SphereQuadrature& quad, int l_max, int value_dim,
                                               const std::function<Eigen::MatrixXd(const SpherePoint&)>& V) {
  const int mc = mode_count(quad.dimension(), l_max);
  const Eigen::MatrixXd Y = quad.basis().leftCols(mc);
  const int nq = quad.node_count();
  std::vector<Eigen::MatrixXd> vals;
  vals.reserve(static_cast<std::size_t>(nq));
  for (const auto& p : quad.points()) vals.push_back(V(p));
  Eigen::MatrixXd out(static_cast<Eigen::Index>(mc) * value_dim, static_cast<Eigen::Index>(mc) * value_dim);
  Eigen::VectorXd wv(nq);
  for (int c = 0; c < value_dim; ++c)
    for (int d = 0; d < value_dim; ++d) {
      for (int q = 0; q < nq; ++q) wv[q] = quad.weights()[q] * vals[static_cast<std::size_t>(q)](c, d);
      const Eigen::MatrixXd m = Y.transpose() * wv.asDiagonal() * Y;
      for (int k = 0; k < mc; ++k)
        for (int j = 0; j < mc; ++j) out(k * value_dim + c, j * value_dim + d) = m(k, j);
    }
  return out;
}

/// B(tau): (f~, g~) -> (0, e^{2 tau} V_{e^tau} f~), stored as its lower-left block.
struct CouplingMap {
  double tau = 0.0;
  int n = 3;
  int l_max = 0;
  int value_dim = 1;
  Eigen::MatrixXd lower;

  RescaledState apply(const RescaledState& s) const {
    require(s.f.l_max() == l_max && s.f.value_dim() == value_dim, "CouplingMap: size mismatch");
    RescaledState out{s.tau, s.alpha, SphereField(n, l_max, value_dim), SphereField(n, l_max, value_dim)};
    out.g.coeffs() = lower.cast<cplx>() * s.f.coeffs();
    return out;
  }

  /// Operator norm from H^{1/2+beta} (+) H^{-1/2+beta} into H^{1/2} (+) H^{-1/2}.
  double norm(double beta = 0.0) const {
    const Eigen::VectorXd wf = sobolev_weights(n, l_max, value_dim, 0.5 + beta);
    const Eigen::VectorXd wg = sobolev_weights(n, l_max, value_dim, -0.5);
    const Eigen::MatrixXd m = wg.asDiagonal() * lower * wf.cwiseInverse().asDiagonal();
    if (m.size() == 0) return 0.0;
    return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0);
  }
};

/// Rescaled system operator A + B(tau) for a given potential.
class SesOperator {
 public:
  SesOperator(int n, double alpha, int l_max, PotentialSpec V, int quad_degree = -1)
      : a_(n, alpha, l_max, V.value_dim()), V_(std::move(V)) {
    if (!V_.decoupled()) {
      if (quad_degree < 0) quad_degree = default_product_degree(l_max);
      require(quad_degree >= 2 * l_max, "SesOperator: quadrature cannot resolve l_max");
      quad_ = std::make_shared<SphereQuadrature>(n, l_max, quad_degree);
    }
    lambdas_.resize(a_.half_dim());
    for (Eigen::Index i = 0; i < a_.half_dim(); ++i)
      lambdas_[i] = lb_eigenvalue(n, a_.modes()[static_cast<std::size_t>(i / V_.value_dim())].l);
  }

  const LimitingOperator& limiting() const { return a_; }
  const PotentialSpec& potential() const { return V_; }
  int dimension() const { return a_.dimension(); }
  double alpha() const { return a_.alpha(); }
  int l_max() const { return a_.l_max(); }
  int value_dim() const { return a_.value_dim(); }
  Eigen::Index state_dim() const { return 2 * a_.half_dim(); }
  bool decoupled() const { return V_.decoupled(); }

  /// Lower-left block of B(tau).
  Eigen::MatrixXd coupling_lower(double tau) const {
    const double t = std::exp(tau);
    const double s = std::exp(2.0 * tau);
    const int N = value_dim();
    const Eigen::Index h = a_.half_dim();
    if (V_.identically_zero()) return Eigen::MatrixXd::Zero(h, h);
    if (V_.decoupled()) {
      const Eigen::MatrixXd v = s * V_.radial_value(t);
      Eigen::MatrixXd out = Eigen::MatrixXd::Zero(h, h);
      for (Eigen::Index k = 0; k < h / N; ++k) out.block(k * N, k * N, N, N) = v;
      return out;
    }
    return s * galerkin_multiplication(*quad_, l_max(), N,
                                       [&](const SpherePoint& p) { return V_.value(t, p); });
  }

  CouplingMap coupling(double tau) const {
    return {tau, dimension(), l_max(), value_dim(), coupling_lower(tau)};
  }

  /// Dense generator A + B(tau).
  Eigen::MatrixXd generator(double tau) const {
    Eigen::MatrixXd m = a_.dense();
    const Eigen::Index h = a_.half_dim();
    m.block(h, 0, h, h) += coupling_lower(tau);
    return m;
  }

  /// 2N x 2N generator of the degree-l block (decoupled potentials only).
  Eigen::MatrixXd block_generator(int l, double tau) const {
    require(decoupled(), "block_generator: potential couples modes");
    const int N = value_dim();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2 * N, 2 * N);
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(N, N);
    m.topLeftCorner(N, N) = alpha() * I;
    m.topRightCorner(N, N) = I;
    m.bottomLeftCorner(N, N) = lb_eigenvalue(dimension(), l) * I;
    if (!V_.identically_zero()) m.bottomLeftCorner(N, N) += std::exp(2.0 * tau) * V_.radial_value(std::exp(tau));
    m.bottomRightCorner(N, N) = (alpha() + 2.0 - dimension()) * I;
    return m;
  }

  /// dX = (A + B(tau)) X for a matrix of real state columns.
  void apply_generator(double tau, const Eigen::MatrixXd& X, Eigen::MatrixXd& dX) const {
    const Eigen::Index h = a_.half_dim();
    const int N = value_dim();
    dX.resize(X.rows(), X.cols());
    dX.topRows(h) = alpha() * X.topRows(h) + X.bottomRows(h);
    dX.bottomRows(h) = lambdas_.asDiagonal() * X.topRows(h) + (alpha() + 2.0 - dimension()) * X.bottomRows(h);
    if (V_.identically_zero()) return;
    if (V_.decoupled()) {
      const Eigen::MatrixXd v = std::exp(2.0 * tau) * V_.radial_value(std::exp(tau));
      if (N == 1) {
        dX.bottomRows(h) += v(0, 0) * X.topRows(h);
      } else {
        for (Eigen::Index k = 0; k < h / N; ++k)
          dX.block(h + k * N, 0, N, X.cols()) += v * X.block(k * N, 0, N, X.cols());
      }
      return;
    }
    dX.bottomRows(h) += coupling_lower(tau) * X.topRows(h);
  }

  /// Applies V_t to the coefficients of a Dirichlet field (no e^{2 tau}).
  Eigen::VectorXcd multiply_potential(double t, const Eigen::VectorXcd& f) const {
    if (V_.identically_zero()) return Eigen::VectorXcd::Zero(f.size());
    if (V_.decoupled()) {
      const int N = value_dim();
      const Eigen::MatrixXcd v = V_.radial_value(t).cast<cplx>();
      Eigen::VectorXcd out(f.size());
      for (Eigen::Index k = 0; k < f.size() / N; ++k) out.segment(k * N, N) = v * f.segment(k * N, N);
      return out;
    }
    const Eigen::MatrixXd m =
        galerkin_multiplication(*quad_, l_max(), value_dim(), [&](const SpherePoint& p) { return V_.value(t, p); });
    return m.cast<cplx>() * f;
  }

  /// -Laplace-Beltrami eigenvalue per coefficient of a Dirichlet field.
  const Eigen::VectorXd& lambdas() const { return lambdas_; }

 private:
  LimitingOperator a_;
  PotentialSpec V_;
  std::shared_ptr<SphereQuadrature> quad_;
  Eigen::VectorXd lambdas_;
};

inline CouplingMap assemble_B(double tau, const PotentialSpec& V, int n, int l_max) {
  return SesOperator(n, 0.0, l_max, V).coupling(tau);
}

// -- residuals ------------------------------------------------------------------

namespace detail {

// Finite-difference derivative of samples x (columns) at interior index i.
// Order 2 handles nonuniform spacing; orders 4 and 6 assume uniform spacing.
inline Eigen::VectorXcd fd_derivative(const std::vector<Eigen::VectorXcd>& x, const std::vector<double>& s,
                                      std::size_t i, int order) {
  if (order == 2) {
    const double h1 = s[i] - s[i - 1], h2 = s[i + 1] - s[i];
    return (-h2 / (h1 * (h1 + h2))) * x[i - 1] + ((h2 - h1) / (h1 * h2)) * x[i] +
           (h1 / (h2 * (h1 + h2))) * x[i + 1];
  }
  const double h = s[i + 1] - s[i];
  if (order == 4)
    return (x[i - 2] - 8.0 * x[i - 1] + 8.0 * x[i + 1] - x[i + 2]) / (12.0 * h);
  return (-x[i - 3] + 9.0 * x[i - 2] - 45.0 * x[i - 1] + 45.0 * x[i + 1] - 9.0 * x[i + 2] + x[i + 3]) /
         (60.0 * h);
}

inline void check_fd_grid(const std::vector<double>& s, int order) {
  require(order == 2 || order == 4 || order == 6, "residual: order must be 2, 4 or 6");
  require(s.size() >= static_cast<std::size_t>(order + 1), "residual: too few samples for stencil");
  for (std::size_t i = 1; i < s.size(); ++i) require(s[i] > s[i - 1], "residual: samples must be increasing");
  if (order > 2) {
    const double h = s[1] - s[0];
    for (std::size_t i = 1; i < s.size(); ++i)
      require(std::abs((s[i] - s[i - 1]) - h) <= 1e-9 * std::abs(h), "residual: high order needs uniform grid");
  }
}

}  // namespace detail

/// Relative defect of sampled traces against the trace system
///   f' = g,  g' = (V_t + lambda/t^2) f - (n-1)/t g  [+ forcing(t, f)],
/// measured with centered differences in the H norm and divided by the
/// largest trajectory norm. Endpoints are excluded.
inline double ses_residual(const std::vector<TraceState>& traj, const PotentialSpec& V,
                           const Forcing& forcing = {}, int order = 2) {
  require(traj.size() >= 3, "ses_residual: need at least 3 samples");
  const int n = traj[0].f.dimension(), L = traj[0].f.l_max(), N = traj[0].f.value_dim();
  std::vector<double> ts;
  std::vector<Eigen::VectorXcd> xs;
  double scale = 0.0;
  for (const auto& s : traj) {
    require(s.f.dimension() == n && s.f.l_max() == L && s.f.value_dim() == N && s.f.compatible(s.g),
            "ses_residual: inconsistent trajectory");
    ts.push_back(s.t);
    xs.push_back(to_vector(s));
    scale = std::max(scale, state_norm(s));
  }
  detail::check_fd_grid(ts, order);
  if (scale == 0.0) return 0.0;
  const SesOperator op(n, 0.0, L, V);
  const Eigen::Index h = op.limiting().half_dim();
  const Eigen::VectorXd w = state_weights(n, L, N);
  const std::size_t r = static_cast<std::size_t>(order / 2);
  double worst = 0.0;
  for (std::size_t i = r; i + r < traj.size(); ++i) {
    const double t = ts[i];
    const Eigen::VectorXcd d = detail::fd_derivative(xs, ts, i, order);
    const Eigen::VectorXcd f = xs[i].head(h), g = xs[i].tail(h);
    Eigen::VectorXcd rhs(2 * h);
    rhs.head(h) = g;
    rhs.tail(h) = op.multiply_potential(t, f) + (op.lambdas().array() / (t * t)).matrix().cast<cplx>().cwiseProduct(f) -
                  ((n - 1.0) / t) * g;
    if (forcing) rhs.tail(h) += forcing(t, traj[i].f).coeffs();
    worst = std::max(worst, (w.cast<cplx>().cwiseProduct(d - rhs)).norm());
  }
  return worst / scale;
}

/// Relative defect of rescaled samples against A + B(tau) [+ forcing(tau, f~)].
inline double rses_residual(const std::vector<RescaledState>& traj, const PotentialSpec& V,
                            const Forcing& forcing = {}, int order = 2) {
  require(traj.size() >= 3, "rses_residual: need at least 3 samples");
  const int n = traj[0].f.dimension(), L = traj[0].f.l_max();
  const double alpha = traj[0].alpha;
  std::vector<double> ss;
  std::vector<Eigen::VectorXcd> xs;
  double scale = 0.0;
  for (const auto& s : traj) {
    require(s.f.compatible(traj[0].f) && s.g.compatible(traj[0].f) && s.alpha == alpha,
            "rses_residual: inconsistent trajectory");
    ss.push_back(s.tau);
    xs.push_back(to_vector(s));
    scale = std::max(scale, state_norm(s));
  }
  detail::check_fd_grid(ss, order);
  if (scale == 0.0) return 0.0;
  const SesOperator op(n, alpha, L, V);
  const Eigen::Index h = op.limiting().half_dim();
  const Eigen::VectorXd w = state_weights(n, L, V.value_dim());
  const std::size_t r = static_cast<std::size_t>(order / 2);
  double worst = 0.0;
  for (std::size_t i = r; i + r < traj.size(); ++i) {
    const Eigen::VectorXcd d = detail::fd_derivative(xs, ss, i, order);
    Eigen::VectorXcd rhs = op.generator(ss[i]).cast<cplx>() * xs[i];
    if (forcing) rhs.tail(h) += forcing(ss[i], traj[i].f).coeffs();
    worst = std::max(worst, (w.cast<cplx>().cwiseProduct(d - rhs)).norm());
  }
  return worst / scale;
}

/// Relative defect against the adjoint rescaled system
///   p' = -alpha p + (Laplacian - e^{2 tau} V) q,  q' = -p + (n - 2 - alpha) q.
inline double adjoint_residual(const std::vector<RescaledState>& traj, const PotentialSpec& V) {
  require(traj.size() >= 3, "adjoint_residual: need at least 3 samples");
  const int n = traj[0].f.dimension(), L = traj[0].f.l_max();
  const double alpha = traj[0].alpha;
  std::vector<double> ss;
  std::vector<Eigen::VectorXcd> xs;
  double scale = 0.0;
  for (const auto& s : traj) {
    ss.push_back(s.tau);
    xs.push_back(to_vector(s));
    scale = std::max(scale, state_norm(s));
  }
  detail::check_fd_grid(ss, 2);
  if (scale == 0.0) return 0.0;
  const SesOperator op(n, alpha, L, V);
  const Eigen::Index h = op.limiting().half_dim();
  const Eigen::VectorXd w = state_weights(n, L, V.value_dim());
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < traj.size(); ++i) {
    const Eigen::VectorXcd d = detail::fd_derivative(xs, ss, i, 2);
    const Eigen::VectorXcd p = xs[i].head(h), q = xs[i].tail(h);
    Eigen::VectorXcd rhs(2 * h);
    rhs.head(h) = -alpha * p - op.lambdas().cast<cplx>().cwiseProduct(q) -
                  std::exp(2.0 * ss[i]) * op.multiply_potential(std::exp(ss[i]), q);
    rhs.tail(h) = -p + (n - 2.0 - alpha) * q;
    worst = std::max(worst, (w.cast<cplx>().cwiseProduct(d - rhs)).norm());
  }
  return worst / scale;
}

// -- resolvent ----------------------------------------------------------------------

/// (A - i mu)^{-1}, stored blockwise per degree.
class ResolventA {
 public:
  ResolventA(double mu, int n, double alpha, int l_max, int value_dim = 1)
      : mu_(mu), a_(n, alpha, l_max, value_dim) {
    require(validate_alpha(n, alpha) > 0.0, "resolvent_A: alpha violates the spectral condition");
    for (int l = 0; l <= l_max; ++l) {
      const Eigen::Matrix2cd m = a_.block(l).cast<cplx>() - cplx(0.0, mu) * Eigen::Matrix2cd::Identity();
      blocks_.push_back(m.inverse());
    }
  }

  double mu() const { return mu_; }
  const Eigen::Matrix2cd& block(int l) const { return blocks_.at(static_cast<std::size_t>(l)); }

  RescaledState apply(const RescaledState& s) const {
    const Eigen::Index h = a_.half_dim();
    const int N = a_.value_dim();
    Eigen::VectorXcd v = to_vector(s), out(2 * h);
    for (Eigen::Index i = 0; i < h; ++i) {
      const auto& b = block(a_.modes()[static_cast<std::size_t>(i / N)].l);
      out[i] = b(0, 0) * v[i] + b(0, 1) * v[h + i];
      out[h + i] = b(1, 0) * v[i] + b(1, 1) * v[h + i];
    }
    return rescaled_from_vector(out, s.tau, s.alpha, a_.dimension(), a_.l_max(), N);
  }

  /// Operator norm on H^{1/2+beta} (+) H^{-1/2+beta}.
  double norm(double beta = 0.0) const {
    double best = 0.0;
    for (int l = 0; l <= a_.l_max(); ++l) {
      const double lam = lb_eigenvalue(a_.dimension(), l);
      Eigen::Matrix2cd w = Eigen::Matrix2cd::Zero();
      w(0, 0) = std::pow(1.0 + lam, 0.5 * (0.5 + beta));
      w(1, 1) = std::pow(1.0 + lam, 0.5 * (-0.5 + beta));
      const Eigen::Matrix2cd m = w * block(l) * w.inverse();
      best = std::max(best, Eigen::JacobiSVD<Eigen::Matrix2cd>(m).singularValues()(0));
    }
    return best;
  }

 private:
  double mu_;
  LimitingOperator a_;
  std::vector<Eigen::Matrix2cd> blocks_;
};

inline ResolventA resolvent_A(double mu, int n, double alpha, int l_max, int value_dim = 1) {
  return ResolventA(mu, n, alpha, l_max, value_dim);
}

/// Closed-form degree-l block of (A_0 - i mu)^{-1} for A_0 = [[0, 1], [lambda, 0]]:
/// [[i mu, 1], [lambda, i mu]] / (lambda + mu^2).
inline Eigen::Matrix2cd a0_resolvent_block(double mu, double lambda) {
  const cplx d = 1.0 / (lambda + mu * mu);
  Eigen::Matrix2cd m;
  m << cplx(0, mu) * d, d, lambda * d, cplx(0, mu) * d;
  return m;
}

}  // namespace raddich
