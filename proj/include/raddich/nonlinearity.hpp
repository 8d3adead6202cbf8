#pragma once

// Pointwise nonlinearities F(x, u) for Laplacian(u) - V u = F(x, u), their
// Galerkin projection at the trace level and in rescaled variables.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>

#include "raddich/errors.hpp"
#include "raddich/ses.hpp"
#include "raddich/sphere_basis.hpp"

namespace raddich {

/// F(t, theta, u) with u in R^N. An empty function means F = 0.
struct Nonlinearity {
  using Fn = std::function<Eigen::VectorXd(double, const SpherePoint&, const Eigen::VectorXd&)>;
  using ScalarFn = std::function<double(double, const SpherePoint&, double)>;

  Fn fn;
  int value_dim = 1;
  /// Largest |u| (max norm) at which F may be evaluated.
  double validity = std::numeric_limits<double>::infinity();
  /// F(x, 0) != 0: an inhomogeneous forcing is folded into F.
  bool forcing = false;
  /// Polynomial degree of F in u, if any; sets the quadrature exactness.
  int poly_degree = 3;
  std::string description = "zero";

  bool is_zero() const { return !fn; }

  static Nonlinearity zero(int value_dim = 1) {
    Nonlinearity F;
    F.value_dim = value_dim;
    return F;
  }

  static Nonlinearity scalar(ScalarFn g, std::string description, bool forcing = false, int poly_degree = 3,
                             double validity = std::numeric_limits<double>::infinity()) {
    require(static_cast<bool>(g), "Nonlinearity::scalar: empty function");
    Nonlinearity F;
    F.fn = [g = std::move(g)](double t, const SpherePoint& p, const Eigen::VectorXd& u) {
      return Eigen::VectorXd::Constant(1, g(t, p, u[0]));
    };
    F.forcing = forcing;
    F.poly_degree = poly_degree;
    F.validity = validity;
    F.description = std::move(description);
    return F;
  }

  /// c u^p (componentwise for N > 1).
  static Nonlinearity power(double c, int p, int value_dim = 1) {
    require(p >= 2, "Nonlinearity::power: exponent must be >= 2");
    Nonlinearity F;
    F.value_dim = value_dim;
    F.fn = [c, p](double, const SpherePoint&, const Eigen::VectorXd& u) {
      return Eigen::VectorXd(c * u.array().pow(static_cast<double>(p)));
    };
    F.poly_degree = p;
    F.description = std::to_string(c) + " u^" + std::to_string(p);
    return F;
  }
};

/// Projects F onto degree <= l_max with a cached quadrature. The quadrature
/// integrates (poly_degree + 1) l_max exactly, so polynomial F are projected
/// without aliasing.
class NonlinearEvaluator {
 public:
  NonlinearEvaluator(Nonlinearity F, int n, int l_max, int quad_degree = -1)
      : F_(std::move(F)), n_(n), l_max_(l_max) {
    check_dimension(n);
    require(l_max >= 0, "NonlinearEvaluator: l_max must be >= 0");
    if (quad_degree < 0) quad_degree = (std::max(F_.poly_degree, 1) + 1) * l_max + 2;
    require(quad_degree >= 2 * l_max, "NonlinearEvaluator: quadrature cannot resolve l_max");
    if (!F_.is_zero()) quad_ = std::make_shared<SphereQuadrature>(n, l_max, quad_degree);
  }

  const Nonlinearity& nonlinearity() const { return F_; }
  int dimension() const { return n_; }
  int l_max() const { return l_max_; }

  /// Projection of F(t, ., f(.)) for a real-valued Dirichlet field f.
  SphereField trace(double t, const SphereField& f) const { return apply(t, f, 1.0, 1.0); }

  /// e^{(alpha+2) tau} F(e^tau, ., e^{-alpha tau} f~(.)).
  SphereField rescaled(double tau, const SphereField& f_tilde, double alpha) const {
    return apply(std::exp(tau), f_tilde, std::exp(-alpha * tau), std::exp((alpha + 2.0) * tau));
  }

 private:
  SphereField apply(double t, const SphereField& f, double in_scale, double out_scale) const {
    require(f.dimension() == n_ && f.l_max() == l_max_ && f.value_dim() == F_.value_dim,
            "nonlinearity: field does not match the evaluator truncation");
    if (F_.is_zero()) return SphereField(n_, l_max_, F_.value_dim);
    const double scale = f.coeffs().cwiseAbs().maxCoeff();
    if (f.max_imag() > 1e-10 * std::max(1.0, scale))
      fail(ErrorKind::precondition, "nonlinearity: only real-valued fields are supported");
    const Eigen::MatrixXd u = in_scale * quad_->synthesize(f).real();
    Eigen::MatrixXcd out(u.rows(), u.cols());
    for (int q = 0; q < quad_->node_count(); ++q) {
      const Eigen::VectorXd uq = u.row(q).transpose();
      if (!(uq.cwiseAbs().maxCoeff() <= F_.validity))
        fail(ErrorKind::solver, "nonlinearity: |u| = " + std::to_string(uq.cwiseAbs().maxCoeff()) +
                                    " exceeds the validity range of F at t = " + std::to_string(t));
      const Eigen::VectorXd v = F_.fn(t, quad_->points()[static_cast<std::size_t>(q)], uq);
      require(v.size() == F_.value_dim, "nonlinearity: F returned a vector of the wrong size");
      out.row(q) = (out_scale * v).transpose().cast<cplx>();
    }
    return quad_->analyze(out, l_max_);
  }

  Nonlinearity F_;
  int n_;
  int l_max_;
  std::shared_ptr<SphereQuadrature> quad_;
};

/// One-shot rescaled evaluation; t = e^tau must not exceed T.
inline SphereField evaluate_nonlinearity(const Nonlinearity& F, double tau, const SphereField& f_tilde, double alpha,
                                         double T = std::numeric_limits<double>::infinity()) {
  require(std::exp(tau) <= T * (1.0 + 1e-12), "evaluate_nonlinearity: e^tau exceeds T");
  return NonlinearEvaluator(F, f_tilde.dimension(), f_tilde.l_max()).rescaled(tau, f_tilde, alpha);
}

/// Trace-level forcing for ses_residual.
inline Forcing trace_forcing(const Nonlinearity& F, int n, int l_max) {
  if (F.is_zero()) return {};
  auto ev = std::make_shared<NonlinearEvaluator>(F, n, l_max);
  return [ev](double t, const SphereField& f) { return ev->trace(t, f); };
}

/// Rescaled forcing for rses_residual.
inline Forcing rescaled_forcing(const Nonlinearity& F, int n, int l_max, double alpha) {
  if (F.is_zero()) return {};
  auto ev = std::make_shared<NonlinearEvaluator>(F, n, l_max);
  return [ev, alpha](double tau, const SphereField& f) { return ev->rescaled(tau, f, alpha); };
}

}  // namespace raddich
