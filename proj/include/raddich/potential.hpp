#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "raddich/errors.hpp"
#include "raddich/sphere_basis.hpp"

namespace raddich {

enum class PotentialKind { zero, radial, general };

/// Matrix potential V(t, theta) of the linear problem Laplacian(u) = V u,
/// optionally shifted by a spectral parameter (V - lambda I).
///
/// Radial potentials depend on t only and keep the spherical modes decoupled;
/// general potentials couple modes through Galerkin products.
class PotentialSpec {
 public:
  using RadialFn = std::function<Eigen::MatrixXd(double)>;
  using GeneralFn = std::function<Eigen::MatrixXd(double, const SpherePoint&)>;

  PotentialSpec() = default;

  static PotentialSpec zero(int value_dim = 1) {
    PotentialSpec p;
    p.value_dim_ = value_dim;
    p.description_ = "zero";
    return p;
  }

  static PotentialSpec radial(RadialFn fn, int value_dim = 1, std::string description = "radial",
                              double hoelder = 0.5) {
    require(static_cast<bool>(fn), "PotentialSpec::radial: empty function");
    PotentialSpec p;
    p.kind_ = PotentialKind::radial;
    p.value_dim_ = value_dim;
    p.radial_ = std::move(fn);
    p.description_ = std::move(description);
    p.set_hoelder(hoelder);
    return p;
  }

  static PotentialSpec constant(double c) {
    return radial([c](double) { return Eigen::MatrixXd::Constant(1, 1, c); }, 1,
                  "constant " + std::to_string(c), 0.99);
  }

  /// Scalar V(t) = sum_i coeffs[i] t^i.
  static PotentialSpec radial_polynomial(std::vector<double> coeffs, double hoelder = 0.5) {
    require(!coeffs.empty(), "radial_polynomial: no coefficients");
    auto fn = [coeffs](double t) {
      double v = 0.0;
      for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) v = v * t + *it;
      return Eigen::MatrixXd::Constant(1, 1, v);
    };
    return radial(fn, 1, "radial polynomial", hoelder);
  }

  /// Scalar profile given by samples, linearly interpolated and held constant
  /// outside the sampled range.
  static PotentialSpec radial_table(std::vector<double> t, std::vector<double> v,
                                    double hoelder = 0.5) {
    require(t.size() == v.size() && t.size() >= 2, "radial_table: need >= 2 matching samples");
    require(std::is_sorted(t.begin(), t.end()), "radial_table: radii must be increasing");
    auto fn = [t, v](double r) {
      double out;
      if (r <= t.front()) {
        out = v.front();
      } else if (r >= t.back()) {
        out = v.back();
      } else {
        const auto hi = static_cast<std::size_t>(std::upper_bound(t.begin(), t.end(), r) - t.begin());
        const double w = (r - t[hi - 1]) / (t[hi] - t[hi - 1]);
        out = (1.0 - w) * v[hi - 1] + w * v[hi];
      }
      return Eigen::MatrixXd::Constant(1, 1, out);
    };
    return radial(fn, 1, "radial table", hoelder);
  }

  static PotentialSpec general(GeneralFn fn, int value_dim = 1, std::string description = "general",
                               double hoelder = 0.5) {
    require(static_cast<bool>(fn), "PotentialSpec::general: empty function");
    PotentialSpec p;
    p.kind_ = PotentialKind::general;
    p.value_dim_ = value_dim;
    p.general_ = std::move(fn);
    p.description_ = std::move(description);
    p.set_hoelder(hoelder);
    return p;
  }

  /// One term p(t) Y_{l,m}(theta) of a scalar harmonic expansion, with p a
  /// polynomial in t (coefficients in increasing degree).
  struct ExpansionTerm {
    ModeIndex mode;
    std::vector<double> poly;
  };

  static PotentialSpec harmonic_expansion(int n, std::vector<ExpansionTerm> terms,
                                          double hoelder = 0.5) {
    check_dimension(n);
    int l_top = 0;
    for (const auto& term : terms) {
      require(!term.poly.empty(), "harmonic_expansion: empty polynomial");
      mode_position(n, term.mode);
      l_top = std::max(l_top, term.mode.l);
    }
    auto fn = [n, l_top, terms](double t, const SpherePoint& p) {
      const Eigen::VectorXd y = real_harmonics(n, l_top, p);
      double v = 0.0;
      for (const auto& term : terms) {
        double c = 0.0;
        for (auto it = term.poly.rbegin(); it != term.poly.rend(); ++it) c = c * t + *it;
        v += c * y[mode_position(n, term.mode)];
      }
      return Eigen::MatrixXd::Constant(1, 1, v);
    };
    return general(fn, 1, "harmonic expansion", hoelder);
  }

  /// V - lambda I. Shifts accumulate.
  PotentialSpec shifted(double lambda) const {
    PotentialSpec p = *this;
    p.shift_ += lambda;
    return p;
  }

  PotentialKind kind() const { return kind_; }
  int value_dim() const { return value_dim_; }
  double shift() const { return shift_; }
  double hoelder_exponent() const { return hoelder_; }
  const std::string& description() const { return description_; }

  /// True when modes decouple (zero or radial potential).
  bool decoupled() const { return kind_ != PotentialKind::general; }
  bool identically_zero() const { return kind_ == PotentialKind::zero && shift_ == 0.0; }

  /// V(t) - shift for a decoupled potential.
  Eigen::MatrixXd radial_value(double t) const {
    require(decoupled(), "radial_value called on a general potential");
    Eigen::MatrixXd v = kind_ == PotentialKind::zero ? Eigen::MatrixXd::Zero(value_dim_, value_dim_)
                                                     : radial_(t);
    check_value(v, t);
    v.diagonal().array() -= shift_;
    return v;
  }

  Eigen::MatrixXd value(double t, const SpherePoint& p) const {
    if (decoupled()) return radial_value(t);
    Eigen::MatrixXd v = general_(t, p);
    check_value(v, t);
    v.diagonal().array() -= shift_;
    return v;
  }

  /// sup over the sphere of the spectral norm of V(t, .). Exact for
  /// decoupled potentials; sampled on a quadrature grid otherwise.
  double sup_norm(double t, int n) const {
    if (decoupled()) return operator_norm(radial_value(t));
    const SphereQuadrature grid(n, 0, 24);
    double s = 0.0;
    for (const auto& p : grid.points()) s = std::max(s, operator_norm(value(t, p)));
    return s;
  }

 private:
  static double operator_norm(const Eigen::MatrixXd& m) {
    if (m.size() == 1) return std::abs(m(0, 0));
    return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0);
  }

  void check_value(const Eigen::MatrixXd& v, double t) const {
    if (v.rows() != value_dim_ || v.cols() != value_dim_)
      fail(ErrorKind::precondition, "potential returned a matrix of the wrong size");
    if (!v.allFinite())
      fail(ErrorKind::precondition, "potential not evaluable at t = " + std::to_string(t));
  }

  void set_hoelder(double g) {
    require(g > 0.0 && g < 1.0, "Hoelder exponent must lie in (0, 1)");
    hoelder_ = g;
  }

  PotentialKind kind_ = PotentialKind::zero;
  int value_dim_ = 1;
  double shift_ = 0.0;
  double hoelder_ = 0.5;
  std::string description_ = "zero";
  RadialFn radial_;
  GeneralFn general_;
};

}  // namespace raddich
