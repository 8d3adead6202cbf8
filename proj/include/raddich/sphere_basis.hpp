#pragma once

// Laplace-Beltrami eigenbasis on S^{n-1} for n = 2 (Fourier modes on the
// circle) and n = 3 (real spherical harmonics), spectral Sobolev norms and
// tensor-product quadrature.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <compare>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "raddich/errors.hpp"

namespace raddich {

using cplx = std::complex<double>;

/// Degree/order label of a basis function.
///
/// For n = 3, m ranges over -l..l and labels the real harmonic
/// (m > 0: cos(m phi), m < 0: sin(|m| phi)). For n = 2, m = +1 tags
/// cos(l phi), m = -1 tags sin(l phi) and m = 0 is used only for l = 0.
struct ModeIndex {
  int l = 0;
  int m = 0;

  auto operator<=>(const ModeIndex&) const = default;
};

inline void check_dimension(int n) {
  require(n == 2 || n == 3,
          "sphere basis implemented for n in {2, 3}, got n = " + std::to_string(n));
}

/// Eigenvalue of -Laplace-Beltrami on S^{n-1} for degree l: l(l + n - 2).
inline double lb_eigenvalue(int n, int l) {
  require(n >= 2, "lb_eigenvalue: n must be >= 2");
  require(l >= 0, "lb_eigenvalue: l must be >= 0");
  return static_cast<double>(l) * static_cast<double>(l + n - 2);
}

inline int modes_of_degree(int n, int l) {
  check_dimension(n);
  if (n == 3) return 2 * l + 1;
  return l == 0 ? 1 : 2;
}

inline int mode_count(int n, int l_max) {
  check_dimension(n);
  if (l_max < 0) return 0;
  return n == 3 ? (l_max + 1) * (l_max + 1) : 2 * l_max + 1;
}

/// Canonical ordering: by degree, then by order.
inline std::vector<ModeIndex> enumerate_modes(int n, int l_max) {
  check_dimension(n);
  std::vector<ModeIndex> out;
  out.reserve(static_cast<std::size_t>(mode_count(n, l_max)));
  for (int l = 0; l <= l_max; ++l) {
    if (n == 3) {
      for (int m = -l; m <= l; ++m) out.push_back({l, m});
    } else if (l == 0) {
      out.push_back({0, 0});
    } else {
      out.push_back({l, -1});
      out.push_back({l, +1});
    }
  }
  return out;
}

/// Position of a mode in enumerate_modes order.
inline int mode_position(int n, const ModeIndex& k) {
  check_dimension(n);
  if (n == 3) {
    require(k.l >= 0 && std::abs(k.m) <= k.l, "invalid n = 3 mode index");
    return k.l * k.l + k.m + k.l;
  }
  if (k.l == 0) {
    require(k.m == 0, "invalid n = 2 mode index");
    return 0;
  }
  require(k.l > 0 && (k.m == 1 || k.m == -1), "invalid n = 2 mode index");
  return 2 * k.l - 1 + (k.m == 1 ? 1 : 0);
}

/// A point on S^{n-1}. For n = 2 only phi is meaningful (theta = pi/2).
struct SpherePoint {
  double theta = 0.5 * std::numbers::pi;
  double phi = 0.0;

  std::array<double, 3> cartesian() const {
    const double s = std::sin(theta);
    return {s * std::cos(phi), s * std::sin(phi), std::cos(theta)};
  }
};

namespace detail {

// Fully normalized associated Legendre functions without the Condon-Shortley
// phase, Q_l^m(cos theta) for 0 <= m <= l <= l_max, stored at l*(l+1)/2 + m.
inline std::vector<double> normalized_legendre(int l_max, double x) {
  const double s = std::sqrt(std::max(0.0, 1.0 - x * x));
  std::vector<double> q(static_cast<std::size_t>((l_max + 1) * (l_max + 2) / 2), 0.0);
  auto at = [](int l, int m) { return static_cast<std::size_t>(l * (l + 1) / 2 + m); };
  q[at(0, 0)] = 1.0 / std::sqrt(4.0 * std::numbers::pi);
  for (int m = 1; m <= l_max; ++m)
    q[at(m, m)] = std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * q[at(m - 1, m - 1)];
  for (int m = 0; m < l_max; ++m)
    q[at(m + 1, m)] = std::sqrt(2.0 * m + 3.0) * x * q[at(m, m)];
  for (int m = 0; m <= l_max; ++m) {
    for (int l = m + 2; l <= l_max; ++l) {
      const double ll = l, mm = m;
      const double a = std::sqrt((4.0 * ll * ll - 1.0) / (ll * ll - mm * mm));
      const double b = std::sqrt(((ll - 1.0) * (ll - 1.0) - mm * mm) /
                                 (4.0 * (ll - 1.0) * (ll - 1.0) - 1.0));
      q[at(l, m)] = a * (x * q[at(l - 1, m)] - b * q[at(l - 2, m)]);
    }
  }
  return q;
}

}  // namespace detail

/// Values of all real orthonormal basis functions with degree <= l_max at p,
/// in enumerate_modes order.
inline Eigen::VectorXd real_harmonics(int n, int l_max, const SpherePoint& p) {
  check_dimension(n);
  Eigen::VectorXd out(mode_count(n, l_max));
  if (n == 2) {
    const double c0 = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    const double c1 = 1.0 / std::sqrt(std::numbers::pi);
    out[0] = c0;
    for (int l = 1; l <= l_max; ++l) {
      out[2 * l - 1] = c1 * std::sin(l * p.phi);
      out[2 * l] = c1 * std::cos(l * p.phi);
    }
    return out;
  }
  const auto q = detail::normalized_legendre(l_max, std::cos(p.theta));
  for (int l = 0; l <= l_max; ++l) {
    const int base = l * l + l;
    const auto row = static_cast<std::size_t>(l * (l + 1) / 2);
    out[base] = q[row];
    for (int m = 1; m <= l; ++m) {
      const double v = std::numbers::sqrt2 * q[row + static_cast<std::size_t>(m)];
      out[base + m] = v * std::cos(m * p.phi);
      out[base - m] = v * std::sin(m * p.phi);
    }
  }
  return out;
}

/// Complex spherical harmonic Y_l^m (Condon-Shortley phase), n = 3.
inline cplx complex_harmonic(int l, int m, const SpherePoint& p) {
  require(l >= 0 && std::abs(m) <= l, "complex_harmonic: need |m| <= l");
  const int am = std::abs(m);
  const auto q = detail::normalized_legendre(l, std::cos(p.theta));
  const double mag = q[static_cast<std::size_t>(l * (l + 1) / 2 + am)];
  const cplx phase = std::polar(1.0, am * p.phi);
  if (m >= 0) return (am % 2 ? -1.0 : 1.0) * mag * phase;
  return mag * std::conj(phase);
}

/// A C^N-valued function on S^{n-1} stored as coefficients over the real
/// orthonormal eigenbasis, truncated at degree l_max. Coefficient of mode k,
/// component c lives at index k * value_dim + c.
class SphereField {
 public:
  SphereField() = default;

  SphereField(int n, int l_max, int value_dim = 1)
      : n_(n), l_max_(l_max), value_dim_(value_dim) {
    check_dimension(n);
    require(l_max >= 0, "SphereField: l_max must be >= 0");
    require(value_dim >= 1, "SphereField: value_dim must be >= 1");
    coeffs_ = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(raddich::mode_count(n, l_max)) * value_dim);
  }

  SphereField(int n, int l_max, int value_dim, Eigen::VectorXcd coeffs)
      : SphereField(n, l_max, value_dim) {
    require(coeffs.size() == coeffs_.size(), "SphereField: coefficient length mismatch");
    coeffs_ = std::move(coeffs);
  }

  /// Single basis function (unit coefficient on mode k, component c).
  static SphereField basis(int n, int l_max, const ModeIndex& k, int component = 0,
                           int value_dim = 1) {
    SphereField f(n, l_max, value_dim);
    require(k.l <= l_max, "SphereField::basis: degree exceeds l_max");
    f.coeff(mode_position(n, k), component) = 1.0;
    return f;
  }

  int dimension() const { return n_; }
  int l_max() const { return l_max_; }
  int value_dim() const { return value_dim_; }
  int mode_count() const { return raddich::mode_count(n_, l_max_); }
  Eigen::Index size() const { return coeffs_.size(); }

  cplx& coeff(int mode, int component = 0) { return coeffs_[mode * value_dim_ + component]; }
  const cplx& coeff(int mode, int component = 0) const {
    return coeffs_[mode * value_dim_ + component];
  }
  cplx& operator()(const ModeIndex& k, int component = 0) {
    return coeff(mode_position(n_, k), component);
  }
  const cplx& operator()(const ModeIndex& k, int component = 0) const {
    return coeff(mode_position(n_, k), component);
  }

  const Eigen::VectorXcd& coeffs() const { return coeffs_; }
  Eigen::VectorXcd& coeffs() { return coeffs_; }

  bool compatible(const SphereField& o) const {
    return n_ == o.n_ && l_max_ == o.l_max_ && value_dim_ == o.value_dim_;
  }

  /// Copy re-truncated (or zero-padded) to a new degree.
  SphereField with_l_max(int l_max) const {
    SphereField out(n_, l_max, value_dim_);
    const Eigen::Index keep = std::min(out.size(), size());
    out.coeffs_.head(keep) = coeffs_.head(keep);
    return out;
  }

  SphereField& operator+=(const SphereField& o) {
    require(compatible(o), "SphereField: incompatible operands");
    coeffs_ += o.coeffs_;
    return *this;
  }
  SphereField& operator-=(const SphereField& o) {
    require(compatible(o), "SphereField: incompatible operands");
    coeffs_ -= o.coeffs_;
    return *this;
  }
  SphereField& operator*=(cplx s) {
    coeffs_ *= s;
    return *this;
  }
  friend SphereField operator+(SphereField a, const SphereField& b) { return a += b; }
  friend SphereField operator-(SphereField a, const SphereField& b) { return a -= b; }
  friend SphereField operator*(cplx s, SphereField a) { return a *= s; }
  friend SphereField operator*(SphereField a, cplx s) { return a *= s; }

  double max_imag() const {
    return coeffs_.size() ? coeffs_.imag().cwiseAbs().maxCoeff() : 0.0;
  }

  /// Pointwise value at p (length value_dim).
  Eigen::VectorXcd evaluate(const SpherePoint& p) const {
    const Eigen::VectorXd y = real_harmonics(n_, l_max_, p);
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(value_dim_);
    for (int k = 0; k < mode_count(); ++k)
      for (int c = 0; c < value_dim_; ++c) v[c] += y[k] * coeff(k, c);
    return v;
  }

 private:
  int n_ = 3;
  int l_max_ = 0;
  int value_dim_ = 1;
  Eigen::VectorXcd coeffs_;
};

/// Spectral Sobolev norm sqrt(sum_k (1 + lambda_k)^s |c_k|^2).
inline double sobolev_norm(const SphereField& f, double s) {
  double acc = 0.0;
  const auto modes = enumerate_modes(f.dimension(), f.l_max());
  for (int k = 0; k < f.mode_count(); ++k) {
    const double w = std::pow(1.0 + lb_eigenvalue(f.dimension(), modes[static_cast<std::size_t>(k)].l), s);
    for (int c = 0; c < f.value_dim(); ++c) acc += w * std::norm(f.coeff(k, c));
  }
  return std::sqrt(acc);
}

/// Per-coefficient weights (1 + lambda_k)^{s/2}, so that ||diag(w) c||_2 is
/// the H^s norm of the field with coefficients c.
inline Eigen::VectorXd sobolev_weights(int n, int l_max, int value_dim, double s) {
  const auto modes = enumerate_modes(n, l_max);
  Eigen::VectorXd w(static_cast<Eigen::Index>(modes.size()) * value_dim);
  for (std::size_t k = 0; k < modes.size(); ++k)
    for (int c = 0; c < value_dim; ++c)
      w[static_cast<Eigen::Index>(k) * value_dim + c] =
          std::pow(1.0 + lb_eigenvalue(n, modes[k].l), 0.5 * s);
  return w;
}

/// Gauss-Legendre nodes and weights on [-1, 1].
inline void gauss_legendre(int count, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
  require(count >= 1, "gauss_legendre: need at least one node");
  nodes.resize(count);
  weights.resize(count);
  // P_count(x) and its derivative by the three-term recurrence.
  auto legendre = [count](double x) {
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= count; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    return std::pair{p1, count * (x * p1 - p0) / (x * x - 1.0)};
  };
  for (int i = 0; i < count; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (count + 0.5));
    for (int it = 0; it < 100; ++it) {
      const auto [p, dp] = legendre(x);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double dp = legendre(x).second;
    nodes[i] = x;
    weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
}

/// Tensor-product quadrature on S^{n-1}: Gauss-Legendre in cos(theta) times
/// the uniform trapezoid rule in phi (n = 3), or the trapezoid rule alone
/// (n = 2). Integrates band-limited products up to `exact_degree` exactly.
/// Also caches the basis matrix for synthesis/analysis up to degree l_max.
class SphereQuadrature {
 public:
  SphereQuadrature(int n, int l_max, int exact_degree)
      : n_(n), l_max_(l_max), exact_degree_(exact_degree) {
    check_dimension(n);
    require(l_max >= 0 && exact_degree >= 0, "SphereQuadrature: negative degree");
    const int n_phi = exact_degree + 1;
    if (n == 2) {
      for (int j = 0; j < n_phi; ++j)
        points_.push_back({0.5 * std::numbers::pi, 2.0 * std::numbers::pi * j / n_phi});
      weights_ = Eigen::VectorXd::Constant(n_phi, 2.0 * std::numbers::pi / n_phi);
    } else {
      const int n_theta = exact_degree / 2 + 1;
      Eigen::VectorXd x, w;
      gauss_legendre(n_theta, x, w);
      weights_.resize(static_cast<Eigen::Index>(n_theta) * n_phi);
      for (int i = 0; i < n_theta; ++i)
        for (int j = 0; j < n_phi; ++j) {
          points_.push_back({std::acos(x[i]), 2.0 * std::numbers::pi * j / n_phi});
          weights_[static_cast<Eigen::Index>(i) * n_phi + j] = w[i] * 2.0 * std::numbers::pi / n_phi;
        }
    }
    basis_.resize(static_cast<Eigen::Index>(points_.size()), mode_count(n, l_max));
    for (std::size_t q = 0; q < points_.size(); ++q)
      basis_.row(static_cast<Eigen::Index>(q)) = real_harmonics(n, l_max, points_[q]).transpose();
  }

  int dimension() const { return n_; }
  int l_max() const { return l_max_; }
  int exact_degree() const { return exact_degree_; }
  int node_count() const { return static_cast<int>(points_.size()); }
  const std::vector<SpherePoint>& points() const { return points_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  /// nodes x modes matrix of basis values.
  const Eigen::MatrixXd& basis() const { return basis_; }

  /// Nodal values (nodes x value_dim) of a field with degree <= l_max.
  Eigen::MatrixXcd synthesize(const SphereField& f) const {
    require(f.dimension() == n_ && f.l_max() <= l_max_, "synthesize: field exceeds quadrature basis");
    const int nv = f.value_dim();
    Eigen::MatrixXcd c(f.mode_count(), nv);
    for (int k = 0; k < f.mode_count(); ++k)
      for (int v = 0; v < nv; ++v) c(k, v) = f.coeff(k, v);
    return basis_.leftCols(f.mode_count()).cast<cplx>() * c;
  }

  /// Galerkin projection of nodal values (nodes x value_dim) onto degree <= l_out.
  SphereField analyze(const Eigen::MatrixXcd& values, int l_out) const {
    require(l_out <= l_max_, "analyze: l_out exceeds quadrature basis");
    require(values.rows() == node_count(), "analyze: wrong number of nodal values");
    const int mc = mode_count(n_, l_out);
    const Eigen::MatrixXcd c =
        basis_.leftCols(mc).transpose().cast<cplx>() * (weights_.cast<cplx>().asDiagonal() * values);
    SphereField out(n_, l_out, static_cast<int>(values.cols()));
    for (int k = 0; k < mc; ++k)
      for (int v = 0; v < values.cols(); ++v) out.coeff(k, v) = c(k, v);
    return out;
  }

 private:
  int n_;
  int l_max_;
  int exact_degree_;
  std::vector<SpherePoint> points_;
  Eigen::VectorXd weights_;
  Eigen::MatrixXd basis_;
};

/// <f, g> = sum over components of the integral of f conj(g), by quadrature
/// exact for the product of the two band-limited fields.
inline cplx quadrature_inner_product(const SphereField& f, const SphereField& g) {
  require(f.dimension() == g.dimension() && f.value_dim() == g.value_dim(),
          "quadrature_inner_product: dimension mismatch");
  const int l = std::max(f.l_max(), g.l_max());
  const SphereQuadrature quad(f.dimension(), l, 2 * l);
  const Eigen::MatrixXcd a = quad.synthesize(f);
  const Eigen::MatrixXcd b = quad.synthesize(g);
  cplx acc = 0.0;
  for (int q = 0; q < quad.node_count(); ++q)
    for (int c = 0; c < f.value_dim(); ++c) acc += quad.weights()[q] * a(q, c) * std::conj(b(q, c));
  return acc;
}

/// Pointwise N x N matrix-valued function on the sphere.
using PointwiseMatrix = std::function<Eigen::MatrixXd(const SpherePoint&)>;

inline int default_product_degree(int l_max) { return 3 * l_max + 2; }

/// Degree-<= l_out Galerkin projection of the pointwise product V f.
///
/// The quadrature integrates products of degree <= exact_degree exactly; it
/// must resolve at least 2 * max(l_f, l_out).
inline SphereField project_pointwise_product(const PointwiseMatrix& V, const SphereField& f,
                                             int l_out, int exact_degree = -1) {
  const int l = std::max(f.l_max(), l_out);
  if (exact_degree < 0) exact_degree = default_product_degree(l);
  if (exact_degree < 2 * l)
    fail(ErrorKind::precondition, "project_pointwise_product: quadrature degree " +
                                      std::to_string(exact_degree) + " cannot resolve l_max " +
                                      std::to_string(l));
  const SphereQuadrature quad(f.dimension(), l, exact_degree);
  const Eigen::MatrixXcd fv = quad.synthesize(f);
  Eigen::MatrixXcd prod(fv.rows(), fv.cols());
  for (int q = 0; q < quad.node_count(); ++q) {
    const Eigen::MatrixXd v = V(quad.points()[static_cast<std::size_t>(q)]);
    require(v.rows() == f.value_dim() && v.cols() == f.value_dim(),
            "project_pointwise_product: V has wrong matrix size");
    prod.row(q) = (v.cast<cplx>() * fv.row(q).transpose()).transpose();
  }
  return quad.analyze(prod, l_out);
}

/// Coefficients over complex Y_l^m (n = 3), ordered like enumerate_modes with
/// m read as the complex order.
inline SphereField to_complex_harmonics(const SphereField& f) {
  require(f.dimension() == 3, "to_complex_harmonics: n = 3 only");
  SphereField out(3, f.l_max(), f.value_dim());
  const double r2 = std::numbers::sqrt2;
  for (int l = 0; l <= f.l_max(); ++l)
    for (int c = 0; c < f.value_dim(); ++c) {
      out({l, 0}, c) = f({l, 0}, c);
      for (int m = 1; m <= l; ++m) {
        const cplx a = f({l, m}, c), b = f({l, -m}, c);
        const double sgn = (m % 2) ? -1.0 : 1.0;
        out({l, m}, c) = sgn * (a - cplx(0, 1) * b) / r2;
        out({l, -m}, c) = (a + cplx(0, 1) * b) / r2;
      }
    }
  return out;
}

/// Inverse of to_complex_harmonics.
inline SphereField from_complex_harmonics(const SphereField& z) {
  require(z.dimension() == 3, "from_complex_harmonics: n = 3 only");
  SphereField out(3, z.l_max(), z.value_dim());
  const double r2 = std::numbers::sqrt2;
  for (int l = 0; l <= z.l_max(); ++l)
    for (int c = 0; c < z.value_dim(); ++c) {
      out({l, 0}, c) = z({l, 0}, c);
      for (int m = 1; m <= l; ++m) {
        const double sgn = (m % 2) ? -1.0 : 1.0;
        const cplx p = sgn * z({l, m}, c);  // (a - i b)/sqrt2
        const cplx q = z({l, -m}, c);       // (a + i b)/sqrt2
        out({l, m}, c) = (p + q) / r2;
        out({l, -m}, c) = (q - p) / (cplx(0, 1) * r2);
      }
    }
  return out;
}

}  // namespace raddich
