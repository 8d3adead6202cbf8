#pragma once

// Closed-form fixtures: harmonic traces, spherical Bessel functions and their
// zeros, fundamental solutions and manufactured nonlinear problems.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "raddich/errors.hpp"
#include "raddich/nonlinearity.hpp"
#include "raddich/potential.hpp"
#include "raddich/ses.hpp"
#include "raddich/sphere_basis.hpp"

namespace raddich {

/// Surface measure of S^{n-1} (n = 2, 3).
inline double sphere_area(int n) {
  check_dimension(n);
  return n == 2 ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi;
}

/// Trace of a radial function u(r) with u'(r) = du at radius t.
inline TraceState radial_trace(int n, int l_max, double t, double u, double du) {
  const double c = std::sqrt(sphere_area(n));
  TraceState x{t, SphereField(n, l_max), SphereField(n, l_max)};
  x.f(ModeIndex{0, 0}) = c * u;
  x.g(ModeIndex{0, 0}) = c * du;
  return x;
}

// -- harmonic families -------------------------------------------------------------

enum class HarmonicBranch {
  growing,  ///< r^l Y
  decaying  ///< r^{2-n-l} Y (log r for n = 2, l = 0)
};

/// Trace of the harmonic function r^l Y or r^{2-n-l} Y on the sphere of radius t.
/// With n = 3 the decaying branch is r^{-l-1} Y_l^m.
inline TraceState harmonic_trace(const ModeIndex& k, HarmonicBranch branch, double t, int n = 3, int l_max = -1) {
  require(t > 0.0, "harmonic_trace: t must be positive");
  if (l_max < 0) l_max = k.l;
  const SphereField y = SphereField::basis(n, l_max, k);
  double f, g;
  if (branch == HarmonicBranch::growing) {
    f = std::pow(t, k.l);
    g = k.l == 0 ? 0.0 : k.l * std::pow(t, k.l - 1);
  } else if (n == 2 && k.l == 0) {
    f = std::log(t);
    g = 1.0 / t;
  } else {
    const double e = 2.0 - n - k.l;
    f = std::pow(t, e);
    g = e * std::pow(t, e - 1.0);
  }
  return {t, f * y, g * y};
}

// -- spherical Bessel functions ------------------------------------------------------

/// j_0(x), ..., j_{l_max}(x). Upward recurrence for x >= l_max; otherwise a
/// downward (Miller) recurrence normalized by sum (2k+1) j_k^2 = 1.
inline std::vector<double> spherical_bessel_sequence(int l_max, double x) {
  require(l_max >= 0 && x >= 0.0, "spherical_bessel: need l >= 0 and x >= 0");
  std::vector<double> j(static_cast<std::size_t>(l_max) + 1, 0.0);
  if (x == 0.0) {
    j[0] = 1.0;
    return j;
  }
  if (x < 1e-6) {
    double lead = 1.0;
    for (int l = 0; l <= l_max; ++l) {
      if (l > 0) lead *= x / (2.0 * l + 1.0);
      j[static_cast<std::size_t>(l)] = lead * (1.0 - x * x / (2.0 * (2.0 * l + 3.0)));
    }
    return j;
  }
  const double j0 = std::sin(x) / x;
  const double j1 = std::sin(x) / (x * x) - std::cos(x) / x;
  if (x >= l_max) {
    j[0] = j0;
    if (l_max >= 1) j[1] = j1;
    for (int l = 1; l < l_max; ++l)
      j[static_cast<std::size_t>(l) + 1] = (2.0 * l + 1.0) / x * j[static_cast<std::size_t>(l)] - j[static_cast<std::size_t>(l) - 1];
    return j;
  }
  const int start = l_max + 30 + static_cast<int>(x);
  std::vector<double> d(static_cast<std::size_t>(start) + 2, 0.0);
  d[static_cast<std::size_t>(start)] = 1e-30;
  for (int k = start; k >= 1; --k) {
    d[static_cast<std::size_t>(k) - 1] =
        (2.0 * k + 1.0) / x * d[static_cast<std::size_t>(k)] - d[static_cast<std::size_t>(k) + 1];
    if (std::abs(d[static_cast<std::size_t>(k) - 1]) > 1e200)
      for (int m = k - 1; m <= start + 1; ++m) d[static_cast<std::size_t>(m)] *= 1e-200;
  }
  double sum = 0.0;
  for (int k = 0; k <= start; ++k) sum += (2.0 * k + 1.0) * d[static_cast<std::size_t>(k)] * d[static_cast<std::size_t>(k)];
  double scale = 1.0 / std::sqrt(sum);
  // The sum rule fixes the magnitude; the sign comes from the better-conditioned closed form.
  if (std::abs(j0) >= std::abs(j1)) {
    if ((d[0] < 0) != (j0 < 0)) scale = -scale;
  } else if ((d[1] < 0) != (j1 < 0)) {
    scale = -scale;
  }
  for (int l = 0; l <= l_max; ++l) j[static_cast<std::size_t>(l)] = scale * d[static_cast<std::size_t>(l)];
  return j;
}

inline double spherical_bessel(int l, double x) {
  return spherical_bessel_sequence(l, x)[static_cast<std::size_t>(l)];
}

/// j_l'(x) = (l j_{l-1} - (l+1) j_{l+1}) / (2l+1), with j_0' = -j_1.
inline double spherical_bessel_derivative(int l, double x) {
  const std::vector<double> j = spherical_bessel_sequence(l + 1, x);
  if (l == 0) return -j[1];
  return (l * j[static_cast<std::size_t>(l) - 1] - (l + 1.0) * j[static_cast<std::size_t>(l) + 1]) / (2.0 * l + 1.0);
}

/// k-th positive zero of j_l (k >= 1), bracketed on a 0.05 lattice and
/// bisected to 1e-12. The search runs up to `search_limit` (automatic when < 0).
inline double bessel_zero(int l, int k, double search_limit = -1.0) {
  require(l >= 0 && k >= 1, "bessel_zero: need l >= 0 and k >= 1");
  if (search_limit < 0.0) search_limit = l + std::numbers::pi * (k + 0.5 * l + 2.0) + 10.0;
  const double step = 0.05;
  double a = std::max(0.5 * l, 0.5);
  double fa = spherical_bessel(l, a);
  int found = 0;
  while (a < search_limit) {
    const double b = a + step;
    const double fb = spherical_bessel(l, b);
    if (fb == 0.0 || (fa < 0) != (fb < 0)) {
      if (++found == k) {
        if (fb == 0.0) return b;
        double lo = a, hi = b, flo = fa;
        while (hi - lo > 1e-12) {
          const double mid = 0.5 * (lo + hi);
          const double fm = spherical_bessel(l, mid);
          if (fm == 0.0) return mid;
          if ((fm < 0) == (flo < 0)) {
            lo = mid;
            flo = fm;
          } else {
            hi = mid;
          }
        }
        return 0.5 * (lo + hi);
      }
    }
    a = b;
    fa = fb;
  }
  fail(ErrorKind::precondition, "bessel_zero: zero " + std::to_string(k) + " of j_" + std::to_string(l) +
                                    " not bracketed below x = " + std::to_string(search_limit));
}

// -- exact solutions -------------------------------------------------------------------

enum class SolutionKind { harmonic, bessel_mode, fundamental, log_mode, manufactured };

inline const char* to_string(SolutionKind k) {
  switch (k) {
    case SolutionKind::harmonic: return "harmonic";
    case SolutionKind::bessel_mode: return "bessel_mode";
    case SolutionKind::fundamental: return "fundamental";
    case SolutionKind::log_mode: return "log_mode";
    case SolutionKind::manufactured: return "manufactured";
  }
  return "?";
}

/// Exact solution of Laplacian(u) - V u = F(x, u) with its trace evaluator.
struct ExactSolution {
  SolutionKind kind = SolutionKind::harmonic;
  std::string label;
  int n = 3;
  int l_max = 0;
  double t_lo = 0.1;  ///< validity range of the evaluator
  double t_hi = 2.0;
  PotentialSpec V = PotentialSpec::zero();
  Nonlinearity F = Nonlinearity::zero();
  std::function<TraceState(double)> trace;

  /// count uniformly spaced traces on [a, b] (defaults to the validity range).
  std::vector<TraceState> sample(int count, double a = -1.0, double b = -1.0) const {
    if (a < 0.0) a = t_lo;
    if (b < 0.0) b = t_hi;
    require(count >= 2 && a > 0.0 && a < b, "ExactSolution::sample: bad range");
    std::vector<TraceState> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) out.push_back(trace(a + (b - a) * i / (count - 1)));
    return out;
  }

  /// Rescaled trace at tau.
  RescaledState rescaled(double tau, double alpha) const { return rescale_forward(trace(std::exp(tau)), alpha); }

  Forcing forcing() const { return trace_forcing(F, n, l_max); }
};

inline ExactSolution harmonic_solution(const ModeIndex& k, HarmonicBranch branch, int n = 3, int l_max = -1) {
  if (l_max < 0) l_max = k.l;
  mode_position(n, k);
  ExactSolution s;
  const bool log = n == 2 && k.l == 0 && branch == HarmonicBranch::decaying;
  s.kind = log ? SolutionKind::log_mode : SolutionKind::harmonic;
  s.label = std::string(branch == HarmonicBranch::growing ? "growing" : "decaying") + " harmonic l=" +
            std::to_string(k.l) + " m=" + std::to_string(k.m);
  s.n = n;
  s.l_max = l_max;
  s.t_lo = 0.5;
  s.t_hi = 2.0;
  s.trace = [k, branch, n, l_max](double t) { return harmonic_trace(k, branch, t, n, l_max); };
  return s;
}

/// j_l(sqrt(lambda) r) Y_l^m (n = 3), a solution for V = -lambda.
inline ExactSolution bessel_solution(const ModeIndex& k, double lambda, int l_max = -1) {
  require(lambda > 0.0, "bessel_solution: lambda must be positive");
  if (l_max < 0) l_max = k.l;
  mode_position(3, k);
  ExactSolution s;
  s.kind = SolutionKind::bessel_mode;
  s.label = "bessel l=" + std::to_string(k.l) + " lambda=" + std::to_string(lambda);
  s.n = 3;
  s.l_max = l_max;
  s.t_lo = 0.05;
  s.t_hi = 2.0;
  s.V = PotentialSpec::zero().shifted(lambda);
  const double kk = std::sqrt(lambda);
  s.trace = [k, kk, l_max](double t) {
    const SphereField y = SphereField::basis(3, l_max, k);
    return TraceState{t, spherical_bessel(k.l, kk * t) * y, kk * spherical_bessel_derivative(k.l, kk * t) * y};
  };
  return s;
}

/// r^{2-n} (n >= 3) or log r (n = 2).
inline ExactSolution fundamental_solution(int n, int l_max = 0) {
  check_dimension(n);
  ExactSolution s;
  s.kind = n == 2 ? SolutionKind::log_mode : SolutionKind::fundamental;
  s.label = n == 2 ? "log r" : "r^{2-n}";
  s.n = n;
  s.l_max = l_max;
  s.t_lo = 0.2;
  s.t_hi = 3.0;
  s.trace = [n, l_max](double t) {
    if (n == 2) return radial_trace(2, l_max, t, std::log(t), 1.0 / t);
    return radial_trace(n, l_max, t, std::pow(t, 2.0 - n), (2.0 - n) * std::pow(t, 1.0 - n));
  };
  return s;
}

// -- manufactured problems ----------------------------------------------------------------

/// Problem Laplacian(u) - V u = F(x, u) with a known solution u*.
struct ManufacturedProblem {
  std::string name;
  PotentialSpec V;
  Nonlinearity F;
  ExactSolution exact;
  double T = 1.0;           ///< ball radius for the boundary-value form
  bool dirichlet = false;   ///< u* vanishes on the sphere of radius T
};

inline std::vector<std::string> manufactured_names() { return {"gaussian-linear", "cubic-forced", "zero"}; }

/// "gaussian-linear": u* = e^{-r^2}, V = 4 r^2 - 2n, F = 0.
/// "cubic-forced":    u* = 1 - r^2, V = 0, F = u^3 + h with h = -2n - (1 - r^2)^3.
/// "zero":            u* = 0, V = 0, F = u^3.
inline ManufacturedProblem manufactured_problem(const std::string& name, int n = 3, int l_max = 0) {
  check_dimension(n);
  ManufacturedProblem p;
  p.name = name;
  p.exact.kind = SolutionKind::manufactured;
  p.exact.label = name;
  p.exact.n = n;
  p.exact.l_max = l_max;
  if (name == "gaussian-linear") {
    p.V = PotentialSpec::radial_polynomial({-2.0 * n, 0.0, 4.0});
    p.F = Nonlinearity::zero();
    p.exact.t_lo = 0.05;
    p.exact.t_hi = 2.0;
    p.exact.trace = [n, l_max](double t) {
      const double e = std::exp(-t * t);
      return radial_trace(n, l_max, t, e, -2.0 * t * e);
    };
  } else if (name == "cubic-forced") {
    p.V = PotentialSpec::zero();
    p.F = Nonlinearity::scalar(
        [n](double t, const SpherePoint&, double u) {
          const double s = 1.0 - t * t;
          return u * u * u - 2.0 * n - s * s * s;
        },
        "u^3 - 2n - (1 - r^2)^3", true, 3);
    p.exact.t_lo = 0.05;
    p.exact.t_hi = 1.0;
    p.exact.trace = [n, l_max](double t) { return radial_trace(n, l_max, t, 1.0 - t * t, -2.0 * t); };
    p.dirichlet = true;
  } else if (name == "zero") {
    p.V = PotentialSpec::zero();
    p.F = Nonlinearity::power(1.0, 3);
    p.exact.t_lo = 0.05;
    p.exact.t_hi = 2.0;
    p.exact.trace = [n, l_max](double t) { return TraceState{t, SphereField(n, l_max), SphereField(n, l_max)}; };
  } else {
    fail(ErrorKind::config, "unknown manufactured problem '" + name + "'");
  }
  p.exact.V = p.V;
  p.exact.F = p.F;
  return p;
}

}  // namespace raddich
