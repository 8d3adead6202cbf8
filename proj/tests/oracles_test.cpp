#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "raddich/oracles.hpp"

using namespace raddich;

namespace {

const double kPi = std::numbers::pi;

// Closed forms used as independent references.
double j0_ref(double x) { return std::sin(x) / x; }
double j1_ref(double x) { return std::sin(x) / (x * x) - std::cos(x) / x; }
double j2_ref(double x) { return (3.0 / (x * x) - 1.0) * std::sin(x) / x - 3.0 * std::cos(x) / (x * x); }

// j_l(x) = x^l / (2^{l+1} l!) * integral_{-1}^{1} cos(x s) (1 - s^2)^l ds, by composite Simpson.
double j_integral(int l, double x) {
  const int m = 20000;
  const double h = 2.0 / m;
  double acc = 0.0;
  for (int i = 0; i <= m; ++i) {
    const double s = -1.0 + i * h;
    const double w = (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += w * std::cos(x * s) * std::pow(1.0 - s * s, l);
  }
  acc *= h / 3.0;
  double pre = std::pow(x / 2.0, l) / 2.0;
  for (int k = 2; k <= l; ++k) pre /= k;
  return pre * acc;
}

double newton(double x, const std::function<double(double)>& f) {
  for (int i = 0; i < 60; ++i) {
    const double h = 1e-6;
    const double d = (f(x + h) - f(x - h)) / (2 * h);
    const double step = f(x) / d;
    x -= step;
    if (std::abs(step) < 1e-15) break;
  }
  return x;
}

}  // namespace

TEST(HarmonicTrace, Examples) {
  const SphereField y10 = SphereField::basis(3, 1, {1, 0});
  const TraceState a = harmonic_trace({1, 0}, HarmonicBranch::growing, 1.7);
  EXPECT_LT((a.f.coeffs() - 1.7 * y10.coeffs()).norm(), 1e-15);
  EXPECT_LT((a.g.coeffs() - y10.coeffs()).norm(), 1e-15);

  const SphereField y00 = SphereField::basis(3, 0, {0, 0});
  const TraceState b = harmonic_trace({0, 0}, HarmonicBranch::growing, 0.3);
  EXPECT_LT((b.f.coeffs() - y00.coeffs()).norm(), 1e-15);
  EXPECT_LT(b.g.coeffs().norm(), 1e-15);

  const TraceState c = harmonic_trace({0, 0}, HarmonicBranch::decaying, 2.0);
  EXPECT_LT((c.f.coeffs() - 0.5 * y00.coeffs()).norm(), 1e-15);
  EXPECT_LT((c.g.coeffs() + 0.25 * y00.coeffs()).norm(), 1e-15);
}

TEST(HarmonicTrace, PairWronskianIsConstant) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ut(0.1, 5.0);
  for (int l = 0; l <= 6; ++l)
    for (int trial = 0; trial < 10; ++trial) {
      const double t = ut(rng);
      const ModeIndex k{l, -l + trial % (2 * l + 1)};
      const cplx w = wronskian(harmonic_trace(k, HarmonicBranch::growing, t, 3, 6),
                               harmonic_trace(k, HarmonicBranch::decaying, t, 3, 6));
      EXPECT_NEAR(w.real(), -(2.0 * l + 1.0), 1e-12 * (2 * l + 1));
      EXPECT_NEAR(w.imag(), 0.0, 1e-14);
    }
}

TEST(HarmonicTrace, TwoDimensionalLogMode) {
  const TraceState x = harmonic_trace({0, 0}, HarmonicBranch::decaying, std::exp(1.0), 2);
  EXPECT_NEAR(x.f.coeff(0).real(), 1.0, 1e-15);
  EXPECT_NEAR(x.g.coeff(0).real(), std::exp(-1.0), 1e-15);
}

TEST(SphericalBessel, ClosedForms) {
  for (double x : {1e-3, 0.1, 0.7, 1.0, 1.9, 2.5, 3.3, 7.0, 12.5, 40.0}) {
    EXPECT_NEAR(spherical_bessel(0, x), j0_ref(x), 1e-14);
    EXPECT_NEAR(spherical_bessel(1, x), j1_ref(x), 1e-13);
    if (x > 1e-2) {
      EXPECT_NEAR(spherical_bessel(2, x), j2_ref(x), 1e-12);
    }
  }
  EXPECT_DOUBLE_EQ(spherical_bessel(0, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(spherical_bessel(3, 0.0), 0.0);
  EXPECT_NEAR(spherical_bessel(0, kPi), 0.0, 1e-16);
}

TEST(SphericalBessel, MatchesIntegralRepresentation) {
  for (int l : {0, 1, 3, 5, 8, 12, 20})
    for (double x : {0.01, 0.5, 2.0, 6.0, 11.0, 19.5, 30.0}) {
      const double ref = j_integral(l, x);
      EXPECT_NEAR(spherical_bessel(l, x), ref, 1e-12 + 1e-9 * std::abs(ref)) << "l=" << l << " x=" << x;
    }
}

TEST(SphericalBessel, DerivativeMatchesDifferenceQuotient) {
  for (int l : {0, 1, 2, 5})
    for (double x : {0.3, 1.0, 4.0, 9.0}) {
      const double h = 1e-5;
      const double fd = (spherical_bessel(l, x + h) - spherical_bessel(l, x - h)) / (2 * h);
      EXPECT_NEAR(spherical_bessel_derivative(l, x), fd, 1e-9);
    }
}

TEST(BesselZero, Examples) {
  EXPECT_NEAR(bessel_zero(0, 1), kPi, 1e-12);
  EXPECT_NEAR(bessel_zero(0, 2), 2.0 * kPi, 1e-12);
  const double z11 = newton(4.49, [](double x) { return std::tan(x) - x; });
  EXPECT_NEAR(bessel_zero(1, 1), z11, 1e-11);
  EXPECT_NEAR(bessel_zero(1, 1), 4.493409, 1e-6);
  const double z21 = newton(5.76, j2_ref);
  EXPECT_NEAR(bessel_zero(2, 1), z21, 1e-11);
}

TEST(BesselZero, IncreasingAndInterlacing) {
  for (int l = 0; l <= 8; ++l)
    for (int k = 1; k <= 5; ++k) {
      const double z = bessel_zero(l, k);
      EXPECT_NEAR(spherical_bessel(l, z), 0.0, 1e-11);
      EXPECT_LT(z, bessel_zero(l, k + 1));
      EXPECT_LT(z, bessel_zero(l + 1, k));
      EXPECT_LT(bessel_zero(l + 1, k), bessel_zero(l, k + 1));
    }
}

TEST(BesselZero, SearchWindowExhausted) {
  EXPECT_THROW(bessel_zero(0, 10, 5.0), Error);
  EXPECT_THROW(bessel_zero(0, 0), Error);
}

TEST(ExactSolutions, TraceResidualsBelowThreshold) {
  std::vector<ExactSolution> all;
  for (int n : {2, 3})
    for (int l = 0; l <= 3; ++l) {
      const ModeIndex k = n == 3 ? ModeIndex{l, l > 0 ? -1 : 0} : ModeIndex{l, l > 0 ? 1 : 0};
      all.push_back(harmonic_solution(k, HarmonicBranch::growing, n, 3));
      all.push_back(harmonic_solution(k, HarmonicBranch::decaying, n, 3));
    }
  for (int l = 0; l <= 2; ++l) all.push_back(bessel_solution({l, 0}, 7.0, 2));
  all.push_back(fundamental_solution(2));
  all.push_back(fundamental_solution(3));
  for (const auto& name : manufactured_names()) all.push_back(manufactured_problem(name, 3, 2).exact);
  all.push_back(manufactured_problem("cubic-forced", 2, 1).exact);
  for (const auto& s : all) {
    const double r = ses_residual(s.sample(2001), s.V, s.forcing(), 4);
    EXPECT_LT(r, 1e-6) << s.label;
  }
}

TEST(ExactSolutions, ResidualDetectsWrongPotential) {
  const ExactSolution s = bessel_solution({1, 0}, 7.0);
  EXPECT_GT(ses_residual(s.sample(2001), PotentialSpec::zero(), {}, 4), 1e-2);
}

TEST(Manufactured, GaussianLaplacian) {
  // Radial Laplacian by centered differences against (4 r^2 - 2n) u.
  for (int n : {2, 3})
    for (double r : {0.3, 0.8, 1.5}) {
      const double h = 1e-4;
      auto u = [](double s) { return std::exp(-s * s); };
      const double lap = (u(r + h) - 2 * u(r) + u(r - h)) / (h * h) + (n - 1) / r * (u(r + h) - u(r - h)) / (2 * h);
      EXPECT_NEAR(lap, (4 * r * r - 2.0 * n) * u(r), 1e-6);
    }
}

TEST(Manufactured, CubicForcedHasDirichletData) {
  const ManufacturedProblem p = manufactured_problem("cubic-forced", 3, 4);
  EXPECT_TRUE(p.dirichlet);
  EXPECT_TRUE(p.F.forcing);
  EXPECT_DOUBLE_EQ(p.T, 1.0);
  const TraceState x = p.exact.trace(1.0);
  EXPECT_LT(x.f.coeffs().norm(), 1e-15);
  EXPECT_GT(x.g.coeffs().norm(), 1.0);
}

TEST(Manufactured, ZeroTracesVanish) {
  const ManufacturedProblem p = manufactured_problem("zero", 3, 2);
  for (double t : {0.1, 0.5, 1.9}) {
    const TraceState x = p.exact.trace(t);
    EXPECT_EQ(x.f.coeffs().norm(), 0.0);
    EXPECT_EQ(x.g.coeffs().norm(), 0.0);
  }
  EXPECT_FALSE(p.F.forcing);
}

TEST(Manufactured, UnknownName) {
  try {
    manufactured_problem("quartic");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
  }
}

TEST(Nonlinearity, ZeroGivesZero) {
  const SphereField f = 2.0 * SphereField::basis(3, 2, {1, 1});
  EXPECT_EQ(evaluate_nonlinearity(Nonlinearity::zero(), -1.0, f, 0.5).coeffs().norm(), 0.0);
}

TEST(Nonlinearity, CubeOfConstantMode) {
  const double c = 1.3;
  const SphereField f = c * SphereField::basis(3, 3, {0, 0});
  const SphereField out = evaluate_nonlinearity(Nonlinearity::power(1.0, 3), 0.0, f, 0.5);
  // (c Y_0^0)^3 = c^3 / (4 pi)^{3/2}, whose Y_0^0 coefficient is c^3 / (4 pi).
  EXPECT_NEAR(out.coeff(0).real(), c * c * c / (4 * kPi), 1e-14);
  EXPECT_LT(out.coeffs().tail(out.size() - 1).norm(), 1e-14);
}

TEST(Nonlinearity, CubeOfDipoleMatchesIndependentQuadrature) {
  // (Y_1^0)^3 projected on Y_1^0 and Y_3^0, reference by a midpoint rule in theta.
  const SphereField f = SphereField::basis(3, 3, {1, 0});
  const SphereField out = evaluate_nonlinearity(Nonlinearity::power(1.0, 3), 0.0, f, 0.5);
  const int m = 200000;
  double p1 = 0.0, p3 = 0.0;
  const double a1 = std::sqrt(3.0 / (4 * kPi)), a3 = std::sqrt(7.0 / (4 * kPi));
  for (int i = 0; i < m; ++i) {
    const double x = -1.0 + (i + 0.5) * 2.0 / m;
    const double y1 = a1 * x, y3 = a3 * 0.5 * (5 * x * x * x - 3 * x);
    const double v = y1 * y1 * y1;
    p1 += v * y1 * 2.0 / m * 2 * kPi;
    p3 += v * y3 * 2.0 / m * 2 * kPi;
  }
  EXPECT_NEAR(out({1, 0}).real(), p1, 1e-9);
  EXPECT_NEAR(std::abs(out({3, 0}).real()), std::abs(p3), 1e-9);
  EXPECT_LT(std::abs(out({2, 0})), 1e-14);
}

TEST(Nonlinearity, QuadraticDecaysTowardOrigin) {
  const double alpha = 0.5;
  const SphereField f = SphereField::basis(3, 2, {0, 0}) + 0.5 * SphereField::basis(3, 2, {2, 1});
  const Nonlinearity F = Nonlinearity::power(1.0, 2);
  double prev = 1e300;
  for (double tau : {-1.0, -3.0, -5.0, -8.0}) {
    const double v = sobolev_norm(evaluate_nonlinearity(F, tau, f, alpha), 0.0);
    EXPECT_LT(v, prev);
    EXPECT_LT(v, std::exp((2.0 - alpha) * tau) * 2.0);
    prev = v;
  }
}

TEST(Nonlinearity, ValidityGuardAndRange) {
  Nonlinearity F = Nonlinearity::power(1.0, 3);
  F.validity = 1.0;
  const SphereField f = 10.0 * SphereField::basis(3, 1, {0, 0});
  EXPECT_THROW(evaluate_nonlinearity(F, 0.0, f, 0.5), Error);
  EXPECT_THROW(evaluate_nonlinearity(Nonlinearity::power(1.0, 3), 0.5, f, 0.5, 1.0), Error);
  SphereField z = f;
  z.coeff(1) = cplx(0.0, 1.0);
  EXPECT_THROW(evaluate_nonlinearity(Nonlinearity::power(1.0, 3), 0.0, z, 0.5), Error);
}
