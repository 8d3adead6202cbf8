#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "raddich/sphere_basis.hpp"

using namespace raddich;

namespace {

SphereField random_field(std::mt19937_64& rng, int n, int l_max, int value_dim = 1) {
  std::normal_distribution<double> d;
  SphereField f(n, l_max, value_dim);
  for (Eigen::Index i = 0; i < f.size(); ++i) f.coeffs()[i] = cplx(d(rng), d(rng));
  return f;
}

// Midpoint rule on a fine (theta, phi) grid; independent of the Gauss rule.
template <class Fn>
double brute_sphere_integral(Fn fn, int nt = 400, int np = 800) {
  double acc = 0.0;
  const double dt = std::numbers::pi / nt, dp = 2.0 * std::numbers::pi / np;
  for (int i = 0; i < nt; ++i) {
    const double th = (i + 0.5) * dt;
    for (int j = 0; j < np; ++j) acc += fn(SpherePoint{th, (j + 0.5) * dp}) * std::sin(th) * dt * dp;
  }
  return acc;
}

}  // namespace

TEST(LbEigenvalue, Values) {
  EXPECT_EQ(lb_eigenvalue(3, 2), 6.0);
  EXPECT_EQ(lb_eigenvalue(3, 0), 0.0);
  EXPECT_EQ(lb_eigenvalue(2, 4), 16.0);
  EXPECT_THROW(lb_eigenvalue(1, 0), Error);
  EXPECT_THROW(lb_eigenvalue(3, -1), Error);
}

TEST(EnumerateModes, Counts) {
  EXPECT_EQ(enumerate_modes(3, 2).size(), 9u);
  EXPECT_EQ(enumerate_modes(3, 0).size(), 1u);
  EXPECT_EQ(enumerate_modes(2, 1).size(), 3u);
  for (int l = 0; l < 6; ++l) {
    EXPECT_EQ(modes_of_degree(3, l), 2 * l + 1);
    EXPECT_EQ(modes_of_degree(2, l), l == 0 ? 1 : 2);
  }
}

TEST(EnumerateModes, OrderIsStrictAndPositionsMatch) {
  for (int n : {2, 3}) {
    const auto modes = enumerate_modes(n, 7);
    for (std::size_t k = 0; k < modes.size(); ++k) {
      if (k > 0) {
        EXPECT_LT(modes[k - 1], modes[k]);
      }
      EXPECT_EQ(mode_position(n, modes[k]), static_cast<int>(k));
    }
  }
}

TEST(RealHarmonics, MatchClosedForms) {
  const SpherePoint p{0.7, 1.9};
  const Eigen::VectorXd y = real_harmonics(3, 2, p);
  const double pi = std::numbers::pi;
  const double c = std::cos(p.theta), s = std::sin(p.theta);
  EXPECT_NEAR(y[mode_position(3, {0, 0})], 1.0 / std::sqrt(4 * pi), 1e-15);
  EXPECT_NEAR(y[mode_position(3, {1, 0})], std::sqrt(3 / (4 * pi)) * c, 1e-15);
  EXPECT_NEAR(y[mode_position(3, {1, 1})], std::sqrt(3 / (4 * pi)) * s * std::cos(p.phi), 1e-15);
  EXPECT_NEAR(y[mode_position(3, {1, -1})], std::sqrt(3 / (4 * pi)) * s * std::sin(p.phi), 1e-15);
  EXPECT_NEAR(y[mode_position(3, {2, 0})], std::sqrt(5 / (16 * pi)) * (3 * c * c - 1), 1e-15);
  EXPECT_NEAR(y[mode_position(3, {2, 2})], std::sqrt(15 / (16 * pi)) * s * s * std::cos(2 * p.phi), 1e-15);
}

TEST(RealHarmonics, OrthonormalAgainstBruteForce) {
  for (const ModeIndex a : {ModeIndex{0, 0}, ModeIndex{1, 0}, ModeIndex{2, -1}, ModeIndex{3, 2}})
    for (const ModeIndex b : {ModeIndex{0, 0}, ModeIndex{1, 0}, ModeIndex{2, -1}, ModeIndex{3, 2}}) {
      const double v = brute_sphere_integral([&](const SpherePoint& p) {
        const Eigen::VectorXd y = real_harmonics(3, 3, p);
        return y[mode_position(3, a)] * y[mode_position(3, b)];
      });
      EXPECT_NEAR(v, a == b ? 1.0 : 0.0, 1e-4);
    }
}

TEST(ComplexHarmonics, RoundTripAndCondonShortley) {
  const SpherePoint p{1.1, 0.4};
  // Y_1^1 = -sqrt(3/8pi) sin(theta) e^{i phi}
  const cplx y11 = complex_harmonic(1, 1, p);
  EXPECT_NEAR(std::abs(y11 - (-std::sqrt(3 / (8 * std::numbers::pi)) * std::sin(p.theta) * std::polar(1.0, p.phi))),
              0.0, 1e-15);
  std::mt19937_64 rng(7);
  const SphereField f = random_field(rng, 3, 4);
  const SphereField z = to_complex_harmonics(f);
  EXPECT_LT((from_complex_harmonics(z).coeffs() - f.coeffs()).norm(), 1e-13);
  // Pointwise: sum z_lm Y_l^m equals sum f_k (real basis)_k.
  cplx acc = 0.0;
  for (const auto& k : enumerate_modes(3, 4)) acc += z(k) * complex_harmonic(k.l, k.m, p);
  EXPECT_NEAR(std::abs(acc - f.evaluate(p)[0]), 0.0, 1e-12);
}

TEST(SobolevNorm, Examples) {
  EXPECT_NEAR(sobolev_norm(SphereField::basis(3, 2, {1, 0}), 0.5), std::pow(3.0, 0.25), 1e-14);
  EXPECT_NEAR(sobolev_norm(SphereField::basis(3, 2, {0, 0}), 3.7), 1.0, 1e-15);
  const SphereField f = SphereField::basis(3, 2, {2, 0}) + SphereField::basis(3, 2, {0, 0});
  EXPECT_NEAR(sobolev_norm(f, -0.5), std::sqrt(1 + 1 / std::sqrt(7.0)), 1e-14);
  EXPECT_NEAR(sobolev_norm(f, -0.5), 1.17387, 1e-5);
}

TEST(SobolevNorm, ZeroOrderIsL2AndWeightsAgree) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = trial % 2 ? 2 : 3;
    const SphereField f = random_field(rng, n, 1 + trial % 5, 1 + trial % 2);
    EXPECT_NEAR(sobolev_norm(f, 0.0), f.coeffs().norm(), 1e-12);
    const double s = -1.0 + 0.1 * trial;
    const Eigen::VectorXd w = sobolev_weights(n, f.l_max(), f.value_dim(), s);
    EXPECT_NEAR((w.cast<cplx>().cwiseProduct(f.coeffs())).norm(), sobolev_norm(f, s), 1e-10 * sobolev_norm(f, s));
  }
}

TEST(Quadrature, InnerProductExamples) {
  const auto modes = enumerate_modes(3, 3);
  for (const auto& a : modes)
    for (const auto& b : modes) {
      const cplx v = quadrature_inner_product(SphereField::basis(3, 3, a), SphereField::basis(3, 3, b));
      EXPECT_NEAR(std::abs(v - (a == b ? 1.0 : 0.0)), 0.0, 1e-13);
    }
  EXPECT_NEAR(std::abs(quadrature_inner_product(SphereField::basis(3, 2, {1, 0}), SphereField::basis(3, 2, {2, 0}))),
              0.0, 1e-14);
}

TEST(Quadrature, ParsevalProperty) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = trial % 3 == 0 ? 2 : 3;
    const SphereField f = random_field(rng, n, trial % 7, 1 + trial % 3);
    const cplx ip = quadrature_inner_product(f, f);
    EXPECT_NEAR(ip.real(), f.coeffs().squaredNorm(), 1e-10 * std::max(1.0, f.coeffs().squaredNorm()));
    EXPECT_NEAR(ip.imag(), 0.0, 1e-10 * std::max(1.0, f.coeffs().squaredNorm()));
    const SphereField g = random_field(rng, n, trial % 7, 1 + trial % 3);
    EXPECT_NEAR(std::abs(quadrature_inner_product(f, g) - g.coeffs().dot(f.coeffs())), 0.0, 1e-10 * (1 + f.coeffs().norm() * g.coeffs().norm()));
  }
}

TEST(Quadrature, SynthesizeAnalyzeRoundTrip) {
  std::mt19937_64 rng(5);
  for (int n : {2, 3}) {
    const SphereField f = random_field(rng, n, 5, 2);
    const SphereQuadrature q(n, 5, 10);
    EXPECT_LT((q.analyze(q.synthesize(f), 5).coeffs() - f.coeffs()).norm(), 1e-12);
  }
}

TEST(PointwiseProduct, Examples) {
  std::mt19937_64 rng(9);
  const SphereField f = random_field(rng, 3, 4);
  const SphereField cf = project_pointwise_product([](const SpherePoint&) { return Eigen::MatrixXd::Constant(1, 1, 2.5); }, f, 4);
  EXPECT_LT((cf.coeffs() - 2.5 * f.coeffs()).norm(), 1e-12);
  const SphereField zero = project_pointwise_product([](const SpherePoint& p) { return Eigen::MatrixXd::Constant(1, 1, std::cos(p.theta)); },
                                                     SphereField(3, 4), 4);
  EXPECT_EQ(zero.coeffs().norm(), 0.0);
}

TEST(PointwiseProduct, Y10TimesY10MatchesBruteForce) {
  auto y10 = [](const SpherePoint& p) { return std::sqrt(3 / (4 * std::numbers::pi)) * std::cos(p.theta); };
  const SphereField out = project_pointwise_product(
      [&](const SpherePoint& p) { return Eigen::MatrixXd::Constant(1, 1, y10(p)); }, SphereField::basis(3, 3, {1, 0}), 3);
  for (const auto& k : enumerate_modes(3, 3)) {
    const double brute = brute_sphere_integral([&](const SpherePoint& p) {
      return y10(p) * y10(p) * real_harmonics(3, 3, p)[mode_position(3, k)];
    });
    EXPECT_NEAR(out(k).real(), brute, 2e-5) << "l=" << k.l << " m=" << k.m;
    if (!(k == ModeIndex{0, 0} || k == ModeIndex{2, 0})) {
      EXPECT_NEAR(std::abs(out(k)), 0.0, 1e-13);
    }
  }
  EXPECT_GT(std::abs(out({0, 0})), 0.1);
  EXPECT_GT(std::abs(out({2, 0})), 0.1);
}

TEST(PointwiseProduct, MultiplicationBoundProperty) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const double a = u(rng), b = u(rng), c = u(rng);
    auto V = [&](const SpherePoint& p) {
      const auto x = p.cartesian();
      return Eigen::MatrixXd::Constant(1, 1, a * x[0] + b * x[1] * x[2] + c);
    };
    double sup = 0.0;
    const SphereQuadrature grid(3, 0, 40);
    for (const auto& p : grid.points()) sup = std::max(sup, std::abs(V(p)(0, 0)));
    const SphereField f = random_field(rng, 3, 4);
    // L^2 bound holds exactly for the Galerkin projection.
    const SphereField vf = project_pointwise_product(V, f, 4);
    EXPECT_LE(vf.coeffs().norm(), sup * f.coeffs().norm() * 1.01);
  }
}

TEST(PointwiseProduct, RejectsUnderResolvedQuadrature) {
  EXPECT_THROW(project_pointwise_product([](const SpherePoint&) { return Eigen::MatrixXd::Ones(1, 1); },
                                         SphereField(3, 4), 4, 6),
               Error);
}

TEST(GaussLegendre, IntegratesPolynomials) {
  Eigen::VectorXd x, w;
  gauss_legendre(6, x, w);
  for (int d = 0; d <= 11; ++d) {
    double acc = 0.0;
    for (int i = 0; i < 6; ++i) acc += w[i] * std::pow(x[i], d);
    EXPECT_NEAR(acc, d % 2 ? 0.0 : 2.0 / (d + 1), 1e-14);
  }
}
