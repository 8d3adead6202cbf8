#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "raddich/ode.hpp"
#include "raddich/ses.hpp"

using namespace raddich;

namespace {

SphereField random_field(std::mt19937_64& rng, int n, int l_max) {
  std::normal_distribution<double> d;
  SphereField f(n, l_max);
  for (Eigen::Index i = 0; i < f.size(); ++i) f.coeffs()[i] = cplx(d(rng), d(rng));
  return f;
}

// Traces of r^l Y (sign +1) or r^{-l-1} Y (sign -1), n = 3, written out directly.
TraceState harmonic(int l, int m, int sign, double t, int l_max) {
  const SphereField y = SphereField::basis(3, l_max, {l, m});
  if (sign > 0) return {t, std::pow(t, l) * y, (l == 0 ? 0.0 : l * std::pow(t, l - 1)) * y};
  return {t, std::pow(t, -l - 1.0) * y, (-(l + 1.0) * std::pow(t, -l - 2.0)) * y};
}

}  // namespace

TEST(LimitingOperator, BlockSpectrumExamples) {
  const LimitingOperator a = assemble_A(3, 0.5, 0);
  Eigen::EigenSolver<Eigen::MatrixXd> es(a.dense());
  std::vector<double> ev{es.eigenvalues()[0].real(), es.eigenvalues()[1].real()};
  std::sort(ev.begin(), ev.end());
  EXPECT_NEAR(ev[0], -0.5, 1e-14);
  EXPECT_NEAR(ev[1], 0.5, 1e-14);

  for (int l = 0; l <= 6; ++l) {
    const double alpha = 0.37;
    const Eigen::Matrix2d b = assemble_A(3, alpha, l).block(l);
    const Eigen::Vector2d v(1.0, l);
    EXPECT_LT((b * v - (alpha + l) * v).norm(), 1e-13);
  }
}

TEST(LimitingOperator, SpectrumIsAlphaPlusShiftSet) {
  for (int n : {2, 3}) {
    for (double alpha : {0.5, -0.3, 1.7}) {
      const LimitingOperator a = assemble_A(n, alpha, 5);
      Eigen::EigenSolver<Eigen::MatrixXd> es(a.dense(), false);
      std::vector<double> got, want = a.spectrum();
      for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        EXPECT_NEAR(es.eigenvalues()[i].imag(), 0.0, 1e-6);
        got.push_back(es.eigenvalues()[i].real());
      }
      std::sort(got.begin(), got.end());
      std::sort(want.begin(), want.end());
      ASSERT_EQ(got.size(), want.size());
      // Jordan blocks (n = 2, l = 0) perturb eigenvalues at the sqrt(eps) level.
      for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-6);
      for (double v : want) {
        const double k = v - alpha;
        EXPECT_NEAR(k, std::round(k), 1e-12);
        EXPECT_TRUE(in_shift_set(n, std::lround(k)));
      }
    }
  }
}

TEST(LimitingOperator, TwoDimensionalSpectrumOnHalfIntegers) {
  for (double v : assemble_A(2, 0.5, 4).spectrum()) EXPECT_NEAR(v - 0.5, std::round(v - 0.5), 1e-14);
}

TEST(Coupling, ZeroAndConstant) {
  std::mt19937_64 rng(1);
  const SphereField f = random_field(rng, 3, 3);
  const RescaledState z{0.0, 0.5, f, random_field(rng, 3, 3)};
  const CouplingMap b0 = assemble_B(-1.3, PotentialSpec::zero(), 3, 3);
  const RescaledState y0 = b0.apply(z);
  EXPECT_EQ(y0.f.coeffs().norm() + y0.g.coeffs().norm(), 0.0);
  const CouplingMap bc = assemble_B(0.0, PotentialSpec::constant(2.5), 3, 3);
  const RescaledState yc = bc.apply(z);
  EXPECT_EQ(yc.f.coeffs().norm(), 0.0);
  EXPECT_LT((yc.g.coeffs() - 2.5 * f.coeffs()).norm(), 1e-13);
}

TEST(Coupling, NormScalesLikeExpTwoTau) {
  const PotentialSpec c = PotentialSpec::constant(-3.0);
  for (double tau : {-1.0, -2.0, -4.0})
    EXPECT_NEAR(assemble_B(tau, c, 3, 4).norm(), 3.0 * std::exp(2 * tau), 1e-13);
  // Non-radial potential: ratio bounded by a single constant.
  const PotentialSpec v = PotentialSpec::general(
      [](double t, const SpherePoint& p) { return Eigen::MatrixXd::Constant(1, 1, 1.0 + t * std::cos(p.theta)); });
  double worst = 0.0;
  for (double tau : {-1.0, -2.0, -4.0}) worst = std::max(worst, assemble_B(tau, v, 3, 4).norm() / std::exp(2 * tau));
  EXPECT_LT(worst, 2.0 + 1e-9);
}

TEST(Coupling, GalerkinMatchesPointwiseProduct) {
  std::mt19937_64 rng(2);
  auto Vfn = [](double t, const SpherePoint& p) {
    const auto x = p.cartesian();
    return Eigen::MatrixXd::Constant(1, 1, t * (x[0] * x[1] + 0.3 * x[2]) + 1.0);
  };
  const SesOperator op(3, 0.5, 4, PotentialSpec::general(Vfn));
  const SphereField f = random_field(rng, 3, 4);
  const double tau = -0.4, t = std::exp(tau);
  const SphereField direct =
      project_pointwise_product([&](const SpherePoint& p) { return Vfn(t, p); }, f, 4);
  const RescaledState z{tau, 0.5, f, SphereField(3, 4)};
  EXPECT_LT((op.coupling(tau).apply(z).g.coeffs() - std::exp(2 * tau) * direct.coeffs()).norm(), 1e-12);
  EXPECT_LT((op.multiply_potential(t, f.coeffs()) - direct.coeffs()).norm(), 1e-12);
}

TEST(Coupling, GeneratorAgreesWithBlockForm) {
  const PotentialSpec v = PotentialSpec::radial_polynomial({1.0, 0.0, 2.0});
  const SesOperator op(3, 0.5, 3, v);
  const Eigen::MatrixXd G = op.generator(-0.7);
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(op.state_dim(), 3), dX;
  op.apply_generator(-0.7, X, dX);
  EXPECT_LT((dX - G * X).norm(), 1e-12);
  const Eigen::MatrixXd b = op.block_generator(2, -0.7);
  const Eigen::Index h = op.limiting().half_dim();
  const int k = mode_position(3, {2, 1});
  EXPECT_NEAR(b(1, 0), G(h + k, k), 1e-14);
  EXPECT_NEAR(b(0, 1), G(k, h + k), 1e-14);
  EXPECT_NEAR(b(1, 1), G(h + k, h + k), 1e-14);
}

TEST(Rescaling, Examples) {
  std::mt19937_64 rng(3);
  const SphereField f = random_field(rng, 3, 2), g = random_field(rng, 3, 2);
  const RescaledState a = rescale_forward({1.0, f, g}, 0.7);
  EXPECT_EQ(a.tau, 0.0);
  EXPECT_EQ((a.f.coeffs() - f.coeffs()).norm(), 0.0);
  EXPECT_EQ((a.g.coeffs() - g.coeffs()).norm(), 0.0);
  const SphereField y = SphereField::basis(3, 2, {0, 0});
  const RescaledState b = rescale_forward({std::exp(-1.0), y, SphereField(3, 2)}, 0.5);
  EXPECT_NEAR(b.f({0, 0}).real(), std::exp(-0.5), 1e-15);
  EXPECT_THROW(rescale_forward({0.0, f, g}, 0.5), Error);
  EXPECT_THROW(rescale_forward({-1.0, f, g}, 0.5), Error);
}

TEST(Rescaling, RoundTripProperty) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.05, 3.0), a(-2.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const TraceState x{u(rng), random_field(rng, trial % 2 ? 2 : 3, 3), SphereField()};
    const TraceState xx{x.t, x.f, 0.5 * x.f};
    const TraceState back = rescale_inverse(rescale_forward(xx, a(rng)));
    EXPECT_NEAR(back.t, xx.t, 1e-14 * xx.t);
    EXPECT_LT((back.f.coeffs() - xx.f.coeffs()).norm(), 1e-14 * xx.f.coeffs().norm());
    EXPECT_LT((back.g.coeffs() - xx.g.coeffs()).norm(), 1e-14 * xx.g.coeffs().norm());
  }
}

TEST(SesResidual, HarmonicTraceIsSmall) {
  std::vector<TraceState> traj;
  for (int i = 0; i <= 1000; ++i) traj.push_back(harmonic(1, 0, +1, 0.5 + 1e-3 * i, 2));
  EXPECT_LT(ses_residual(traj, PotentialSpec::zero()), 1e-6);
  std::vector<TraceState> inner;
  for (int i = 0; i <= 1000; ++i) inner.push_back(harmonic(2, -1, -1, 0.5 + 1e-3 * i, 2));
  EXPECT_LT(ses_residual(inner, PotentialSpec::zero(), {}, 4), 1e-6);
}

TEST(SesResidual, ConstantSolutionIsExact) {
  std::vector<TraceState> traj;
  for (int i = 0; i < 20; ++i)
    traj.push_back({0.3 + 0.1 * i, SphereField::basis(3, 1, {0, 0}), SphereField(3, 1)});
  EXPECT_LT(ses_residual(traj, PotentialSpec::zero()), 1e-14);
}

TEST(SesResidual, RandomDataIsLarge) {
  std::mt19937_64 rng(5);
  std::vector<TraceState> traj;
  for (int i = 0; i < 30; ++i) traj.push_back({0.5 + 0.01 * i, random_field(rng, 3, 2), random_field(rng, 3, 2)});
  EXPECT_GT(ses_residual(traj, PotentialSpec::zero()), 0.1);
}

TEST(SesResidual, ScaleInvariance) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  std::vector<TraceState> traj;
  for (int i = 0; i <= 200; ++i) traj.push_back(harmonic(3, 1, +1, 0.6 + 2e-3 * i, 3));
  const double base = ses_residual(traj, PotentialSpec::zero());
  for (int trial = 0; trial < 10; ++trial) {
    const cplx c(u(rng), u(rng));
    std::vector<TraceState> scaled = traj;
    for (auto& s : scaled) {
      s.f *= c;
      s.g *= c;
    }
    EXPECT_NEAR(ses_residual(scaled, PotentialSpec::zero()), base, 1e-6 * base);
  }
}

TEST(SesResidual, RejectsShortTrajectories) {
  std::vector<TraceState> traj{harmonic(0, 0, 1, 1.0, 0), harmonic(0, 0, 1, 1.1, 0)};
  EXPECT_THROW(ses_residual(traj, PotentialSpec::zero()), Error);
}

TEST(RsesResidual, HigherOrderStencilsConverge) {
  // Rescaled harmonic: f~ = e^{(alpha+l) tau} Y, g~ = l f~.
  const double alpha = 0.5;
  const int l = 3;
  auto sample = [&](double h) {
    std::vector<RescaledState> traj;
    for (int i = 0; i <= 40; ++i) {
      const double tau = -1.0 + h * i;
      const SphereField y = std::exp((alpha + l) * tau) * SphereField::basis(3, l, {l, 0});
      traj.push_back({tau, alpha, y, static_cast<double>(l) * y});
    }
    return traj;
  };
  for (int order : {2, 4, 6}) {
    const double r1 = rses_residual(sample(0.02), PotentialSpec::zero(), {}, order);
    const double r2 = rses_residual(sample(0.01), PotentialSpec::zero(), {}, order);
    EXPECT_NEAR(std::log2(r1 / r2), order, 0.3) << "order " << order;
  }
}

TEST(Adjoint, TransformExamples) {
  std::mt19937_64 rng(7);
  const SphereField f = random_field(rng, 3, 2), g = random_field(rng, 3, 2);
  const RescaledState a = adjoint_transform({1.0, f, g}, 0.5);
  EXPECT_LT((a.f.coeffs() + g.coeffs()).norm(), 1e-15);
  EXPECT_LT((a.g.coeffs() - f.coeffs()).norm(), 1e-15);
  const RescaledState z = adjoint_transform({0.7, SphereField(3, 2), SphereField(3, 2)}, 0.5);
  EXPECT_EQ(z.f.coeffs().norm() + z.g.coeffs().norm(), 0.0);
}

TEST(Adjoint, TransformedHarmonicSolvesAdjointSystem) {
  for (int sign : {+1, -1}) {
    std::vector<RescaledState> traj;
    for (int i = 0; i <= 4000; ++i) {
      const double tau = -0.5 + 2.5e-4 * i;
      traj.push_back(adjoint_transform(harmonic(2, 0, sign, std::exp(tau), 2), 0.5));
    }
    EXPECT_LT(adjoint_residual(traj, PotentialSpec::zero()), 1e-6);
  }
}

TEST(Adjoint, TransformedPotentialSolution) {
  // u = j_0-type solution of Laplacian u = -k^2 u, i.e. V = -k^2: u = sin(k r)/r.
  const double k = 2.0;
  std::vector<RescaledState> traj;
  for (int i = 0; i <= 4000; ++i) {
    const double tau = -0.5 + 2.5e-4 * i, t = std::exp(tau);
    const SphereField y = SphereField::basis(3, 0, {0, 0});
    const double u = std::sin(k * t) / t, du = k * std::cos(k * t) / t - std::sin(k * t) / (t * t);
    traj.push_back(adjoint_transform({t, u * y, du * y}, 0.5));
  }
  EXPECT_LT(adjoint_residual(traj, PotentialSpec::constant(-k * k)), 1e-6);
}

TEST(Wronskian, HarmonicPair) {
  for (int l = 0; l <= 5; ++l)
    for (double t : {0.2, 1.0, 3.0}) {
      const cplx w = wronskian(harmonic(l, 0, +1, t, 5), harmonic(l, 0, -1, t, 5));
      EXPECT_NEAR(w.real(), -(2.0 * l + 1.0), 1e-12 * (2 * l + 1));
      EXPECT_NEAR(w.imag(), 0.0, 1e-14);
    }
}

TEST(Wronskian, Antisymmetry) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const TraceState x{0.8, random_field(rng, 3, 3), random_field(rng, 3, 3)};
    const TraceState y{0.8, random_field(rng, 3, 3), random_field(rng, 3, 3)};
    // Hermitian pairing: W(x, y) = -conj(W(y, x)), so W(x, x) is imaginary.
    EXPECT_NEAR(wronskian(x, x).real(), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(wronskian(x, y) + std::conj(wronskian(y, x))), 0.0, 1e-12);
  }
  const TraceState r{0.8, SphereField::basis(3, 1, {1, 0}), 2.0 * SphereField::basis(3, 1, {1, 0})};
  EXPECT_EQ(std::abs(wronskian(r, r)), 0.0);
  EXPECT_THROW(wronskian(r, TraceState{0.9, r.f, r.g}), Error);
}

TEST(Wronskian, ConservedAlongIntegratedSolutions) {
  // V = t^2, degree l = 1, two independent solutions integrated from t = e^{-5}.
  const int l = 1;
  const double lam = lb_eigenvalue(3, l);
  auto rhs = [&](double t, const Eigen::MatrixXd& X, Eigen::MatrixXd& dX) {
    dX.resize(2, X.cols());
    dX.row(0) = X.row(1);
    dX.row(1) = (t * t + lam / (t * t)) * X.row(0) - (2.0 / t) * X.row(1);
  };
  Eigen::MatrixXd X(2, 2);
  const double t0 = std::exp(-5.0);
  X << t0, 1.0 / (t0 * t0), 1.0, -2.0 / (t0 * t0 * t0);
  auto w_of = [&](double t) {
    const SphereField y = SphereField::basis(3, 1, {1, 0});
    const TraceState a{t, X(0, 0) * y, X(1, 0) * y}, b{t, X(0, 1) * y, X(1, 1) * y};
    return wronskian(a, b).real();
  };
  const double w0 = w_of(t0);
  double drift = 0.0, t = t0;
  for (int k = 1; k <= 50; ++k) {
    const double next = std::exp(-5.0 + 0.1 * k);
    integrate_dopri5(rhs, X, t, next, {1e-13, 1e-300});
    t = next;
    drift = std::max(drift, std::abs(w_of(t) - w0) / std::abs(w0));
  }
  EXPECT_LT(drift, 1e-8);
}

TEST(Resolvent, InvertsShiftedOperator) {
  std::mt19937_64 rng(9);
  const double alpha = 0.5, mu = 3.3;
  const ResolventA r = resolvent_A(mu, 3, alpha, 4);
  const LimitingOperator a = assemble_A(3, alpha, 4);
  const RescaledState z{0.0, alpha, random_field(rng, 3, 4), random_field(rng, 3, 4)};
  const RescaledState y = r.apply(z);
  const Eigen::VectorXcd back = a.dense().cast<cplx>() * to_vector(y) - cplx(0, mu) * to_vector(y);
  EXPECT_LT((back - to_vector(z)).norm(), 1e-12 * to_vector(z).norm());
}

TEST(Resolvent, FreeBlockClosedForm) {
  for (double mu : {0.5, 2.0, 17.0})
    for (int l = 0; l <= 4; ++l) {
      const double lam = lb_eigenvalue(3, l);
      Eigen::Matrix2cd m;
      m << cplx(0, -mu), 1.0, lam, cplx(0, -mu);
      const Eigen::Matrix2cd inv = m.inverse();
      EXPECT_LT((a0_resolvent_block(mu, lam) - inv).norm(), 1e-14);
      EXPECT_NEAR(std::abs(a0_resolvent_block(mu, lam)(0, 1) - 1.0 / (lam + mu * mu)), 0.0, 1e-15);
    }
}

TEST(Resolvent, NormDecaysLikeInverseMu) {
  std::vector<double> norms;
  const std::vector<double> mus{1.0, 10.0, 100.0};
  for (double mu : mus) norms.push_back(resolvent_A(mu, 3, 0.5, 16).norm());
  // |mu| ||R(mu)|| stays within a factor 2.
  std::vector<double> scaled;
  for (std::size_t i = 0; i < mus.size(); ++i) scaled.push_back(norms[i] * mus[i]);
  const auto [lo, hi] = std::minmax_element(scaled.begin(), scaled.end());
  EXPECT_LE(*hi / *lo, 2.0);
  // C fitted at mu = 1 bounds the larger frequencies by C / (1 + |mu|).
  const double C = norms[0] * 2.0;
  for (std::size_t i = 1; i < mus.size(); ++i) EXPECT_LE(norms[i], C / (1.0 + mus[i]));
}

TEST(Resolvent, RejectsForbiddenAlpha) { EXPECT_THROW(resolvent_A(1.0, 3, 1.0, 2), Error); }
