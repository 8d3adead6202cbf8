#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "raddich/eigen_detector.hpp"
#include "raddich/oracles.hpp"

using namespace raddich;

namespace {

const double kPi = std::numbers::pi;

// Normalized f-component of the regular solution j_l(k r) in weighted,
// rescaled coordinates; t^alpha cancels in the normalization.
double bessel_block_det(int l, double lambda, double t) {
  const double x = std::sqrt(lambda) * t;
  const double lam = l * (l + 1.0);
  const double wf = std::pow(1.0 + lam, 0.25), wg = std::pow(1.0 + lam, -0.25);
  const double f = spherical_bessel(l, x), g = x * spherical_bessel_derivative(l, x);
  return wf * f / std::hypot(wf * f, wg * g);
}

}  // namespace

TEST(Evans, BlockDeterminantMatchesBesselOracle) {
  for (int l = 0; l <= 3; ++l)
    for (double lambda : {0.5, 3.0, 9.0, 17.0, 30.0})
      for (double t : {1.0, 0.6}) {
        const std::vector<double> d = evans_blocks(lambda, PotentialSpec::zero(), t, 3, 3);
        EXPECT_NEAR(d[static_cast<std::size_t>(l)], bessel_block_det(l, lambda, t), 1e-8)
            << "l=" << l << " lambda=" << lambda << " t=" << t;
      }
}

TEST(Evans, VanishesAtFirstDirichletEigenvalue) {
  const double d1 = evans_determinant(1.0, PotentialSpec::zero(), 1.0, 3, 2);
  const double dpi = evans_determinant(kPi * kPi, PotentialSpec::zero(), 1.0, 3, 2);
  EXPECT_GT(std::abs(d1), 1e-3);
  EXPECT_LT(std::abs(dpi), 1e-9);
}

TEST(Evans, NonzeroBelowFirstEigenvalue) {
  for (int l = 0; l <= 6; ++l) EXPECT_GT(std::abs(spherical_bessel(l, 1.0)), 1e-8);
  const std::vector<double> d = evans_blocks(1.0, PotentialSpec::zero(), 1.0, 3, 6);
  for (double v : d) EXPECT_GT(std::abs(v), 1e-3);
}

TEST(Evans, ProductOverDegrees) {
  const std::vector<double> d = evans_blocks(5.0, PotentialSpec::zero(), 1.0, 3, 2);
  const double p = d[0] * std::pow(d[1], 3) * std::pow(d[2], 5);
  EXPECT_NEAR(evans_determinant(5.0, PotentialSpec::zero(), 1.0, 3, 2), p, 1e-14);
}

TEST(Evans, SpectralShiftInvariance) {
  const double c = 2.5;
  const PotentialSpec V = PotentialSpec::radial_polynomial({1.0, 0.0, 2.0});
  for (double lambda : {3.0, 12.0}) {
    const double a = evans_determinant(lambda, V, 1.0, 3, 2);
    const double b = evans_determinant(lambda - c, V.shifted(c), 1.0, 3, 2);
    EXPECT_NEAR(a, b, 1e-12);
  }
}

TEST(Evans, AlphaOutsideTraceWindow) {
  EvansOptions o;
  o.alpha = 1.0;
  EXPECT_THROW(evans_determinant(1.0, PotentialSpec::zero(), 1.0, 3, 1, o), Error);
  o.alpha = 1.5;
  EXPECT_THROW(evans_determinant(1.0, PotentialSpec::zero(), 1.0, 3, 1, o), Error);
  o.alpha = 0.5;
  EXPECT_THROW(evans_determinant(1.0, PotentialSpec::zero(), 1.0, 2, 1, o), Error);
  EXPECT_THROW(evans_determinant(1.0, PotentialSpec::zero(), -1.0, 3, 1, o), Error);
}

TEST(Scan, BesselZeroSquaresWithMultiplicities) {
  const EigenScanResult r = scan_eigenvalues(PotentialSpec::zero(), 1.0, 3, 4, 1.0, 35.0, 68);
  ASSERT_EQ(r.eigenvalues.size(), 3u);
  for (int l = 0; l <= 2; ++l) {
    const double z = bessel_zero(l, 1);
    const EigenRoot& root = r.eigenvalues[static_cast<std::size_t>(l)];
    EXPECT_NEAR(root.lambda, z * z, 1e-6);
    EXPECT_EQ(root.multiplicity, 2 * l + 1);
    EXPECT_EQ(root.l, l);
  }
  EXPECT_NEAR(r.eigenvalues[0].lambda, 9.8696044, 1e-6);
  EXPECT_NEAR(r.eigenvalues[1].lambda, 20.190729, 1e-6);
  EXPECT_NEAR(r.eigenvalues[2].lambda, 33.217462, 1e-6);
}

TEST(Scan, EveryRootInWiderRangeIsABesselZero) {
  ScanOptions o;
  o.refine_tol = 1e-9;
  const EigenScanResult r = scan_eigenvalues(PotentialSpec::zero(), 1.0, 3, 5, 1.0, 60.0, 120, o);
  int expected = 0;
  for (int l = 0; l <= 5; ++l)
    for (int k = 1; k <= 3; ++k) {
      const double z = bessel_zero(l, k);
      if (z * z > 1.0 && z * z < 60.0) ++expected;
    }
  EXPECT_EQ(static_cast<int>(r.eigenvalues.size()), expected);
  for (const auto& root : r.eigenvalues) {
    double best = 1e300;
    for (int k = 1; k <= 3; ++k) {
      const double z = bessel_zero(root.l, k);
      best = std::min(best, std::abs(z * z - root.lambda));
    }
    EXPECT_LT(best, 10 * o.refine_tol) << "lambda=" << root.lambda;
    EXPECT_EQ(root.multiplicity, 2 * root.l + 1);
  }
}

TEST(Scan, ConstantPotentialShiftsSpectrum) {
  const EigenScanResult a = scan_eigenvalues(PotentialSpec::zero(), 1.0, 3, 2, 1.0, 35.0, 40);
  const EigenScanResult b = scan_eigenvalues(PotentialSpec::constant(3.0), 1.0, 3, 2, 4.0, 38.0, 40);
  ASSERT_EQ(a.eigenvalues.size(), b.eigenvalues.size());
  for (std::size_t i = 0; i < a.eigenvalues.size(); ++i)
    EXPECT_NEAR(b.eigenvalues[i].lambda, a.eigenvalues[i].lambda + 3.0, 1e-8);
}

TEST(Scan, DirichletScalingWithRadius) {
  const EigenScanResult a = scan_eigenvalues(PotentialSpec::zero(), 1.0, 3, 1, 1.0, 25.0, 30);
  const EigenScanResult b = scan_eigenvalues(PotentialSpec::zero(), 0.5, 3, 1, 4.0, 100.0, 60);
  ASSERT_EQ(a.eigenvalues.size(), 2u);
  ASSERT_EQ(b.eigenvalues.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(b.eigenvalues[i].lambda, 4.0 * a.eigenvalues[i].lambda, 1e-7);
}

TEST(Scan, RootsIndependentOfAlpha) {
  ScanOptions o3, o9;
  o3.evans.alpha = 0.3;
  o9.evans.alpha = 0.9;
  const EigenScanResult a = scan_eigenvalues(PotentialSpec::zero(), 1.0, 3, 2, 1.0, 35.0, 40, o3);
  const EigenScanResult b = scan_eigenvalues(PotentialSpec::zero(), 1.0, 3, 2, 1.0, 35.0, 40, o9);
  ASSERT_EQ(a.eigenvalues.size(), b.eigenvalues.size());
  for (std::size_t i = 0; i < a.eigenvalues.size(); ++i)
    EXPECT_LT(std::abs(a.eigenvalues[i].lambda - b.eigenvalues[i].lambda), o3.refine_tol);
}

TEST(Scan, SmallerBallHasLargerEigenvalues) {
  const EigenScanResult a = scan_eigenvalues(PotentialSpec::zero(), 1.0, 3, 2, 1.0, 40.0, 40);
  const EigenScanResult b = scan_eigenvalues(PotentialSpec::zero(), 0.8, 3, 2, 1.0, 80.0, 80);
  ASSERT_GE(b.eigenvalues.size(), a.eigenvalues.size());
  for (std::size_t i = 0; i < a.eigenvalues.size(); ++i) EXPECT_GT(b.eigenvalues[i].lambda, a.eigenvalues[i].lambda);
}

TEST(Scan, EndpointRootRejected) {
  EXPECT_THROW(scan_eigenvalues(PotentialSpec::zero(), 1.0, 3, 1, kPi * kPi, 15.0, 10), Error);
  EXPECT_THROW(scan_eigenvalues(PotentialSpec::zero(), 1.0, 3, 1, 5.0, 5.0, 10), Error);
  EXPECT_THROW(scan_eigenvalues(PotentialSpec::zero(), 1.0, 3, 1, 1.0, 5.0, 1), Error);
}

TEST(Scan, SamplesCarryBlocksAndBrackets) {
  const EigenScanResult r = scan_eigenvalues(PotentialSpec::zero(), 1.0, 3, 1, 1.0, 25.0, 24);
  EXPECT_EQ(r.samples.size(), 2u * 25u);
  int opened = 0;
  for (const auto& s : r.samples) {
    EXPECT_TRUE(s.block_l == 0 || s.block_l == 1);
    if (s.bracket_id >= 0) ++opened;
  }
  EXPECT_EQ(opened, 2);
}

TEST(Scan, CoupledPathMatchesRadialPath) {
  const PotentialSpec g = PotentialSpec::general(
      [](double, const SpherePoint&) { return Eigen::MatrixXd::Constant(1, 1, 2.0); }, 1, "constant as general");
  const EigenScanResult r = scan_eigenvalues(g, 1.0, 3, 2, 5.0, 25.0, 40);
  ASSERT_EQ(r.eigenvalues.size(), 2u);
  const double z0 = bessel_zero(0, 1), z1 = bessel_zero(1, 1);
  EXPECT_NEAR(r.eigenvalues[0].lambda, z0 * z0 + 2.0, 1e-7);
  EXPECT_EQ(r.eigenvalues[0].multiplicity, 1);
  EXPECT_NEAR(r.eigenvalues[1].lambda, z1 * z1 + 2.0, 1e-7);
  EXPECT_EQ(r.eigenvalues[1].multiplicity, 3);
  EXPECT_EQ(r.eigenvalues[1].l, -1);
}

TEST(Intersection, Examples) {
  const BoundarySubspace D = dirichlet_subspace();
  SubspaceFrame empty{0.0, Flavor::unstable, 3, 2, 1, 0.5, 0.0, Eigen::MatrixXd(18, 0)};
  EXPECT_EQ(intersection_dimension(empty, D, 1e-8), 0);

  const SubspaceFrame free = unstable_frame_at(0.0, PotentialSpec::zero(), 1.0, 3, 2);
  EXPECT_EQ(intersection_dimension(free, D, 1e-6), 0);

  const SubspaceFrame at_root = unstable_frame_at(kPi * kPi, PotentialSpec::zero(), 1.0, 3, 2);
  EXPECT_EQ(intersection_dimension(at_root, D, 1e-6), 1);

  // A frame holding the trace of j_0(pi r) Y_0^0 at t = 1.
  const ExactSolution b = bessel_solution({0, 0}, kPi * kPi, 2);
  const RescaledState z = b.rescaled(0.0, 0.5);
  SubspaceFrame fr{0.0, Flavor::unstable, 3, 2, 1, 0.5, 0.0, to_vector(z).real()};
  fr.vectors /= (state_weights(3, 2, 1).asDiagonal() * fr.vectors).norm();
  EXPECT_GE(intersection_dimension(fr, D, 1e-8), 1);
}

TEST(Intersection, MembershipOfTraces) {
  const BoundarySubspace D = dirichlet_subspace();
  const ManufacturedProblem p = manufactured_problem("cubic-forced", 3, 2);
  EXPECT_TRUE(D.contains(p.exact.trace(1.0), 1e-14));
  EXPECT_FALSE(D.contains(p.exact.trace(0.5), 1e-3));
  EXPECT_EQ(BoundarySubspace::whole().constraint(4).rows(), 0);
  EXPECT_EQ(BoundarySubspace::neumann().membership(harmonic_trace({0, 0}, HarmonicBranch::growing, 1.0)), 0.0);
}
