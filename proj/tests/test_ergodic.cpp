#include "oracles.hpp"
#include "rds/ergodic.hpp"
#include "rds/systems.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rds;

namespace {

CenteredCocycle hyperbolic_cocycle(std::uint64_t seed, double l1 = 1.0, double l2 = -1.0, double window = 80.0) {
  const auto p = NoisePath::sample(seed, 2, window, 0.01);
  const auto Y = hyperbolic2d_stationary(p, l1, l2, Matrix::Identity(2, 2), 30.0, Quadrature::EulerConsistent);
  return CenteredCocycle::create(make_hyperbolic2d(l1, l2), p, Y);
}

}  // namespace

TEST(CenteredCocycle, ZeroIsFixedAndIdentityAtTimeZero) {
  const auto Z = hyperbolic_cocycle(1);
  const Vector x = (Vector(2) << 0.3, -0.1).finished();
  EXPECT_EQ(Z.evaluate(0, x), x);
  EXPECT_LE(Z.evaluate(300, Vector::Zero(2)).norm(), 1e-9);
  EXPECT_LE(Z.evaluate(-300, Vector::Zero(2)).norm(), 1e-9);
  EXPECT_LE(Z.residual(), 1e-11);
}

TEST(CenteredCocycle, LinearSystemActsByTangent) {
  // For a linear system Z(n, x) = D2Z(n) x exactly up to rounding.
  const auto Z = hyperbolic_cocycle(2);
  const Vector x = (Vector(2) << 0.2, 0.4).finished();
  EXPECT_LE((Z.evaluate(150, x) - Z.tangent(150, x) * x).norm(), 1e-10);
  EXPECT_NEAR(Z.tangent(100, x)(0, 0), std::pow(1.01, 100), 1e-9);
  EXPECT_NEAR(Z.tangent(-100, x)(1, 1), std::pow(0.99, -100), 1e-9);
}

TEST(CenteredCocycle, CocyclePropertyAcrossShifts) {
  const auto Z = hyperbolic_cocycle(3);
  const Vector x = (Vector(2) << 0.2, 0.4).finished();
  const Vector direct = Z.evaluate(250, x);
  const Vector composed = Z.evaluate(150, Z.evaluate(100, x), 100);
  EXPECT_LE((direct - composed).norm(), 1e-12);
  EXPECT_EQ(Z.shifted_nodes(100).evaluate(150, Z.evaluate(100, x)), composed);
}

TEST(CenteredCocycle, RejectsNonStationaryTrajectory) {
  const auto p = NoisePath::sample(1, 1, 20.0, 0.01);
  const auto Y = ou_stationary(p, 1.0, 10.0);
  EXPECT_THROW(CenteredCocycle::create(make_ou(3.0), p, Y), InvalidArgument);
}

TEST(Lyapunov, OuExponentIsDiscreteGrowthRate) {
  const auto p = NoisePath::sample(1, 1, 60.0, 0.01);
  const auto Z = CenteredCocycle::create(make_ou(1.0), p, ou_stationary(p, 1.0, 30.0, Quadrature::EulerConsistent));
  const auto s = lyapunov_spectrum(Z, 10.0);
  ASSERT_EQ(s.raw.size(), 1u);
  EXPECT_NEAR(s.raw[0], std::log1p(0.01) / 0.01, 1e-12);
  EXPECT_NEAR(backward_lyapunov_spectrum(Z, 10.0).raw[0], -std::log1p(0.01) / 0.01, 1e-12);
}

TEST(Lyapunov, Hyperbolic2dSpectrumAndLiouville) {
  const auto Z = hyperbolic_cocycle(4, 1.0, -1.0, 80.0);
  const auto s = lyapunov_spectrum(Z, 20.0, 1.0, 0.1);
  EXPECT_NEAR(s.raw[0], std::log(1.01) / 0.01, 1e-10);
  EXPECT_NEAR(s.raw[1], std::log(0.99) / 0.01, 1e-10);
  EXPECT_EQ(s.multiplicities, (std::vector<int>{1, 1}));
  EXPECT_NEAR(log_det_rate(Z, 20.0), s.raw[0] + s.raw[1], 1e-10);
  EXPECT_NEAR(trace_average(Z, 20.0, 7), 0.0, 1e-15);
}

TEST(Lyapunov, GbmExponentsMatchClosedForm) {
  // Ito GBM: lambda = mu - sigma^2 / 2; the Euler multiplier adds O(dt).
  const double sigma = 1.0;
  std::vector<double> ito;
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const auto p = NoisePath::sample(seed, 1, 60.0, 0.01);
    const auto Z = CenteredCocycle::create(make_gbm(sigma), p, fixed_point_stationary(make_gbm(sigma), p, Vector::Zero(1)));
    // oracle: sum of log|1 + sigma dW| over the blocks divided by T
    double direct = 0.0;
    for (long k = 0; k < 5000; ++k) direct += std::log(std::abs(1.0 + sigma * p.increment(0, k)));
    const auto s = lyapunov_spectrum(Z, 50.0);
    EXPECT_NEAR(s.raw[0], direct / 50.0, 1e-10);
    ito.push_back(s.raw[0]);
  }
  EXPECT_NEAR(oracle::mean(ito), -0.5, 0.15);
}

TEST(Lyapunov, ClusteringByTau) {
  const auto c = cluster_exponents({1.0, 0.95, -0.2, -1.0, -1.05}, 0.1);
  EXPECT_EQ(c.multiplicities, (std::vector<int>{2, 1, 2}));
  EXPECT_NEAR(c.exponents[0], 0.975, 1e-15);
  EXPECT_NEAR(c.exponents[2], -1.025, 1e-15);
}

TEST(Hyperbolicity, SentinelsForOneSidedSpectra) {
  auto all_positive = cluster_exponents({1.0, 0.5}, 0.1);
  const auto h = hyperbolicity_check(all_positive);
  EXPECT_TRUE(h.hyperbolic);
  EXPECT_EQ(h.lambda_i0, -std::numeric_limits<double>::infinity());
  EXPECT_DOUBLE_EQ(h.lambda_i0_minus_1, 0.5);
  EXPECT_EQ(h.stable_dim, 0);
  const auto mixed = hyperbolicity_check(cluster_exponents({1.0, -2.0}, 0.1));
  EXPECT_EQ(mixed.i0, 1);
  EXPECT_DOUBLE_EQ(mixed.lambda_i0, -2.0);
  EXPECT_FALSE(hyperbolicity_check(cluster_exponents({1.0, 0.05}, 0.01), 0.1).hyperbolic);
}

TEST(Oseledec, LinearDiagonalSplitsOnAxes) {
  const auto Z = hyperbolic_cocycle(5);
  const auto split = oseledec_subspaces(Z, 10.0);
  EXPECT_LE(subspace_distance(split.stable, Vector::Unit(2, 1)), 1e-12);
  EXPECT_LE(subspace_distance(split.unstable, Vector::Unit(2, 0)), 1e-12);
}

TEST(Oseledec, AmbiguousRatesRejected) {
  const auto p = NoisePath::sample(1, 2, 40.0, 0.01);
  // noise-free, so Y = 0 and only the weak contraction matters
  const SdeSystem sys = make_hyperbolic2d(1.0, -0.02, Matrix::Zero(2, 2));
  const auto Z = CenteredCocycle::create(sys, p, fixed_point_stationary(sys, p, Vector::Zero(2)));
  EXPECT_THROW(oseledec_subspaces(Z, 5.0, 0.1), NumericalError);
}

TEST(Angles, PrincipalAnglesAgainstTrigonometry) {
  const double a = 0.3;
  Matrix A = Vector::Unit(3, 0);
  Matrix B(3, 1);
  B << std::cos(a), std::sin(a), 0.0;
  EXPECT_NEAR(subspace_distance(A, B), a, 1e-14);
  Matrix P(3, 2), Q(3, 2);
  P << 1, 0, 0, 1, 0, 0;
  Q << 1, 0, 0, std::cos(a), 0, std::sin(a);
  EXPECT_NEAR(minimum_angle(P, Q), 0.0, 1e-14);
  EXPECT_NEAR(subspace_distance(P, Q), a, 1e-14);
  const Matrix O = orthonormal_basis((Matrix(3, 2) << 1, 1, 0, 1, 0, 0).finished());
  EXPECT_LE((O.transpose() * O - Matrix::Identity(2, 2)).norm(), 1e-14);
}

TEST(LogMoment, OuValueIsDeterministic) {
  // The tangent of OU is (1 + lambda dt)^n, so the sup over |t| <= T is n log(1 + lambda dt).
  const auto factory = [](std::uint64_t seed) {
    const auto p = NoisePath::sample(seed, 1, 40.0, 0.01);
    return CenteredCocycle::create(make_ou(), p, ou_stationary(p, 1.0, 20.0, Quadrature::EulerConsistent));
  };
  const auto m = log_moment_diagnostic(factory, 1.0, 30, 1, 25);
  EXPECT_TRUE(m.finite);
  EXPECT_NEAR(m.mean, 100.0 * std::log1p(0.01), 1e-10);
  EXPECT_NEAR(m.variance, 0.0, 1e-18);
  EXPECT_THROW(log_moment_diagnostic(factory, 1.0, 10), InvalidArgument);
}
