#include <nscov/kernels.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace nscov;

TEST(Kernels, SpatialZeroLagIsVariance) {
  EXPECT_DOUBLE_EQ(eval_spatial(SpatialKernel(0.02, 1.0, 1.0), 0.0), 1.0);
  EXPECT_DOUBLE_EQ(eval_spatial(SpatialKernel(5.0, 2.5, 0.5), 0.0), 2.5);
}

TEST(Kernels, SpatialAtRangeIsInverseE) {
  EXPECT_NEAR(eval_spatial(SpatialKernel(0.02, 1.0, 1.0), 0.02), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(eval_spatial(SpatialKernel(0.02, 1.0, 1.0), 0.02), 0.3679, 5e-5);
  // exponential form matches exp(-h/rho) exactly at h = rho for several ranges
  for (double rho : {0.02, 1.0, 37.5, 500.0})
    EXPECT_EQ(eval_spatial(SpatialKernel(rho), rho), std::exp(-1.0));
}

TEST(Kernels, ExampleCurveSecondKernel) {
  // exp(-0.25 / 0.5)
  EXPECT_NEAR(eval_spatial(SpatialKernel(0.50), 0.25), 0.6065306597, 1e-9);
}

TEST(Kernels, PoweredExponential) {
  const SpatialKernel k(2.0, 3.0, 1.5);
  EXPECT_EQ(k.family(), KernelFamily::PoweredExponential);
  EXPECT_NEAR(k(1.0), 3.0 * std::exp(-std::pow(0.5, 1.5)), 1e-14);
  EXPECT_NEAR(k.rate(), std::pow(2.0, -1.5), 1e-15);
}

TEST(Kernels, NegativeDistanceIsDomainError) {
  EXPECT_THROW(eval_spatial(SpatialKernel(1.0), -1e-9), DomainError);
}

TEST(Kernels, InvalidParameters) {
  EXPECT_THROW(SpatialKernel(0.0), ArgumentError);
  EXPECT_THROW(SpatialKernel(1.0, -1.0), ArgumentError);
  EXPECT_THROW(SpatialKernel(1.0, 1.0, 2.5), ArgumentError);
  EXPECT_THROW(SpatialKernel(1.0, 1.0, 0.0), ArgumentError);
  EXPECT_THROW(SpatialKernel(KernelFamily::Exponential, 1.0, 1.0, 0.5), ArgumentError);
  EXPECT_THROW(SpaceTimeKernel(SpatialKernel(1.0), 1.0), ArgumentError);
  EXPECT_THROW(SpaceTimeKernel(SpatialKernel(1.0), 0.0), ArgumentError);
}

TEST(Kernels, SpaceTimeSeparable) {
  // spatial value 0.8 at h_s = rho * ln(1/0.8)
  const double rho = 10.0;
  const double hs = rho * std::log(1.0 / 0.8);
  const SpaceTimeKernel k(SpatialKernel(rho), 0.5);
  EXPECT_NEAR(eval_spacetime(k, hs, 0), 0.8, 1e-14);
  EXPECT_NEAR(eval_spacetime(k, hs, 2), 0.2, 1e-14);
  EXPECT_NEAR(eval_spacetime(k, hs, -2), 0.2, 1e-14);
  EXPECT_EQ(eval_spacetime(k, hs, 0), eval_spatial(k.spatial(), hs));
}

TEST(Kernels, SpaceTimeProductOfFactors) {
  const SpaceTimeKernel k(SpatialKernel(100.0), 0.9);
  EXPECT_NEAR(eval_spacetime(k, 100.0, 1), std::exp(-1.0) * 0.9, 1e-15);
  EXPECT_NEAR(eval_spacetime(k, 100.0, 1), 0.3311, 5e-5);
}

TEST(Kernels, MonotoneAndBoundedProperty) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> range(0.01, 100.0), kap(0.05, 2.0), tau(0.1, 5.0),
      dec(0.01, 0.99);
  for (int rep = 0; rep < 200; ++rep) {
    const SpatialKernel k(range(rng), tau(rng), kap(rng));
    const SpaceTimeKernel st(k, dec(rng));
    double prev = k(0.0);
    for (int i = 1; i <= 400; ++i) {
      const double h = 5.0 * k.range() * i / 400.0;
      const double v = k(h);
      ASSERT_LE(v, prev);
      ASSERT_GE(v, 0.0);
      prev = v;
      for (long lag : {0L, 1L, -3L, 7L})
        ASSERT_LE(st(h, lag), st(0.0, 0));
    }
  }
}

TEST(Monotonicity, ZeroAlphaAlwaysMonotone) {
  const std::vector<SpatialKernel> ks{SpatialKernel(0.02), SpatialKernel(0.5, 2.0, 0.3),
                                      SpatialKernel(3.0, 1.0, 1.9)};
  const std::vector<Eigen::VectorXd> alphas(3, Eigen::VectorXd::Zero(2));
  const Eigen::VectorXd bound = Eigen::Vector2d(10.0, 1e6);
  const auto report = check_monotone_sufficient(ks, alphas, bound, default_monotonicity_grid(ks));
  EXPECT_TRUE(report.monotone);
  EXPECT_FALSE(report.first_violation.has_value());
}

TEST(Monotonicity, ExponentialViolation) {
  // rate = 1 / 0.02 = 50 with kappa = 1; elasticity bound 100 > 50 at every h
  const std::vector<SpatialKernel> ks{SpatialKernel(0.02)};
  const std::vector<Eigen::VectorXd> alphas{Eigen::VectorXd::Constant(1, 2.0)};
  const Eigen::VectorXd bound = Eigen::VectorXd::Constant(1, 50.0);
  const auto grid = default_monotonicity_grid(ks);
  ASSERT_EQ(grid.size(), 200u);
  const auto report = check_monotone_sufficient(ks, alphas, bound, grid);
  EXPECT_FALSE(report.monotone);
  ASSERT_TRUE(report.first_violation.has_value());
  EXPECT_EQ(report.first_violation->component, 0u);
  EXPECT_DOUBLE_EQ(report.first_violation->h, grid.front());
  for (double h : grid) {
    const auto single = check_monotone_sufficient(ks, alphas, bound, {h});
    EXPECT_FALSE(single.monotone);
  }
}

TEST(Monotonicity, ExponentialSatisfied) {
  const std::vector<SpatialKernel> ks{SpatialKernel(0.02)};
  const std::vector<Eigen::VectorXd> alphas{Eigen::VectorXd::Constant(1, 0.2)};
  const Eigen::VectorXd bound = Eigen::VectorXd::Constant(1, 50.0); // 10 < 50
  EXPECT_TRUE(check_monotone_sufficient(ks, alphas, bound, default_monotonicity_grid(ks)).monotone);
}

TEST(Monotonicity, PoweredExponentialFailsNearOrigin) {
  // kappa < 1: the decay rate kappa * rate * h^(kappa - 1) is unbounded as
  // h -> 0 but falls below any positive elasticity at large h.
  const std::vector<SpatialKernel> ks{SpatialKernel(1.0, 1.0, 0.5)};
  const std::vector<Eigen::VectorXd> alphas{Eigen::VectorXd::Constant(1, 1.0)};
  const Eigen::VectorXd bound = Eigen::VectorXd::Constant(1, 1.0);
  const auto report = check_monotone_sufficient(ks, alphas, bound, default_monotonicity_grid(ks));
  EXPECT_FALSE(report.monotone);
  // 0.5 * h^-0.5 < 1  <=>  h > 0.25
  EXPECT_GT(report.first_violation->h, 0.25);
}

TEST(Monotonicity, EmptyGridRejected) {
  EXPECT_THROW(check_monotone_sufficient({SpatialKernel(1.0)}, {Eigen::VectorXd::Zero(1)},
                                         Eigen::VectorXd::Zero(1), {}),
               ArgumentError);
}
