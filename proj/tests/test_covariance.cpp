#include <nscov/covariance.hpp>
#include <nscov/simulate.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace nscov;

namespace {

SpaceTimePoint point(double sx, double sy, long t, Eigen::VectorXd x) {
  SpaceTimePoint p;
  p.s = Eigen::RowVector2d(sx, sy);
  p.t = t;
  p.x = std::move(x);
  return p;
}

CovModel two_component(const Eigen::MatrixXd &alpha) {
  return CovModel({SpaceTimeKernel(SpatialKernel(50.0, 1.0), 0.3),
                   SpaceTimeKernel(SpatialKernel(300.0, 2.0), 0.8)},
                  WeightScheme::multinomial_logistic(alpha), SpatialKernel(150.0, 0.5), 0.25);
}

double corr(const Eigen::MatrixXd &c, Eigen::Index a, Eigen::Index b) {
  return c(a, b) / std::sqrt(c(a, a) * c(b, b));
}

} // namespace

TEST(Covariance, HandComputedTwoPoints) {
  Eigen::MatrixXd alpha(2, 2);
  alpha << 0.0, 0.0, 0.5, 1.0;
  const auto model = two_component(alpha);
  const auto p = point(0.0, 0.0, 3, Eigen::Vector2d(1.0, 0.2));
  const auto q = point(30.0, 40.0, 5, Eigen::Vector2d(1.0, -1.0));

  // independent arithmetic: softmax of (0, 0.5 + x2) at each point
  const auto w2 = [](double z) { return std::exp(z) / (1.0 + std::exp(z)); };
  const double p2 = w2(0.5 + 0.2), q2 = w2(0.5 - 1.0);
  const double k1 = 1.0 * std::exp(-50.0 / 50.0) * 0.3 * 0.3;
  const double k2 = 2.0 * std::exp(-50.0 / 300.0) * 0.8 * 0.8;
  const double expect = std::sqrt((1 - p2) * (1 - q2)) * k1 + std::sqrt(p2 * q2) * k2;
  EXPECT_NEAR(cov_mu(model, p, q), expect, 1e-14);
  EXPECT_NEAR(cov_mu(model, q, p), expect, 1e-14);

  const Eigen::MatrixXd c = build_cov_matrix(model, {p, q}, true, true);
  EXPECT_NEAR(c(0, 1), expect + 0.5 * std::exp(-50.0 / 150.0), 1e-14);
  EXPECT_NEAR(c(0, 0), (1 - p2) * 1.0 + p2 * 2.0 + 0.5 + 0.25, 1e-14);
}

TEST(Covariance, ZeroAlphaAveragesKernels) {
  const auto model = two_component(Eigen::MatrixXd::Zero(2, 3));
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int rep = 0; rep < 50; ++rep) {
    const auto p = point(n(rng) * 100, n(rng) * 100, 0, Eigen::Vector3d(1.0, n(rng), n(rng)));
    const auto q = point(n(rng) * 100, n(rng) * 100, rep % 4, Eigen::Vector3d(1.0, n(rng), n(rng)));
    const double h = (p.s - q.s).norm();
    const double avg = 0.5 * (model.kernels()[0](h, p.t - q.t) + model.kernels()[1](h, p.t - q.t));
    EXPECT_NEAR(cov_mu(model, p, q), avg, 1e-12);
  }
}

TEST(Covariance, ZeroVarianceComponentContributesNothing) {
  const CovModel model({SpaceTimeKernel(SpatialKernel(50.0, 0.0), 0.3)},
                       WeightScheme::stationary(1), SpatialKernel(100.0, 0.0), 1.0);
  const auto p = point(0, 0, 0, Eigen::VectorXd::Ones(1));
  const auto q = point(10, 0, 1, Eigen::VectorXd::Ones(1));
  EXPECT_EQ(cov_mu(model, p, q), 0.0);
  const Eigen::MatrixXd c = build_cov_matrix(model, {p, q}, true, true);
  EXPECT_EQ(c, Eigen::Matrix2d::Identity());
}

TEST(Covariance, DuplicatedPointIsSingularWithoutNugget) {
  const auto model = two_component(Eigen::MatrixXd::Zero(2, 1));
  const auto p = point(10, 20, 2, Eigen::VectorXd::Ones(1));
  const auto q = point(60, 20, 2, Eigen::VectorXd::Ones(1));
  const Eigen::MatrixXd c = build_cov_matrix(model, {p, q, p}, false, false);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
  EXPECT_NEAR(es.eigenvalues()(0), 0.0, 1e-12);
  const Eigen::MatrixXd cn = build_cov_matrix(model, {p, q, p}, false, true);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> esn(cn);
  EXPECT_NEAR(esn.eigenvalues()(0), 0.25, 1e-12);
}

TEST(Covariance, MatrixIsSymmetricPositiveDefinite) {
  Eigen::MatrixXd alpha(2, 3);
  alpha << 0, 0, 0, -0.3, 1.5, 0.7;
  const auto model = two_component(alpha);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 500.0);
  std::normal_distribution<double> n;
  std::vector<SpaceTimePoint> pts;
  for (int a = 0; a < 25; ++a)
    pts.push_back(point(u(rng), u(rng), a % 5, Eigen::Vector3d(1.0, n(rng), n(rng))));
  const Eigen::MatrixXd c = build_cov_matrix(model, pts, true, true);
  EXPECT_TRUE(c.isApprox(c.transpose(), 0.0));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
  EXPECT_GT(es.eigenvalues()(0), 0.25 - 1e-10);
}

TEST(Covariance, MonteCarloOracleSmall) {
  Eigen::MatrixXd alpha(2, 2);
  alpha << 0, 0, 0.2, 1.2;
  const auto model = two_component(alpha);
  std::vector<SpaceTimePoint> pts;
  for (int a = 0; a < 6; ++a)
    pts.push_back(point(40.0 * a, 15.0 * (a % 2), a % 3, Eigen::Vector2d(1.0, -1.0 + 0.4 * a)));
  const Eigen::MatrixXd exact = build_cov_matrix(model, pts, false, false);
  const auto mc = empirical_cov_oracle(model, pts, 60000, 17);
  int within = 0;
  for (Eigen::Index a = 0; a < exact.rows(); ++a)
    for (Eigen::Index b = 0; b < exact.cols(); ++b)
      within += std::abs(mc.cov(a, b) - exact(a, b)) <= 4.0 * mc.standard_error(a, b) ? 1 : 0;
  EXPECT_GE(within, 34);
}

TEST(Covariance, OracleIsDeterministic) {
  const auto model = two_component(Eigen::MatrixXd::Zero(2, 1));
  std::vector<SpaceTimePoint> pts{point(0, 0, 0, Eigen::VectorXd::Ones(1)),
                                  point(30, 0, 1, Eigen::VectorXd::Ones(1))};
  const auto a = empirical_cov_oracle(model, pts, 2000, 5);
  const auto b = empirical_cov_oracle(model, pts, 2000, 5);
  EXPECT_EQ(a.cov, b.cov);
  EXPECT_THROW(empirical_cov_oracle(model, pts, 10, 5), ArgumentError);
}

TEST(Covariance, RejectsMismatchedModels) {
  EXPECT_THROW(CovModel({}, WeightScheme::stationary(1), SpatialKernel(1.0), 1.0), ArgumentError);
  EXPECT_THROW(CovModel({SpaceTimeKernel(SpatialKernel(1.0), 0.5)},
                        WeightScheme::multinomial_logistic(Eigen::MatrixXd::Zero(2, 1)),
                        SpatialKernel(1.0), 1.0),
               ArgumentError);
  EXPECT_THROW(CovModel({SpaceTimeKernel(SpatialKernel(1.0), 0.5)}, WeightScheme::stationary(1),
                        SpatialKernel(1.0), 0.0),
               ArgumentError);
}

TEST(ExampleCurves, QuadraticValues) {
  const auto f = example_curves(CurveVariant::Quadratic);
  ASSERT_EQ(f.s.size(), 101);
  // s = 0: x = 0, both weights 1/2
  EXPECT_NEAR(f.cov(50, 50), 0.5, 1e-14);
  // s = 1: x = 1, w2 = logistic(1)
  const double w2 = 1.0 / (1.0 + std::exp(-1.0));
  EXPECT_NEAR(f.cov(100, 100), (1 - w2) * (1 - w2) + w2 * w2, 1e-14);
  // adjacent grid points 0.02 apart at s = 0
  EXPECT_NEAR(f.cov(50, 51),
              0.5 * (1 - 1 / (1 + std::exp(-0.0004))) * std::exp(-1.0) +
                  0.5 * (1 / (1 + std::exp(-0.0004))) * std::exp(-0.04),
              1e-3);
}

TEST(ExampleCurves, QuadraticCorrelationStrongerAtEnds) {
  const auto f = example_curves(CurveVariant::Quadratic);
  const double centre = corr(f.cov, 50, 53);
  EXPECT_GT(corr(f.cov, 0, 3), centre);
  EXPECT_GT(corr(f.cov, 97, 100), centre);
}

TEST(ExampleCurves, PeriodicCovarianceNotMonotone) {
  const auto f = example_curves(CurveVariant::Periodic);
  bool rises = false;
  for (Eigen::Index b = 51; b < 101; ++b)
    rises = rises || f.cov(50, b) > f.cov(50, b - 1) + 1e-12;
  EXPECT_TRUE(rises);
  const auto q = example_curves(CurveVariant::Quadratic);
  for (Eigen::Index b = 51; b < 101; ++b)
    EXPECT_LE(q.cov(50, b), q.cov(50, b - 1) + 1e-12);
}
