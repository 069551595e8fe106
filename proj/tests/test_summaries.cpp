#include <nscov/summaries.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace nscov;

namespace {

ParamState state(Eigen::Index m, std::uint64_t seed) {
  Rng rng(seed);
  ParamState s;
  const Eigen::Index p = 3;
  s.beta = Eigen::VectorXd::Zero(p);
  s.sigma2 = 0.3;
  s.alpha = Eigen::MatrixXd::Zero(m, p);
  for (Eigen::Index j = 1; j < m; ++j)
    for (Eigen::Index k = 0; k < p; ++k)
      s.alpha(j, k) = 1.5 * std_normal(rng);
  s.rho.resize(m);
  s.tau2.resize(m);
  s.gamma.resize(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    s.rho(j) = 20.0 + 500.0 * uniform01(rng);
    s.tau2(j) = 0.2 + uniform01(rng);
    s.gamma(j) = 0.05 + 0.9 * uniform01(rng);
  }
  s.rho0 = 100.0;
  s.tau0_2 = 0.5;
  return s;
}

PosteriorDraws draws_of(std::vector<ParamState> v) {
  PosteriorDraws d;
  d.spec.components = v.front().components();
  d.draws = std::move(v);
  return d;
}

} // namespace

TEST(Delta, ZeroAlphaIsOne) {
  ParamState s = state(3, 1);
  s.alpha.setZero();
  for (double h : {0.0, 10.0, 300.0})
    for (long t : {0L, 1L, 5L}) {
      EXPECT_NEAR(delta_k(s, 1, h, t), 1.0, 1e-14);
      EXPECT_NEAR(delta_k(s, 2, h, t, 3.0), 1.0, 1e-14);
    }
}

TEST(Delta, SingleComponentIsOne) {
  const ParamState s = state(1, 2);
  for (double h : {0.0, 75.0})
    EXPECT_NEAR(delta_k(s, 1, h, 2), 1.0, 1e-14);
}

TEST(Delta, MatchesCovarianceRatio) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const ParamState s = state(1 + static_cast<Eigen::Index>(seed % 3), seed);
    const CovModel model = to_cov_model(s);
    for (Eigen::Index k : {1, 2})
      for (double h : {0.0, 40.0, 250.0})
        for (long t : {0L, 2L}) {
          SpaceTimePoint a, b;
          a.x = Eigen::Vector3d(1.0, 0.0, 0.0);
          b.x = a.x;
          b.s = Eigen::RowVector2d(0.6 * h, 0.8 * h);
          b.t = t;
          const double base = cov_mu(model, a, b);
          a.x(k) = b.x(k) = 2.0;
          const double up = cov_mu(model, a, b);
          EXPECT_NEAR(delta_k(s, k, h, t), up / base, 1e-10 * std::abs(up / base));
        }
  }
}

TEST(Delta, TildeIsOneAtOrigin) {
  const ParamState s = state(3, 4);
  EXPECT_DOUBLE_EQ(delta_tilde(s, 1, 0.0, 0), 1.0);
  EXPECT_NEAR(delta_tilde(s, 2, 50.0, 1), delta_k(s, 2, 50.0, 1) / delta_k(s, 2, 0.0, 0), 1e-15);
}

TEST(Delta, LabelInvariant) {
  const ParamState s = state(3, 5);
  const ParamState p = permute_components(s, {2, 0, 1});
  for (double h : {0.0, 100.0})
    EXPECT_NEAR(delta_k(s, 1, h, 1), delta_k(p, 1, h, 1), 1e-12);
}

TEST(Delta, RejectsInterceptIndex) {
  const ParamState s = state(2, 6);
  EXPECT_THROW(delta_k(s, 0, 0.0, 0), ArgumentError);
  EXPECT_THROW(delta_k(s, 3, 0.0, 0), ArgumentError);
}

TEST(Delta, PosteriorInterval) {
  std::vector<double> v;
  for (int a = 0; a <= 400; ++a)
    v.push_back(a / 400.0);
  const auto in = posterior_interval(v);
  EXPECT_DOUBLE_EQ(in.mean, 0.5);
  EXPECT_DOUBLE_EQ(in.lower, 0.025);
  EXPECT_DOUBLE_EQ(in.upper, 0.975);
  EXPECT_TRUE(in.excludes(1.0));
  EXPECT_FALSE(in.excludes(0.5));
  EXPECT_THROW(posterior_interval({}), ArgumentError);
}

TEST(Effects, FlagsOnlyTheActiveCovariate) {
  std::vector<ParamState> v;
  Rng rng(3);
  for (int d = 0; d < 300; ++d) {
    ParamState s = state(2, 9);
    s.rho << 40.0 + 5.0 * std_normal(rng), 400.0 + 20.0 * std_normal(rng);
    s.gamma << 0.3, 0.85;
    s.tau2 << 1.0, 0.3;
    s.alpha.row(1) << 0.1 * std_normal(rng), 1.5 + 0.1 * std_normal(rng), 0.0;
    s.beta << 1.0, 0.5 + 0.01 * std_normal(rng), -0.5;
    v.push_back(s);
  }
  const auto draws = draws_of(v);
  const auto report = summarize_effects(draws, {{0.0, 0}, {100.0, 0}, {0.0, 2}});
  ASSERT_EQ(report.covariates.size(), 2u);
  ASSERT_EQ(report.rows.size(), 6u);
  EXPECT_TRUE(report.covariates[0].any());
  EXPECT_TRUE(report.covariates[0].spatial);
  EXPECT_TRUE(report.covariates[0].temporal);
  EXPECT_FALSE(report.covariates[1].any());
  EXPECT_NEAR(report.covariates[0].beta.mean, 0.5, 0.01);
  EXPECT_NEAR(report.covariates[0].beta_scaled.mean, 1.0, 0.02);
  EXPECT_EQ(report.rows[3].k, 2);
  EXPECT_DOUBLE_EQ(report.rows[3].delta.lower, 1.0);
  // the active covariate moves weight to the long, persistent component
  EXPECT_GT(report.rows[1].delta_tilde.lower, 1.0);
}

TEST(Effects, SubsetAndErrors) {
  const auto draws = draws_of({state(2, 1), state(2, 2)});
  const auto r = summarize_effects(draws, {{10.0, 1}}, {2});
  ASSERT_EQ(r.covariates.size(), 1u);
  EXPECT_EQ(r.covariates[0].k, 2);
  EXPECT_THROW(summarize_effects(draws, {{10.0, 1}}, {0}), ArgumentError);
  EXPECT_THROW(summarize_effects(PosteriorDraws{}, {{10.0, 1}}), ArgumentError);
}
