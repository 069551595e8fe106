#pragma once

// Joint-distribution checks for the sampler on a 5-site x 4-time toy.
// Marginal-conditional draws come straight from the prior; the
// successive-conditional chain alternates one sampler sweep with a fresh
// response draw. Both target the same joint, so every statistic must agree.

#include <nscov/sampler.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace nscov::testing {

inline Dataset geweke_toy(std::uint64_t seed = 11) {
  Rng rng(seed);
  const Eigen::Index n = 5, t = 4, p = 3;
  Eigen::MatrixX2d coords(n, 2);
  coords << 0, 0, 120, 30, 60, 200, 250, 180, 300, 20;
  Eigen::MatrixXd x(n * t, p);
  for (Eigen::Index r = 0; r < n * t; ++r) {
    x(r, 0) = 1.0;
    x(r, 1) = std_normal(rng);
    x(r, 2) = std_normal(rng);
  }
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, t);
  y(3, 1) = std::numeric_limits<double>::quiet_NaN();
  y(1, 3) = std::numeric_limits<double>::quiet_NaN();
  return make_grid_dataset(coords, y, x);
}

inline Hyperpriors geweke_priors() {
  Hyperpriors h;
  h.beta_var = 1.0;
  h.alpha_var = 1.0;
  h.precision_shape = 6.0;
  h.precision_rate = 5.0;
  h.rho_max = 1000.0;
  return h;
}

inline ModelSpec geweke_spec() {
  ModelSpec s;
  s.components = 2;
  return s;
}

inline const std::vector<std::string> &geweke_names() {
  static const std::vector<std::string> names{
      "beta1",  "beta2",  "beta3",  "sigma2",  "tau0_2",  "rho0",      "alpha21",
      "alpha22", "alpha23", "rho1",  "rho2",    "tau2_1",  "tau2_2",    "gamma1",
      "gamma2", "delta1", "theta1", "theta2",  "y11",     "mean_y"};
  return names;
}

inline Eigen::VectorXd geweke_stats(const ParamState &s, const Eigen::MatrixXd &y) {
  Eigen::VectorXd g(20);
  g << s.beta(0), s.beta(1), s.beta(2), s.sigma2, s.tau0_2, s.rho0, s.alpha(1, 0), s.alpha(1, 1),
      s.alpha(1, 2), s.rho(0), s.rho(1), s.tau2(0), s.tau2(1), s.gamma(0), s.gamma(1), s.delta(0),
      s.theta[0](0, 0), s.theta[1](2, 3), y(0, 0), 0.0;
  double sum = 0.0;
  int cnt = 0;
  for (Eigen::Index t = 0; t < y.cols(); ++t)
    for (Eigen::Index i = 0; i < y.rows(); ++i)
      if (!std::isnan(y(i, t))) {
        sum += y(i, t);
        ++cnt;
      }
  g(19) = sum / cnt;
  return g;
}

// Rows are independent draws of the statistics from the joint.
inline Eigen::MatrixXd marginal_conditional(const Dataset &data, long n_draws, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd out(n_draws, 20);
  for (long r = 0; r < n_draws; ++r) {
    const ParamState s = draw_from_prior(data, geweke_spec(), geweke_priors(), rng);
    out.row(r) = geweke_stats(s, simulate_response(s, data, rng)).transpose();
  }
  return out;
}

inline Eigen::MatrixXd successive_conditional(const Dataset &data, long n_iter,
                                              std::uint64_t seed) {
  Rng rng(seed);
  ParamState s = draw_from_prior(data, geweke_spec(), geweke_priors(), rng);
  Dataset d = data;
  d.y = simulate_response(s, data, rng);
  GibbsSampler sampler(d, geweke_spec(), geweke_priors(), s, seed + 1);
  sampler.init_steps(250.0, 0.8);
  Eigen::MatrixXd out(n_iter, 20);
  for (long it = 0; it < n_iter; ++it) {
    sampler.sweep(it);
    const Eigen::MatrixXd y = simulate_response(sampler.state(), sampler.data(), rng);
    sampler.set_responses(y);
    out.row(it) = geweke_stats(sampler.state(), y).transpose();
  }
  return out;
}

// Standard error of a chain mean from non-overlapping batch means.
inline double batch_means_se(const Eigen::VectorXd &x, Eigen::Index batches = 100) {
  const Eigen::Index len = x.size() / batches;
  Eigen::VectorXd means(batches);
  for (Eigen::Index b = 0; b < batches; ++b)
    means(b) = x.segment(b * len, len).mean();
  const double m = means.mean();
  const double var = (means.array() - m).square().sum() / static_cast<double>(batches - 1);
  return std::sqrt(var / static_cast<double>(batches));
}

// z for the difference of means, iid sample a against correlated chain b.
inline double geweke_z(const Eigen::VectorXd &a, const Eigen::VectorXd &b) {
  const double ma = a.mean();
  const double va = (a.array() - ma).square().sum() / static_cast<double>(a.size() - 1);
  const double se_b = batch_means_se(b);
  return (ma - b.mean()) / std::sqrt(va / static_cast<double>(a.size()) + se_b * se_b);
}

} // namespace nscov::testing
