#pragma once

// Covariance-effect ratios. For covariate k, offset c and lag (h_s, h_t):
//
//   Delta_k(h_s, h_t) = sum_j softmax_j(alpha_.1 + c alpha_.k) K_j(h_s, h_t)
//                     / sum_j softmax_j(alpha_.1) K_j(h_s, h_t)
//
// i.e. the covariance of two points with x_k = c (other covariates at 0)
// relative to two points at baseline, and Delta~_k = Delta_k / Delta_k(0, 0)
// is the same ratio for correlations. K_j carries the stationary variance
// tau_j^2 / (1 - gamma_j^2).

#include <nscov/chain.hpp>
#include <nscov/covariance.hpp>
#include <nscov/errors.hpp>
#include <nscov/predict.hpp>
#include <nscov/sampler.hpp>
#include <nscov/weights.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace nscov {

inline double delta_k(const ParamState &s, Eigen::Index k, double h_s, long h_t, double c = 2.0,
                      double kappa = 1.0) {
  if (k < 1 || k >= s.alpha.cols())
    throw ArgumentError("delta_k: k must index a non-intercept covariate");
  const Eigen::Index m = s.components();
  Eigen::VectorXd kern(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double g = s.gamma(j);
    kern(j) = SpaceTimeKernel(SpatialKernel(s.rho(j), s.tau2(j) / (1.0 - g * g), kappa), g)(h_s, h_t);
  }
  const Eigen::VectorXd base = WeightScheme::softmax(s.alpha.col(0));
  const Eigen::VectorXd up = WeightScheme::softmax(s.alpha.col(0) + c * s.alpha.col(k));
  return up.dot(kern) / base.dot(kern);
}

inline double delta_tilde(const ParamState &s, Eigen::Index k, double h_s, long h_t,
                          double c = 2.0, double kappa = 1.0) {
  return delta_k(s, k, h_s, h_t, c, kappa) / delta_k(s, k, 0.0, 0, c, kappa);
}

struct Interval {
  double mean = 0.0;
  double lower = 0.0; // 2.5% quantile
  double upper = 0.0; // 97.5% quantile

  bool excludes(double v) const { return v < lower || v > upper; }
};

inline Interval posterior_interval(std::vector<double> v) {
  if (v.empty())
    throw ArgumentError("posterior_interval: no draws");
  Interval out;
  double sum = 0.0;
  for (double x : v)
    sum += x;
  out.mean = sum / static_cast<double>(v.size());
  std::sort(v.begin(), v.end());
  out.lower = sorted_quantile(v, 0.025);
  out.upper = sorted_quantile(v, 0.975);
  return out;
}

// One row per covariate and lag.
struct EffectSummary {
  Eigen::Index k = 1;
  double h_s = 0.0;
  long h_t = 0;
  Interval delta;
  Interval delta_tilde;
  // At lag (0, 0): Delta interval excludes 1. Elsewhere: Delta~ interval excludes 1.
  bool significant = false;
};

// Per-covariate report: mean coefficient (raw and per c standard deviations)
// and the three significance flags.
struct CovariateEffect {
  Eigen::Index k = 1;
  Interval beta;
  Interval beta_scaled;
  bool variance = false; // Delta_k(0, 0)
  bool spatial = false;  // Delta~_k(h_s, 0)
  bool temporal = false; // Delta~_k(0, h_t)

  bool any() const { return variance || spatial || temporal; }
};

struct EffectReport {
  std::vector<EffectSummary> rows;
  std::vector<CovariateEffect> covariates;
};

struct EffectOptions {
  double c = 2.0;
  double spatial_lag = 100.0; // km
  long temporal_lag = 2;      // days
};

inline EffectSummary summarize_lag(const PosteriorDraws &draws, Eigen::Index k, double h_s,
                                   long h_t, double c) {
  std::vector<double> d, dt;
  for (const auto &s : draws.draws) {
    const double v = delta_k(s, k, h_s, h_t, c, draws.spec.kappa);
    d.push_back(v);
    dt.push_back(v / delta_k(s, k, 0.0, 0, c, draws.spec.kappa));
  }
  EffectSummary row;
  row.k = k;
  row.h_s = h_s;
  row.h_t = h_t;
  row.delta = posterior_interval(std::move(d));
  row.delta_tilde = posterior_interval(std::move(dt));
  row.significant = (h_s == 0.0 && h_t == 0) ? row.delta.excludes(1.0)
                                             : row.delta_tilde.excludes(1.0);
  return row;
}

// Effects for every covariate in k_set (all non-intercept covariates when
// empty) at the requested lags, plus per-covariate flags at (0, 0),
// (spatial_lag, 0) and (0, temporal_lag).
inline EffectReport summarize_effects(const PosteriorDraws &draws,
                                      const std::vector<LagProbe> &lags,
                                      std::vector<Eigen::Index> k_set = {},
                                      const EffectOptions &options = {}) {
  if (draws.draws.empty())
    throw ArgumentError("summarize_effects: no draws");
  const Eigen::Index p = draws.draws.front().alpha.cols();
  if (k_set.empty())
    for (Eigen::Index k = 1; k < p; ++k)
      k_set.push_back(k);
  EffectReport report;
  for (auto k : k_set) {
    if (k < 1 || k >= p)
      throw ArgumentError("summarize_effects: covariate index out of range");
    for (const auto &lag : lags)
      report.rows.push_back(summarize_lag(draws, k, lag.h_s, lag.h_t, options.c));
    CovariateEffect e;
    e.k = k;
    std::vector<double> b, bs;
    for (const auto &s : draws.draws) {
      b.push_back(s.beta(k));
      bs.push_back(options.c * s.beta(k));
    }
    e.beta = posterior_interval(std::move(b));
    e.beta_scaled = posterior_interval(std::move(bs));
    e.variance = summarize_lag(draws, k, 0.0, 0, options.c).significant;
    e.spatial = summarize_lag(draws, k, options.spatial_lag, 0, options.c).significant;
    e.temporal = summarize_lag(draws, k, 0.0, options.temporal_lag, options.c).significant;
    report.covariates.push_back(e);
  }
  return report;
}

} // namespace nscov
