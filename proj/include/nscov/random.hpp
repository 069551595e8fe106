#pragma once

// Random variate helpers on top of <random>. A single std::mt19937_64 drives
// everything so chains are reproducible from one seed.

#include <nscov/errors.hpp>
#include <nscov/linalg.hpp>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace nscov {

using Rng = std::mt19937_64;

inline double std_normal(Rng &rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

inline double uniform01(Rng &rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline Eigen::VectorXd std_normal_vector(Eigen::Index n, Rng &rng) {
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i)
    z(i) = std_normal(rng);
  return z;
}

// Gamma(shape, rate).
inline double gamma_draw(double shape, double rate, Rng &rng) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw NumericalError("gamma_draw: shape and rate must be positive");
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

// Variance whose precision is Gamma(shape, rate).
inline double inverse_gamma_draw(double shape, double rate, Rng &rng) {
  return 1.0 / gamma_draw(shape, rate, rng);
}

// Draw from N(mean, cov) with cov = L L'.
inline Eigen::VectorXd mvn_from_cholesky(const Eigen::VectorXd &mean,
                                         const JitteredCholesky &cov_chol,
                                         Rng &rng) {
  return mean + cov_chol.llt.matrixL() * std_normal_vector(mean.size(), rng);
}

// Draw from the Gaussian with precision P = L L' and P * mean = b.
// Returns the draw; mean_out receives P^{-1} b when non-null.
inline Eigen::VectorXd mvn_from_precision(const Eigen::VectorXd &b,
                                          const JitteredCholesky &prec_chol,
                                          Rng &rng,
                                          Eigen::VectorXd *mean_out = nullptr) {
  Eigen::VectorXd mean = prec_chol.llt.solve(b);
  Eigen::VectorXd z = std_normal_vector(b.size(), rng);
  Eigen::VectorXd draw = mean + prec_chol.llt.matrixU().solve(z);
  if (mean_out)
    *mean_out = std::move(mean);
  return draw;
}

namespace detail {

// Exponential-proposal rejection sampler for N(0,1) restricted to [a, inf),
// a > 0 (Robert, 1995).
inline double normal_tail(double a, Rng &rng) {
  const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double z = a - std::log(uniform01(rng)) / lambda;
    if (std::log(uniform01(rng)) <= -0.5 * (z - lambda) * (z - lambda))
      return z;
  }
}

// Clamp into the open interval (lo, hi).
inline double clamp_open(double v, double lo, double hi) {
  if (!(v > lo))
    return std::nextafter(lo, hi);
  if (!(v < hi))
    return std::nextafter(hi, lo);
  return v;
}

} // namespace detail

// N(mean, sd^2) restricted to (lo, hi). Inverse-CDF sampling using whichever
// tail keeps precision; falls back to tail rejection when both bounds sit
// deep in one tail.
inline double truncated_normal(double mean, double sd, double lo, double hi,
                               Rng &rng) {
  if (!(hi > lo))
    throw ArgumentError("truncated_normal: empty interval");
  if (!(sd > 0.0) || !std::isfinite(mean))
    throw NumericalError("truncated_normal: invalid location/scale");
  const double a = (lo - mean) / sd;
  const double b = (hi - mean) / sd;
  const boost::math::normal_distribution<double> std_norm;

  // Both bounds in the upper tail: work with the survival function.
  if (a > 0.0) {
    const double qa = boost::math::cdf(boost::math::complement(std_norm, a));
    const double qb = boost::math::cdf(boost::math::complement(std_norm, b));
    if (qa > 1e-300 && qa - qb > 0.0) {
      const double u = qb + uniform01(rng) * (qa - qb);
      if (u > 0.0) {
        const double z = boost::math::quantile(boost::math::complement(std_norm, u));
        return detail::clamp_open(mean + sd * z, lo, hi);
      }
    }
    for (;;) {
      const double z = detail::normal_tail(a, rng);
      if (z < b)
        return detail::clamp_open(mean + sd * z, lo, hi);
    }
  }
  if (b < 0.0)
    return -truncated_normal(-mean, sd, -hi, -lo, rng);

  // Interval straddles the mean.
  const double pa = boost::math::cdf(std_norm, a);
  const double pb = boost::math::cdf(std_norm, b);
  double u = pa + uniform01(rng) * (pb - pa);
  u = std::clamp(u, std::numeric_limits<double>::min(), 1.0 - 1e-16);
  const double z = boost::math::quantile(std_norm, u);
  return detail::clamp_open(mean + sd * z, lo, hi);
}

} // namespace nscov
