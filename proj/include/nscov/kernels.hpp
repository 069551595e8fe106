#pragma once

// Stationary covariance primitives. All kernels use the range form
//   K(h) = tau2 * exp(-(h / range)^kappa),
// so kappa = 1 is the exponential kernel exp(-h / range).

#include <nscov/errors.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

namespace nscov {

enum class KernelFamily { Exponential, PoweredExponential };

class SpatialKernel {
public:
  SpatialKernel(double range, double tau2 = 1.0, double kappa = 1.0)
      : SpatialKernel(kappa == 1.0 ? KernelFamily::Exponential
                                   : KernelFamily::PoweredExponential,
                      range, tau2, kappa) {}

  SpatialKernel(KernelFamily family, double range, double tau2, double kappa)
      : family_(family), range_(range), tau2_(tau2),
        kappa_(family == KernelFamily::Exponential ? 1.0 : kappa) {
    if (!(range_ > 0.0) || !std::isfinite(range_))
      throw ArgumentError("SpatialKernel: range must be positive and finite");
    if (!(tau2_ >= 0.0) || !std::isfinite(tau2_))
      throw ArgumentError("SpatialKernel: tau2 must be nonnegative and finite");
    if (!(kappa_ > 0.0 && kappa_ <= 2.0))
      throw ArgumentError("SpatialKernel: kappa must lie in (0, 2]");
    if (family == KernelFamily::Exponential && kappa != 1.0)
      throw ArgumentError("SpatialKernel: exponential family fixes kappa = 1");
  }

  KernelFamily family() const { return family_; }
  double range() const { return range_; }
  double tau2() const { return tau2_; }
  double kappa() const { return kappa_; }

  // Rate in the tau2 * exp(-rate * h^kappa) form.
  double rate() const { return std::pow(range_, -kappa_); }

  double correlation(double h) const {
    if (h < 0.0 || std::isnan(h))
      throw DomainError("SpatialKernel: distance must be nonnegative");
    if (h == 0.0)
      return 1.0;
    const double u = h / range_;
    return std::exp(-(kappa_ == 1.0 ? u : std::pow(u, kappa_)));
  }

  double operator()(double h) const { return tau2_ * correlation(h); }

  SpatialKernel with_tau2(double tau2) const {
    return SpatialKernel(family_, range_, tau2, kappa_);
  }

private:
  KernelFamily family_;
  double range_;
  double tau2_;
  double kappa_;
};

inline double eval_spatial(const SpatialKernel &kernel, double h) {
  return kernel(h);
}

// Separable space-time kernel: spatial(h_s) * decay^|h_t|.
class SpaceTimeKernel {
public:
  SpaceTimeKernel(SpatialKernel spatial, double decay)
      : spatial_(spatial), decay_(decay) {
    if (!(decay_ > 0.0 && decay_ < 1.0))
      throw ArgumentError("SpaceTimeKernel: temporal decay must lie in (0, 1)");
  }

  const SpatialKernel &spatial() const { return spatial_; }
  double decay() const { return decay_; }
  double tau2() const { return spatial_.tau2(); }

  double temporal(long lag) const {
    const long a = std::labs(lag);
    return a == 0 ? 1.0 : std::pow(decay_, static_cast<double>(a));
  }

  double operator()(double h_s, long h_t) const {
    return spatial_(h_s) * temporal(h_t);
  }

private:
  SpatialKernel spatial_;
  double decay_;
};

inline double eval_spacetime(const SpaceTimeKernel &kernel, double h_s,
                             long h_t) {
  return kernel(h_s, h_t);
}

// Correlation matrix of a set of 2-D sites under a spatial kernel (unit variance).
inline Eigen::MatrixXd correlation_matrix(const SpatialKernel &kernel,
                                          const Eigen::MatrixX2d &coords) {
  const Eigen::Index n = coords.rows();
  Eigen::MatrixXd r(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    r(i, i) = 1.0;
    for (Eigen::Index k = 0; k < i; ++k) {
      const double v = kernel.correlation((coords.row(i) - coords.row(k)).norm());
      r(i, k) = v;
      r(k, i) = v;
    }
  }
  return r;
}

// Correlations between one location and a set of sites.
inline Eigen::VectorXd correlation_vector(const SpatialKernel &kernel,
                                          const Eigen::RowVector2d &at,
                                          const Eigen::MatrixX2d &coords) {
  Eigen::VectorXd k(coords.rows());
  for (Eigen::Index i = 0; i < coords.rows(); ++i)
    k(i) = kernel.correlation((coords.row(i) - at).norm());
  return k;
}

struct MonotonicityViolation {
  std::size_t component;
  double h;
};

struct MonotonicityReport {
  bool monotone = true;
  std::optional<MonotonicityViolation> first_violation;
};

// 200 log-spaced distances over [1e-3 * min range, 5 * max range].
inline std::vector<double>
default_monotonicity_grid(const std::vector<SpatialKernel> &kernels,
                          std::size_t points = 200) {
  if (kernels.empty())
    throw ArgumentError("default_monotonicity_grid: no kernels");
  if (points < 2)
    throw ArgumentError("default_monotonicity_grid: need at least 2 points");
  double lo = kernels.front().range(), hi = lo;
  for (const auto &k : kernels) {
    lo = std::min(lo, k.range());
    hi = std::max(hi, k.range());
  }
  const double a = std::log(1e-3 * lo), b = std::log(5.0 * hi);
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i)
    grid[i] = std::exp(a + (b - a) * static_cast<double>(i) /
                               static_cast<double>(points - 1));
  return grid;
}

// Sufficient condition for a covariance decreasing in distance under
// exponential weights w_j(x) = exp(x' alpha_j) and powered-exponential kernels:
//   gradient_bound' |alpha_j| < kappa_j * rate_j * h^(kappa_j - 1)
// for every component j and every h in the grid. gradient_bound[k] bounds
// |dx_k/ds| over the domain.
inline MonotonicityReport
check_monotone_sufficient(const std::vector<SpatialKernel> &kernels,
                          const std::vector<Eigen::VectorXd> &alphas,
                          const Eigen::VectorXd &gradient_bound,
                          const std::vector<double> &h_grid) {
  if (h_grid.empty())
    throw ArgumentError("check_monotone_sufficient: empty distance grid");
  if (kernels.size() != alphas.size())
    throw ArgumentError("check_monotone_sufficient: one alpha vector per kernel");
  for (double h : h_grid)
    if (!(h > 0.0))
      throw ArgumentError("check_monotone_sufficient: grid must be strictly positive");

  MonotonicityReport report;
  for (std::size_t j = 0; j < kernels.size(); ++j) {
    if (alphas[j].size() != gradient_bound.size())
      throw ArgumentError("check_monotone_sufficient: alpha/gradient size mismatch");
    const double elasticity = gradient_bound.dot(alphas[j].cwiseAbs());
    const auto &k = kernels[j];
    for (double h : h_grid) {
      const double decay = k.kappa() * k.rate() * std::pow(h, k.kappa() - 1.0);
      if (!(elasticity < decay)) {
        report.monotone = false;
        report.first_violation = MonotonicityViolation{j, h};
        return report;
      }
    }
  }
  return report;
}

} // namespace nscov
