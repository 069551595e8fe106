#pragma once

// Synthetic data from the full model and the two one-dimensional examples of
// covariate-driven covariance (quadratic and periodic covariate).

#include <nscov/covariance.hpp>
#include <nscov/dataset.hpp>
#include <nscov/kernels.hpp>
#include <nscov/linalg.hpp>
#include <nscov/random.hpp>
#include <nscov/sampler.hpp>
#include <nscov/weights.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

namespace nscov {

enum class LatentStart {
  Stationary, // theta_j at a segment start ~ N(0, tau_j^2 / (1 - gamma_j^2) R_j)
  ZeroStart   // theta_j at a segment start ~ N(0, tau_j^2 R_j), matching the sampler prior
};

// Defaults are the M2-bench configuration.
struct SimulationSpec {
  Eigen::Index n_sites = 20;
  Eigen::Index n_times = 50;
  double domain_km = 500.0;           // sites uniform on [0, domain_km]^2
  double covariate_range_km = 200.0;  // GP covariate spatial range
  double covariate_range_days = 5.0;  // GP covariate temporal range
  Eigen::Index n_covariates = 3;      // including the intercept
  Eigen::VectorXd beta = Eigen::Vector3d(1.0, 0.5, -0.5);
  Eigen::MatrixXd alpha = (Eigen::MatrixXd(2, 3) << 0.0, 0.0, 0.0, 0.0, 1.5, 0.0).finished();
  Eigen::VectorXd rho = Eigen::Vector2d(50.0, 300.0);
  Eigen::VectorXd gamma = Eigen::Vector2d(0.3, 0.8);
  Eigen::VectorXd tau2 = Eigen::Vector2d(1.0, 1.0);
  double sigma2 = 0.25;
  double tau0_2 = 0.5;
  double rho0 = 150.0;
  double kappa = 1.0;
  double missing_fraction = 0.0;
  LatentStart start = LatentStart::Stationary;

  Eigen::Index components() const { return rho.size(); }

  void validate() const {
    const Eigen::Index m = components();
    if (n_sites < 1 || n_times < 1 || n_covariates < 1)
      throw ArgumentError("SimulationSpec: layout must be nonempty");
    if (!(domain_km > 0.0) || !(covariate_range_km > 0.0) || !(covariate_range_days > 0.0))
      throw ArgumentError("SimulationSpec: domain and covariate ranges must be positive");
    if (m < 1 || gamma.size() != m || tau2.size() != m || alpha.rows() != m ||
        alpha.cols() != n_covariates || beta.size() != n_covariates)
      throw ArgumentError("SimulationSpec: parameter dimensions are inconsistent");
    if ((rho.array() <= 0.0).any() || !(rho0 > 0.0))
      throw ArgumentError("SimulationSpec: ranges must be positive");
    if ((gamma.array() <= 0.0).any() || (gamma.array() >= 1.0).any())
      throw ArgumentError("SimulationSpec: gamma must lie in (0, 1) for a stationary start");
    if ((tau2.array() < 0.0).any() || tau0_2 < 0.0 || !(sigma2 > 0.0))
      throw ArgumentError("SimulationSpec: variances must be nonnegative, sigma2 positive");
    if (!(alpha.row(0).isZero(0.0)))
      throw ArgumentError("SimulationSpec: alpha row 1 must be zero");
    if (!(kappa > 0.0 && kappa <= 2.0))
      throw ArgumentError("SimulationSpec: kappa must lie in (0, 2]");
    if (!(missing_fraction >= 0.0 && missing_fraction < 1.0))
      throw ArgumentError("SimulationSpec: missing fraction must lie in [0, 1)");
  }
};

struct SimulationResult {
  Dataset data;
  ParamState truth;
  Eigen::MatrixXd y_complete; // responses before the missingness mask
};

namespace detail {

// L L' = R for a correlation kernel with variance scale; zero variance gives a
// zero factor.
inline Eigen::MatrixXd scaled_factor(double range, double variance, double kappa,
                                     const Eigen::MatrixX2d &coords) {
  const Eigen::Index n = coords.rows();
  if (variance == 0.0)
    return Eigen::MatrixXd::Zero(n, n);
  const auto chol = factorize_with_jitter(
      correlation_matrix(SpatialKernel(range, 1.0, kappa), coords), "simulation correlation");
  return std::sqrt(variance) * Eigen::MatrixXd(chol.llt.matrixL());
}

} // namespace detail

// Draws theta_j (AR(1) in time, spatial innovations) and delta on the layout of
// data with the parameters in s, then responses on every cell. theta, delta
// and the returned responses are complete; the caller applies any mask.
inline Eigen::MatrixXd simulate_latent(ParamState &s, const Dataset &data, double kappa,
                                       LatentStart start, Rng &rng) {
  const Eigen::Index n = data.n_sites(), t = data.n_times(), m = s.components();
  const Eigen::MatrixX2d coords = data.coords();
  s.delta = detail::scaled_factor(s.rho0, s.tau0_2, kappa, coords) * std_normal_vector(n, rng);
  s.theta.clear();
  for (Eigen::Index j = 0; j < m; ++j) {
    const double g = s.gamma(j);
    const Eigen::MatrixXd l = detail::scaled_factor(s.rho(j), s.tau2(j), kappa, coords);
    const double start_scale =
        start == LatentStart::Stationary ? 1.0 / std::sqrt(1.0 - g * g) : 1.0;
    Eigen::MatrixXd th(n, t);
    for (Eigen::Index tt = 0; tt < t; ++tt) {
      const Eigen::VectorXd e = l * std_normal_vector(n, rng);
      if (data.linked(tt))
        th.col(tt) = g * th.col(tt - 1) + e;
      else
        th.col(tt) = start_scale * e;
    }
    s.theta.push_back(std::move(th));
  }
  const auto w = cell_weights(s.alpha, data);
  Eigen::MatrixXd y = mean_trend(s.beta, data);
  const double sd = std::sqrt(s.sigma2);
  for (Eigen::Index tt = 0; tt < t; ++tt)
    for (Eigen::Index i = 0; i < n; ++i) {
      double v = y(i, tt) + s.delta(i) + sd * std_normal(rng);
      for (Eigen::Index j = 0; j < m; ++j)
        v += w[static_cast<std::size_t>(j)](i, tt) * s.theta[static_cast<std::size_t>(j)](i, tt);
      y(i, tt) = v;
    }
  return y;
}

// Smooth covariate field on sites x times: separable exponential GP, drawn as
// L_s Z L_t', then standardized to mean 0 and SD 1 over all cells.
inline Eigen::MatrixXd gp_covariate(const Eigen::MatrixX2d &coords, Eigen::Index n_times,
                                    double range_km, double range_days, Rng &rng) {
  const Eigen::Index n = coords.rows();
  const Eigen::MatrixXd ls = detail::scaled_factor(range_km, 1.0, 1.0, coords);
  Eigen::MatrixX2d times = Eigen::MatrixX2d::Zero(n_times, 2);
  for (Eigen::Index t = 0; t < n_times; ++t)
    times(t, 0) = static_cast<double>(t);
  const Eigen::MatrixXd lt = detail::scaled_factor(range_days, 1.0, 1.0, times);
  Eigen::MatrixXd z(n, n_times);
  for (Eigen::Index t = 0; t < n_times; ++t)
    z.col(t) = std_normal_vector(n, rng);
  Eigen::MatrixXd f = ls * z * lt.transpose();
  const double mean = f.mean();
  f.array() -= mean;
  const double sd = std::sqrt(f.squaredNorm() / static_cast<double>(f.size() - 1));
  if (sd > 0.0)
    f /= sd;
  return f;
}

inline SimulationResult simulate_dataset(const SimulationSpec &spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  const Eigen::Index n = spec.n_sites, t = spec.n_times, p = spec.n_covariates;

  Eigen::MatrixX2d coords(n, 2);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int c = 0; c < 2; ++c)
      coords(i, c) = spec.domain_km * uniform01(rng);

  Eigen::MatrixXd x(n * t, p);
  x.col(0).setOnes();
  for (Eigen::Index k = 1; k < p; ++k) {
    const Eigen::MatrixXd f =
        gp_covariate(coords, t, spec.covariate_range_km, spec.covariate_range_days, rng);
    x.col(k) = Eigen::Map<const Eigen::VectorXd>(f.data(), n * t);
  }

  SimulationResult out;
  out.data = make_grid_dataset(coords, Eigen::MatrixXd::Zero(n, t), std::move(x));
  ParamState &s = out.truth;
  s.beta = spec.beta;
  s.sigma2 = spec.sigma2;
  s.alpha = spec.alpha;
  s.rho = spec.rho;
  s.tau2 = spec.tau2;
  s.gamma = spec.gamma;
  s.rho0 = spec.rho0;
  s.tau0_2 = spec.tau0_2;
  out.y_complete = simulate_latent(s, out.data, spec.kappa, spec.start, rng);

  out.data.y = out.y_complete;
  const auto n_missing =
      static_cast<Eigen::Index>(std::llround(spec.missing_fraction * static_cast<double>(n * t)));
  if (n_missing > 0) {
    std::vector<Eigen::Index> cells(static_cast<std::size_t>(n * t));
    for (Eigen::Index c = 0; c < n * t; ++c)
      cells[static_cast<std::size_t>(c)] = c;
    // partial Fisher-Yates: the first n_missing entries are a uniform sample
    for (Eigen::Index c = 0; c < n_missing; ++c) {
      const auto r = c + static_cast<Eigen::Index>(uniform01(rng) * static_cast<double>(n * t - c));
      std::swap(cells[static_cast<std::size_t>(c)],
                cells[static_cast<std::size_t>(std::min(r, n * t - 1))]);
      const Eigen::Index cell = cells[static_cast<std::size_t>(c)];
      out.data.y(cell % n, cell / n) = std::numeric_limits<double>::quiet_NaN();
    }
  }

  // Geographic coordinates consistent with the projected ones (reference
  // latitude 40 degrees, domain placed near the origin of longitude).
  out.data.reference_latitude = 40.0;
  const Eigen::RowVector2d origin = mercator_project(0.0, 40.0, 40.0);
  for (auto &site : out.data.sites) {
    const Eigen::RowVector2d ll = mercator_unproject(site.xy + origin, 40.0);
    site.longitude = ll(0);
    site.latitude = ll(1);
  }
  return out;
}

enum class CurveVariant { Quadratic, Periodic };

struct ExampleCurves {
  CurveVariant variant = CurveVariant::Quadratic;
  Eigen::VectorXd s;   // 101-point grid on [-1, 1]
  Eigen::VectorXd x;   // covariate at each grid point
  Eigen::MatrixXd cov; // cov(mu(s_a), mu(s_b))
};

// M = 2, logit(w_2) = x(s), w_1 = 1 - w_2, K_1 = exp(-|h| / 0.02),
// K_2 = exp(-|h| / 0.5), with x(s) = s^2 or sin(4 pi s).
inline ExampleCurves example_curves(CurveVariant variant) {
  constexpr Eigen::Index n = 101;
  ExampleCurves out;
  out.variant = variant;
  out.s = Eigen::VectorXd::LinSpaced(n, -1.0, 1.0);
  out.x.resize(n);
  for (Eigen::Index a = 0; a < n; ++a)
    out.x(a) = variant == CurveVariant::Quadratic ? out.s(a) * out.s(a)
                                                    : std::sin(4.0 * std::numbers::pi * out.s(a));
  const CovModel model({SpaceTimeKernel(SpatialKernel(0.02), 0.5),
                        SpaceTimeKernel(SpatialKernel(0.50), 0.5)},
                       WeightScheme::simple_logit(Eigen::VectorXd::Ones(1)), SpatialKernel(1.0),
                       1.0);
  std::vector<SpaceTimePoint> pts(static_cast<std::size_t>(n));
  for (Eigen::Index a = 0; a < n; ++a) {
    pts[static_cast<std::size_t>(a)].s = Eigen::RowVector2d(out.s(a), 0.0);
    pts[static_cast<std::size_t>(a)].x = Eigen::VectorXd::Constant(1, out.x(a));
  }
  out.cov.resize(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b)
      out.cov(a, b) = cov_mu(model, pts[static_cast<std::size_t>(a)], pts[static_cast<std::size_t>(b)]);
  return out;
}

} // namespace nscov
