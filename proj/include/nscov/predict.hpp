#pragma once

// Posterior predictive distributions at space-time targets by composition:
// for each retained draw, krige delta and every theta_j from that draw's
// fields to the target, then add the nugget.
//
// Given the draw, theta_j(s*, t) is Gaussian with
//   mean  k' R^{-1} theta_j(., t)
//   var   tau_j^2 (1 - k' R^{-1} k) sum_{u = segment start}^{t} gamma_j^{2(t-u)}
// (kriging of each innovation). Beyond the last time T-1 the field is carried
// forward by the AR(1) recursion. Means and variances are combined across
// draws with the law of total variance; the median and interval come from
// simulated responses.

#include <nscov/chain.hpp>
#include <nscov/covariance.hpp>
#include <nscov/dataset.hpp>
#include <nscov/errors.hpp>
#include <nscov/kernels.hpp>
#include <nscov/linalg.hpp>
#include <nscov/random.hpp>
#include <nscov/sampler.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

namespace nscov {

struct PredictOptions {
  long samples_per_draw = 4; // simulated responses per draw for quantiles
  double level = 0.95;       // central interval probability
  std::uint64_t seed = 1;

  void validate() const {
    if (samples_per_draw < 1)
      throw ArgumentError("PredictOptions: samples_per_draw must be >= 1");
    if (!(level > 0.0 && level < 1.0))
      throw ArgumentError("PredictOptions: level must lie in (0, 1)");
  }
};

struct PredictionResult {
  Eigen::VectorXd mean;
  Eigen::VectorXd median;
  Eigen::VectorXd variance;
  Eigen::VectorXd sd;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Eigen::Index size() const { return mean.size(); }
};

struct ValidationMetrics {
  Eigen::Index n = 0;
  double mse = 0.0;     // mean (Y - posterior mean)^2
  double mad = 0.0;     // mean |Y - posterior median|
  double ave_var = 0.0; // mean predictive variance
  double med_sd = 0.0;  // median predictive SD
  double cov = 0.0;     // fraction of Y inside the intervals
};

// Linear-interpolation sample quantile (sorted input).
inline double sorted_quantile(const std::vector<double> &v, double q) {
  if (v.empty())
    throw ArgumentError("quantile of an empty sample");
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double sample_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return sorted_quantile(v, 0.5);
}

namespace detail {

// Kriging weights R^{-1} k for every target against the sites.
struct Kriging {
  Eigen::MatrixXd weights;  // N x n_targets
  Eigen::VectorXd residual; // 1 - k' R^{-1} k, clamped at 0
};

inline Kriging kriging(double range, double kappa, const Eigen::MatrixX2d &coords,
                       const std::vector<SpaceTimePoint> &targets) {
  const SpatialKernel kernel(range, 1.0, kappa);
  const auto chol = factorize_with_jitter(correlation_matrix(kernel, coords), "kriging");
  const Eigen::Index n = coords.rows();
  const auto nt = static_cast<Eigen::Index>(targets.size());
  Eigen::MatrixXd k(n, nt);
  for (Eigen::Index a = 0; a < nt; ++a)
    for (Eigen::Index i = 0; i < n; ++i)
      k(i, a) = kernel((coords.row(i) - targets[static_cast<std::size_t>(a)].s).norm());
  Kriging out;
  out.weights = chol.llt.solve(k);
  out.residual = (1.0 - (k.cwiseProduct(out.weights)).colwise().sum().array()).cwiseMax(0.0);
  return out;
}

} // namespace detail

// Predictive summaries at targets. Target times are dataset time indices;
// t >= T means T-1 + h for a forecast horizon h. Target covariates are in the
// dataset's standardized units.
inline PredictionResult predict_points(const PosteriorDraws &draws, const Dataset &data,
                                       const std::vector<SpaceTimePoint> &targets,
                                       const PredictOptions &options = {}) {
  options.validate();
  if (draws.draws.empty())
    throw ArgumentError("predict_points: no posterior draws");
  const Eigen::Index n = data.n_sites(), t_max = data.n_times(), p = data.n_covariates();
  const auto nt = static_cast<Eigen::Index>(targets.size());
  for (const auto &tg : targets) {
    if (tg.x.size() != p)
      throw ArgumentError("predict_points: target covariate dimension does not match data");
    if (!tg.x.allFinite())
      throw ArgumentError("predict_points: target covariates must be finite");
    if (tg.t < 0)
      throw ArgumentError("predict_points: target time index must be >= 0");
  }
  // Start of the segment containing each in-sample time.
  std::vector<Eigen::Index> seg_start(static_cast<std::size_t>(t_max));
  for (Eigen::Index t = 0; t < t_max; ++t)
    seg_start[static_cast<std::size_t>(t)] =
        data.linked(t) ? seg_start[static_cast<std::size_t>(t - 1)] : t;

  const Eigen::MatrixX2d coords = data.coords();
  const double kappa = draws.spec.kappa;
  const auto n_draws = static_cast<Eigen::Index>(draws.draws.size());
  const long reps = options.samples_per_draw;

  Eigen::MatrixXd means(nt, n_draws), vars(nt, n_draws);
  for (Eigen::Index d = 0; d < n_draws; ++d) {
    const ParamState &s = draws.draws[static_cast<std::size_t>(d)];
    if (s.delta.size() != n || s.beta.size() != p)
      throw ArgumentError("predict_points: draws do not match the dataset dimensions");
    const auto k0 = detail::kriging(s.rho0, kappa, coords, targets);
    std::vector<detail::Kriging> kj;
    for (Eigen::Index j = 0; j < s.components(); ++j)
      kj.push_back(detail::kriging(s.rho(j), kappa, coords, targets));
    const WeightScheme ws = s.weights();

    for (Eigen::Index a = 0; a < nt; ++a) {
      const SpaceTimePoint &tg = targets[static_cast<std::size_t>(a)];
      double m = tg.x.dot(s.beta) + k0.weights.col(a).dot(s.delta);
      double v = s.sigma2 + s.tau0_2 * k0.residual(a);
      const Eigen::VectorXd w = ws(tg.x);
      const Eigen::Index t_in = std::min<Eigen::Index>(tg.t, t_max - 1);
      const Eigen::Index horizon = tg.t - t_in;
      for (Eigen::Index j = 0; j < s.components(); ++j) {
        const auto ju = static_cast<std::size_t>(j);
        const double g = s.gamma(j), g2 = g * g;
        const Eigen::Index steps = t_in - seg_start[static_cast<std::size_t>(t_in)];
        // sum_{u=0}^{steps} g^{2u}
        const double acc = (1.0 - std::pow(g2, static_cast<double>(steps + 1))) / (1.0 - g2);
        double mj = kj[ju].weights.col(a).dot(s.theta[ju].col(t_in));
        double vj = s.tau2(j) * kj[ju].residual(a) * acc;
        if (horizon > 0) {
          const double gh = std::pow(g, static_cast<double>(horizon));
          mj *= gh;
          vj = gh * gh * vj +
               s.tau2(j) * (1.0 - std::pow(g2, static_cast<double>(horizon))) / (1.0 - g2);
        }
        m += w(j) * mj;
        v += w(j) * w(j) * vj;
      }
      means(a, d) = m;
      vars(a, d) = v;
    }
  }

  PredictionResult out;
  out.mean = means.rowwise().mean();
  const Eigen::VectorXd within = vars.rowwise().mean();
  const Eigen::VectorXd between =
      (means.colwise() - out.mean).cwiseAbs2().rowwise().sum() / static_cast<double>(n_draws);
  out.variance = within + between;
  out.sd = out.variance.cwiseSqrt();

  Rng rng(options.seed);
  out.median.resize(nt);
  out.lower.resize(nt);
  out.upper.resize(nt);
  const double tail = 0.5 * (1.0 - options.level);
  std::vector<double> sample(static_cast<std::size_t>(n_draws * reps));
  for (Eigen::Index a = 0; a < nt; ++a) {
    std::size_t r = 0;
    for (Eigen::Index d = 0; d < n_draws; ++d) {
      const double sd = std::sqrt(vars(a, d));
      for (long q = 0; q < reps; ++q)
        sample[r++] = means(a, d) + sd * std_normal(rng);
    }
    std::sort(sample.begin(), sample.end());
    out.median(a) = sorted_quantile(sample, 0.5);
    out.lower(a) = sorted_quantile(sample, tail);
    out.upper(a) = sorted_quantile(sample, 1.0 - tail);
  }
  return out;
}

inline ValidationMetrics validation_metrics(const Eigen::VectorXd &truth,
                                            const PredictionResult &result) {
  if (truth.size() != result.size() || result.median.size() != result.size() ||
      result.variance.size() != result.size() || result.lower.size() != result.size() ||
      result.upper.size() != result.size())
    throw ArgumentError("validation_metrics: truth and predictions differ in length");
  if (truth.size() == 0)
    throw ArgumentError("validation_metrics: no targets");
  ValidationMetrics m;
  m.n = truth.size();
  const double nd = static_cast<double>(m.n);
  m.mse = (truth - result.mean).squaredNorm() / nd;
  m.mad = (truth - result.median).cwiseAbs().sum() / nd;
  m.ave_var = result.variance.mean();
  std::vector<double> sds(result.sd.data(), result.sd.data() + result.sd.size());
  m.med_sd = sample_median(std::move(sds));
  Eigen::Index inside = 0;
  for (Eigen::Index a = 0; a < m.n; ++a)
    inside += (truth(a) >= result.lower(a) && truth(a) <= result.upper(a)) ? 1 : 0;
  m.cov = static_cast<double>(inside) / nd;
  return m;
}

// Observed-cell masks; mask(i, t) is true when cell (i, t) belongs to the set.
using CellMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct CvSplit {
  CellMask train;
  CellMask test;
};

// Uniform random holdout of round(fraction * n_observed) observed cells.
inline CvSplit cv_split(const Dataset &data, double holdout_fraction, std::uint64_t seed) {
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
    throw ArgumentError("cv_split: holdout fraction must lie in (0, 1)");
  const Eigen::Index n = data.n_sites(), t = data.n_times();
  std::vector<Eigen::Index> cells;
  for (Eigen::Index tt = 0; tt < t; ++tt)
    for (Eigen::Index i = 0; i < n; ++i)
      if (data.observed(i, tt))
        cells.push_back(data.cell(i, tt));
  const auto n_obs = static_cast<Eigen::Index>(cells.size());
  const auto n_test =
      static_cast<Eigen::Index>(std::llround(holdout_fraction * static_cast<double>(n_obs)));
  if (n_test < 1)
    throw ArgumentError("cv_split: holdout fraction leaves an empty test set");
  if (n_test >= n_obs)
    throw ArgumentError("cv_split: holdout fraction leaves an empty training set");
  Rng rng(seed);
  for (Eigen::Index c = 0; c < n_test; ++c) {
    const auto span = static_cast<double>(n_obs - c);
    const Eigen::Index r = std::min(c + static_cast<Eigen::Index>(uniform01(rng) * span), n_obs - 1);
    std::swap(cells[static_cast<std::size_t>(c)], cells[static_cast<std::size_t>(r)]);
  }
  CvSplit split;
  split.train = CellMask::Constant(n, t, false);
  split.test = CellMask::Constant(n, t, false);
  for (Eigen::Index c = 0; c < n_obs; ++c) {
    const Eigen::Index cell = cells[static_cast<std::size_t>(c)];
    (c < n_test ? split.test : split.train)(cell % n, cell / n) = true;
  }
  return split;
}

// Copy of data whose responses outside mask are set missing.
inline Dataset mask_responses(const Dataset &data, const CellMask &keep) {
  if (keep.rows() != data.n_sites() || keep.cols() != data.n_times())
    throw ArgumentError("mask_responses: mask shape does not match data");
  Dataset out = data;
  for (Eigen::Index t = 0; t < data.n_times(); ++t)
    for (Eigen::Index i = 0; i < data.n_sites(); ++i)
      if (!keep(i, t))
        out.y(i, t) = std::numeric_limits<double>::quiet_NaN();
  return out;
}

struct TargetSet {
  std::vector<SpaceTimePoint> points;
  Eigen::VectorXd truth;
  std::vector<CellProbe> cells;
};

// Targets (and observed truth) for the cells in mask, in (t, i) order.
inline TargetSet targets_from_mask(const Dataset &data, const CellMask &mask) {
  TargetSet out;
  std::vector<double> truth;
  for (Eigen::Index t = 0; t < data.n_times(); ++t)
    for (Eigen::Index i = 0; i < data.n_sites(); ++i)
      if (mask(i, t)) {
        SpaceTimePoint p;
        p.s = data.sites[static_cast<std::size_t>(i)].xy;
        p.t = static_cast<long>(t);
        p.x = data.x(i, t);
        out.points.push_back(std::move(p));
        truth.push_back(data.y(i, t));
        out.cells.push_back({i, t});
      }
  out.truth = Eigen::Map<Eigen::VectorXd>(truth.data(), static_cast<Eigen::Index>(truth.size()));
  return out;
}

} // namespace nscov
