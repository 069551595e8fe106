#pragma once

// Omnidirectional empirical variogram of same-day residual pairs
//   gamma_hat(h) = (1 / |D_h|) sum_t sum_{(s, s') in D_h} [r(s,t) - r(s',t)]^2
// where D_h holds the same-day pairs with distance in (h - eps, h + eps].
// Optionally stratified by a covariate (both members below the pooled median,
// one below, none below) and computed on day-standardized residuals.

#include <nscov/dataset.hpp>
#include <nscov/errors.hpp>
#include <nscov/sampler.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace nscov {

enum class Stratum { All, LowLow, LowHigh, HighHigh };
enum class ResidualKind { Raw, Standardized };

inline const char *stratum_name(Stratum s) {
  switch (s) {
  case Stratum::All: return "all";
  case Stratum::LowLow: return "low-low";
  case Stratum::LowHigh: return "low-high";
  case Stratum::HighHigh: return "high-high";
  }
  return "?";
}

inline const char *kind_name(ResidualKind k) {
  return k == ResidualKind::Raw ? "raw" : "standardized";
}

struct VariogramBins {
  Eigen::Index count = 25;
  double width = 25.0; // km; bin b covers (b * width, (b + 1) * width]

  void validate() const {
    if (count < 1 || !(width > 0.0))
      throw ArgumentError("VariogramBins: need count >= 1 and width > 0");
  }
  double half_width() const { return 0.5 * width; }
  double center(Eigen::Index b) const { return (static_cast<double>(b) + 0.5) * width; }
  // Bin index for distance h, or -1 when outside all bins.
  Eigen::Index bin_of(double h) const {
    if (!(h > 0.0))
      return -1;
    const double u = h / width;
    auto b = static_cast<Eigen::Index>(std::ceil(u)) - 1;
    return b < count ? b : -1;
  }
};

struct VariogramResult {
  Stratum stratum = Stratum::All;
  ResidualKind kind = ResidualKind::Raw;
  double half_width = 0.0;
  Eigen::VectorXd centers;
  Eigen::VectorXd estimate;        // NaN when the bin is empty
  Eigen::VectorXi counts;          // |D_h|
  std::vector<bool> defined;       // false for empty bins
};

struct OlsFit {
  Eigen::VectorXd beta;
  Eigen::MatrixXd residuals; // N x T, NaN on missing cells
};

// Pooled OLS of y on the chosen covariate columns (all when empty).
inline OlsFit ols_residuals(const Dataset &data, std::vector<Eigen::Index> columns = {}) {
  data.validate();
  if (columns.empty())
    for (Eigen::Index k = 0; k < data.n_covariates(); ++k)
      columns.push_back(k);
  for (auto k : columns)
    if (k < 0 || k >= data.n_covariates())
      throw ArgumentError("ols_residuals: design column out of range");
  const Eigen::Index n = data.n_sites(), t = data.n_times();
  const Eigen::Index n_obs = data.n_observed();
  const auto q = static_cast<Eigen::Index>(columns.size());
  Eigen::MatrixXd xo(n_obs, q);
  Eigen::VectorXd yo(n_obs);
  Eigen::Index r = 0;
  for (Eigen::Index tt = 0; tt < t; ++tt)
    for (Eigen::Index i = 0; i < n; ++i)
      if (data.observed(i, tt)) {
        for (Eigen::Index c = 0; c < q; ++c)
          xo(r, c) = data.X(data.cell(i, tt), columns[static_cast<std::size_t>(c)]);
        yo(r++) = data.y(i, tt);
      }
  const auto bad = detail::collinear_columns(xo);
  if (n_obs < q || !bad.empty()) {
    std::string msg = "ols_residuals: design is rank deficient on observed cells";
    for (auto k : bad)
      msg += " " + data.covariate_names[static_cast<std::size_t>(columns[static_cast<std::size_t>(k)])];
    throw NumericalError(msg);
  }
  OlsFit fit;
  fit.beta = xo.colPivHouseholderQr().solve(yo);
  fit.residuals = Eigen::MatrixXd::Constant(n, t, std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index tt = 0; tt < t; ++tt)
    for (Eigen::Index i = 0; i < n; ++i)
      if (data.observed(i, tt)) {
        double v = data.y(i, tt);
        for (Eigen::Index c = 0; c < q; ++c)
          v -= data.X(data.cell(i, tt), columns[static_cast<std::size_t>(c)]) * fit.beta(c);
        fit.residuals(i, tt) = v;
      }
  return fit;
}

// Residuals divided by each day's cross-site sample SD (n - 1 denominator).
// Days with fewer than two observations or zero spread become all-missing.
inline Eigen::MatrixXd standardize_by_day(const Eigen::MatrixXd &r) {
  Eigen::MatrixXd out = r;
  for (Eigen::Index t = 0; t < r.cols(); ++t) {
    double sum = 0.0, sum_sq = 0.0;
    Eigen::Index cnt = 0;
    for (Eigen::Index i = 0; i < r.rows(); ++i)
      if (!std::isnan(r(i, t))) {
        sum += r(i, t);
        ++cnt;
      }
    double sd = 0.0;
    if (cnt >= 2) {
      const double mean = sum / static_cast<double>(cnt);
      for (Eigen::Index i = 0; i < r.rows(); ++i)
        if (!std::isnan(r(i, t)))
          sum_sq += (r(i, t) - mean) * (r(i, t) - mean);
      sd = std::sqrt(sum_sq / static_cast<double>(cnt - 1));
    }
    if (sd > 0.0)
      out.col(t) /= sd;
    else
      out.col(t).setConstant(std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

// Pooled median of the covariate over the cells where residuals are observed.
inline double pooled_median(const Eigen::MatrixXd &covariate, const Eigen::MatrixXd &residuals) {
  std::vector<double> v;
  for (Eigen::Index t = 0; t < residuals.cols(); ++t)
    for (Eigen::Index i = 0; i < residuals.rows(); ++i)
      if (!std::isnan(residuals(i, t)) && std::isfinite(covariate(i, t)))
        v.push_back(covariate(i, t));
  if (v.empty())
    throw ArgumentError("pooled_median: no observed covariate values");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// Returns the All stratum first, followed by LowLow, LowHigh, HighHigh when a
// stratifying covariate (N x T, same layout as residuals) is given. A member is
// Low when its covariate value is strictly below the pooled median.
inline std::vector<VariogramResult>
empirical_variogram(const Eigen::MatrixXd &residuals, const Eigen::MatrixX2d &coords,
                    const VariogramBins &bins, ResidualKind kind,
                    const std::optional<Eigen::MatrixXd> &stratify = std::nullopt) {
  bins.validate();
  const Eigen::Index n = residuals.rows(), t = residuals.cols();
  if (coords.rows() != n)
    throw ArgumentError("empirical_variogram: coordinates do not match residual rows");
  if (stratify && (stratify->rows() != n || stratify->cols() != t))
    throw ArgumentError("empirical_variogram: stratifying covariate has wrong shape");
  const Eigen::MatrixXd r = kind == ResidualKind::Raw ? residuals : standardize_by_day(residuals);

  const std::size_t n_strata = stratify ? 4 : 1;
  std::vector<Eigen::VectorXd> sums(n_strata, Eigen::VectorXd::Zero(bins.count));
  std::vector<Eigen::VectorXi> counts(n_strata, Eigen::VectorXi::Zero(bins.count));
  const double median = stratify ? pooled_median(*stratify, r) : 0.0;

  Eigen::MatrixXi bin_of(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b)
      bin_of(a, b) = static_cast<int>(bins.bin_of((coords.row(a) - coords.row(b)).norm()));

  for (Eigen::Index tt = 0; tt < t; ++tt)
    for (Eigen::Index a = 0; a < n; ++a) {
      if (std::isnan(r(a, tt)))
        continue;
      for (Eigen::Index b = a + 1; b < n; ++b) {
        const int bin = bin_of(a, b);
        if (bin < 0 || std::isnan(r(b, tt)))
          continue;
        const double d = r(a, tt) - r(b, tt);
        sums[0](bin) += d * d;
        ++counts[0](bin);
        if (stratify) {
          const int lows = ((*stratify)(a, tt) < median ? 1 : 0) + ((*stratify)(b, tt) < median ? 1 : 0);
          const std::size_t s = lows == 2 ? 1 : lows == 1 ? 2 : 3;
          sums[s](bin) += d * d;
          ++counts[s](bin);
        }
      }
    }

  std::vector<VariogramResult> out;
  const Stratum labels[] = {Stratum::All, Stratum::LowLow, Stratum::LowHigh, Stratum::HighHigh};
  for (std::size_t s = 0; s < n_strata; ++s) {
    VariogramResult v;
    v.stratum = labels[s];
    v.kind = kind;
    v.half_width = bins.half_width();
    v.centers.resize(bins.count);
    v.estimate.resize(bins.count);
    v.counts = counts[s];
    v.defined.assign(static_cast<std::size_t>(bins.count), false);
    for (Eigen::Index b = 0; b < bins.count; ++b) {
      v.centers(b) = bins.center(b);
      if (counts[s](b) > 0) {
        v.estimate(b) = sums[s](b) / counts[s](b);
        v.defined[static_cast<std::size_t>(b)] = true;
      } else {
        v.estimate(b) = std::numeric_limits<double>::quiet_NaN();
      }
    }
    out.push_back(std::move(v));
  }
  return out;
}

// Column k of the covariate array as an N x T matrix.
inline Eigen::MatrixXd covariate_field(const Dataset &data, Eigen::Index k) {
  if (k < 0 || k >= data.n_covariates())
    throw ArgumentError("covariate_field: column out of range");
  const Eigen::VectorXd col = data.X.col(k);
  return Eigen::Map<const Eigen::MatrixXd>(col.data(), data.n_sites(), data.n_times());
}

} // namespace nscov
