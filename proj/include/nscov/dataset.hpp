#pragma once

// Space-time dataset on an N-site x T-time grid.
//
// Responses are an N x T matrix with NaN marking missing cells. Covariates are
// stored as an (N*T) x p matrix whose row t*N + i holds x(s_i, t); column 0 is
// the intercept. Time indices are consecutive; segment_start[t] marks the first
// time of each season so the AR(1) link t-1 -> t is broken there.

#include <nscov/errors.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <unordered_set>
#include <vector>

namespace nscov {

inline constexpr double kEarthRadiusKm = 6371.0;

struct Site {
  std::string id;
  double longitude = 0.0; // degrees
  double latitude = 0.0;  // degrees
  Eigen::RowVector2d xy = Eigen::RowVector2d::Zero(); // projected km
};

// x = R cos(phi0) lambda,  y = R cos(phi0) ln tan(pi/4 + phi/2)
// with lambda, phi in radians and phi0 the reference latitude.
inline Eigen::RowVector2d mercator_project(double longitude_deg, double latitude_deg,
                                           double reference_latitude_deg) {
  if (!(std::abs(latitude_deg) < 85.0) || !(std::abs(reference_latitude_deg) < 85.0))
    throw DomainError("mercator_project: latitude must satisfy |lat| < 85");
  constexpr double deg = std::numbers::pi / 180.0;
  const double scale = kEarthRadiusKm * std::cos(reference_latitude_deg * deg);
  const double phi = latitude_deg * deg;
  return {scale * longitude_deg * deg,
          scale * std::log(std::tan(std::numbers::pi / 4.0 + phi / 2.0))};
}

// Inverse of mercator_project; returns (longitude, latitude) in degrees.
inline Eigen::RowVector2d mercator_unproject(const Eigen::RowVector2d &xy,
                                             double reference_latitude_deg) {
  constexpr double deg = std::numbers::pi / 180.0;
  const double scale = kEarthRadiusKm * std::cos(reference_latitude_deg * deg);
  const double lon = xy(0) / scale / deg;
  const double lat = (2.0 * std::atan(std::exp(xy(1) / scale)) - std::numbers::pi / 2.0) / deg;
  return {lon, lat};
}

// Per-covariate centering and scaling; intercept is not included.
struct Standardization {
  std::vector<std::string> names;
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;

  double apply(std::size_t k, double raw) const {
    const auto kk = static_cast<Eigen::Index>(k);
    return (raw - mean(kk)) / sd(kk);
  }
  double invert(std::size_t k, double standardized) const {
    const auto kk = static_cast<Eigen::Index>(k);
    return standardized * sd(kk) + mean(kk);
  }
};

struct Dataset {
  std::vector<Site> sites;
  std::vector<std::string> dates;   // label per time index
  std::vector<long> days;           // day number per time index
  std::vector<char> segment_start;  // 1 where the AR(1) link to t-1 is broken
  std::vector<std::string> covariate_names; // p names, first is "intercept"
  Eigen::MatrixXd y;                // N x T, NaN = missing
  Eigen::MatrixXd X;                // (N*T) x p
  Standardization standardization;
  double reference_latitude = 0.0;

  Eigen::Index n_sites() const { return static_cast<Eigen::Index>(sites.size()); }
  Eigen::Index n_times() const { return y.cols(); }
  Eigen::Index n_covariates() const { return X.cols(); }

  Eigen::Index cell(Eigen::Index i, Eigen::Index t) const { return t * n_sites() + i; }

  bool observed(Eigen::Index i, Eigen::Index t) const { return !std::isnan(y(i, t)); }

  Eigen::Index n_observed() const {
    Eigen::Index n = 0;
    for (Eigen::Index t = 0; t < y.cols(); ++t)
      for (Eigen::Index i = 0; i < y.rows(); ++i)
        n += observed(i, t) ? 1 : 0;
    return n;
  }

  auto x(Eigen::Index i, Eigen::Index t) const { return X.row(cell(i, t)).transpose(); }

  Eigen::MatrixX2d coords() const {
    Eigen::MatrixX2d c(n_sites(), 2);
    for (Eigen::Index i = 0; i < n_sites(); ++i)
      c.row(i) = sites[static_cast<std::size_t>(i)].xy;
    return c;
  }

  bool linked(Eigen::Index t) const {
    return t > 0 && !segment_start[static_cast<std::size_t>(t)];
  }

  Eigen::Index covariate_index(const std::string &name) const {
    for (std::size_t k = 0; k < covariate_names.size(); ++k)
      if (covariate_names[k] == name)
        return static_cast<Eigen::Index>(k);
    throw ArgumentError("unknown covariate '" + name + "'");
  }

  // Structural checks shared by every consumer.
  void validate() const {
    const Eigen::Index n = n_sites(), t = n_times();
    if (n < 1 || t < 1)
      throw DataError("dataset: need at least one site and one time");
    if (y.rows() != n)
      throw DataError("dataset: response rows do not match site count");
    if (X.rows() != n * t || X.cols() < 1)
      throw DataError("dataset: covariate array must be (N*T) x p with p >= 1");
    if (static_cast<Eigen::Index>(covariate_names.size()) != X.cols())
      throw DataError("dataset: covariate names do not match columns");
    if (static_cast<Eigen::Index>(segment_start.size()) != t ||
        static_cast<Eigen::Index>(days.size()) != t ||
        static_cast<Eigen::Index>(dates.size()) != t)
      throw DataError("dataset: time metadata does not match time count");
    std::unordered_set<std::string> ids;
    for (const auto &s : sites)
      if (!ids.insert(s.id).second)
        throw DataError("dataset: duplicate site id '" + s.id + "'");
    for (Eigen::Index tt = 0; tt < t; ++tt)
      for (Eigen::Index i = 0; i < n; ++i)
        if (observed(i, tt) && !X.row(cell(i, tt)).allFinite())
          throw DataError("dataset: observed cell (site " + sites[static_cast<std::size_t>(i)].id +
                          ", time " + std::to_string(tt) + ") has missing covariates");
  }
};

// Builds a dataset from projected coordinates and an already-standardized
// covariate array (used by simulation and tests). Days are 0..T-1 in one segment.
inline Dataset make_grid_dataset(const Eigen::MatrixX2d &coords, Eigen::MatrixXd y,
                                 Eigen::MatrixXd X,
                                 std::vector<std::string> covariate_names = {}) {
  Dataset d;
  const Eigen::Index n = coords.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    Site s;
    s.id = "s" + std::to_string(i + 1);
    s.xy = coords.row(i);
    d.sites.push_back(s);
  }
  const Eigen::Index t = y.cols();
  for (Eigen::Index tt = 0; tt < t; ++tt) {
    d.dates.push_back(std::to_string(tt));
    d.days.push_back(static_cast<long>(tt));
    d.segment_start.push_back(tt == 0 ? 1 : 0);
  }
  if (covariate_names.empty()) {
    covariate_names.push_back("intercept");
    for (Eigen::Index k = 1; k < X.cols(); ++k)
      covariate_names.push_back("x" + std::to_string(k));
  }
  d.covariate_names = std::move(covariate_names);
  d.y = std::move(y);
  d.X = std::move(X);
  const auto p = d.X.cols();
  d.standardization.names.assign(d.covariate_names.begin() + 1, d.covariate_names.end());
  d.standardization.mean = Eigen::VectorXd::Zero(p - 1);
  d.standardization.sd = Eigen::VectorXd::Ones(p - 1);
  d.validate();
  return d;
}

} // namespace nscov
