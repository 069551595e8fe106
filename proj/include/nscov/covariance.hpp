#pragma once

// Nonstationary mixture covariance
//   Cov[mu(p), mu(q)] = sum_j w_j(x_p) w_j(x_q) K_j(|s_p - s_q|, t_p - t_q)
// plus a stationary spatial trend kernel and a nugget.

#include <nscov/errors.hpp>
#include <nscov/kernels.hpp>
#include <nscov/linalg.hpp>
#include <nscov/random.hpp>
#include <nscov/weights.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

namespace nscov {

struct SpaceTimePoint {
  Eigen::RowVector2d s = Eigen::RowVector2d::Zero();
  long t = 0;
  Eigen::VectorXd x;
};

class CovModel {
public:
  CovModel(std::vector<SpaceTimeKernel> kernels, WeightScheme weights,
           SpatialKernel trend, double nugget)
      : kernels_(std::move(kernels)), weights_(std::move(weights)),
        trend_(trend), nugget_(nugget) {
    if (kernels_.empty())
      throw ArgumentError("CovModel: need at least one component");
    if (static_cast<Eigen::Index>(kernels_.size()) != weights_.components())
      throw ArgumentError("CovModel: kernel count must equal weight components");
    if (!(nugget_ > 0.0))
      throw ArgumentError("CovModel: nugget variance must be positive");
  }

  std::size_t components() const { return kernels_.size(); }
  const std::vector<SpaceTimeKernel> &kernels() const { return kernels_; }
  const WeightScheme &weights() const { return weights_; }
  const SpatialKernel &trend() const { return trend_; }
  double nugget() const { return nugget_; }

private:
  std::vector<SpaceTimeKernel> kernels_;
  WeightScheme weights_;
  SpatialKernel trend_;
  double nugget_;
};

inline double cov_mu_weighted(const CovModel &model, const Eigen::VectorXd &wp,
                              const Eigen::VectorXd &wq, double h_s, long h_t) {
  double c = 0.0;
  for (std::size_t j = 0; j < model.components(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    c += wp(jj) * wq(jj) * model.kernels()[j](h_s, h_t);
  }
  return c;
}

inline double cov_mu(const CovModel &model, const SpaceTimePoint &p,
                     const SpaceTimePoint &q) {
  const double h_s = (p.s - q.s).norm();
  return cov_mu_weighted(model, model.weights()(p.x), model.weights()(q.x), h_s,
                         p.t - q.t);
}

// Dense covariance of the points: mixture term, optionally the spatial trend
// kernel, optionally the nugget on the diagonal. The matrix is checked for
// positive semi-definiteness with the jittered Cholesky (the returned matrix
// itself carries no jitter).
inline Eigen::MatrixXd build_cov_matrix(const CovModel &model,
                                        const std::vector<SpaceTimePoint> &points,
                                        bool include_trend, bool include_nugget) {
  if (points.empty())
    throw ArgumentError("build_cov_matrix: no points");
  const auto n = static_cast<Eigen::Index>(points.size());
  std::vector<Eigen::VectorXd> w;
  w.reserve(points.size());
  for (const auto &p : points)
    w.push_back(model.weights()(p.x));

  Eigen::MatrixXd c(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k <= i; ++k) {
      const auto &p = points[static_cast<std::size_t>(i)];
      const auto &q = points[static_cast<std::size_t>(k)];
      const double h_s = (p.s - q.s).norm();
      double v = cov_mu_weighted(model, w[static_cast<std::size_t>(i)],
                                 w[static_cast<std::size_t>(k)], h_s, p.t - q.t);
      if (include_trend)
        v += model.trend()(h_s);
      c(i, k) = v;
      c(k, i) = v;
    }
  }
  if (include_nugget)
    c.diagonal().array() += model.nugget();
  if (c.diagonal().maxCoeff() > 0.0)
    factorize_with_jitter(c, "build_cov_matrix");
  return c;
}

struct EmpiricalCovariance {
  Eigen::MatrixXd cov;
  Eigen::MatrixXd standard_error;
  std::size_t draws = 0;
};

// Brute-force Monte Carlo estimate of the mixture covariance: draw each latent
// theta_j jointly at the points from its own space-time kernel, form
// mu = sum_j w_j theta_j, and average outer products (the mean is known to be
// zero). Standard errors are per-entry sample SDs of the products / sqrt(n).
inline EmpiricalCovariance empirical_cov_oracle(const CovModel &model,
                                                const std::vector<SpaceTimePoint> &points,
                                                std::size_t n_draws,
                                                std::uint64_t seed) {
  if (n_draws < 1000)
    throw ArgumentError("empirical_cov_oracle: need at least 1000 draws");
  if (points.empty())
    throw ArgumentError("empirical_cov_oracle: no points");
  const auto n = static_cast<Eigen::Index>(points.size());
  const std::size_t m = model.components();

  // Per-component factor: diag(w_j) * chol(K_j).
  std::vector<Eigen::MatrixXd> factors;
  for (std::size_t j = 0; j < m; ++j) {
    const auto &kernel = model.kernels()[j];
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index a = 0; a < n; ++a)
      for (Eigen::Index b = 0; b <= a; ++b) {
        const auto &p = points[static_cast<std::size_t>(a)];
        const auto &q = points[static_cast<std::size_t>(b)];
        k(a, b) = k(b, a) = kernel((p.s - q.s).norm(), p.t - q.t);
      }
    Eigen::VectorXd wj(n);
    for (Eigen::Index a = 0; a < n; ++a)
      wj(a) = model.weights()(points[static_cast<std::size_t>(a)].x)(
          static_cast<Eigen::Index>(j));
    if (kernel.tau2() == 0.0) {
      factors.emplace_back(Eigen::MatrixXd::Zero(n, n));
      continue;
    }
    const auto chol = factorize_with_jitter(k, "empirical_cov_oracle");
    Eigen::MatrixXd l = chol.llt.matrixL();
    factors.emplace_back(wj.asDiagonal() * l);
  }

  Rng rng(seed);
  constexpr std::size_t batch = 2000;
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd sum_sq = Eigen::MatrixXd::Zero(n, n);
  std::size_t done = 0;
  while (done < n_draws) {
    const auto b = static_cast<Eigen::Index>(std::min(batch, n_draws - done));
    Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(n, b);
    for (std::size_t j = 0; j < m; ++j) {
      Eigen::MatrixXd z(n, b);
      for (Eigen::Index c = 0; c < b; ++c)
        for (Eigen::Index r = 0; r < n; ++r)
          z(r, c) = std_normal(rng);
      mu.noalias() += factors[j] * z;
    }
    sum.noalias() += mu * mu.transpose();
    for (Eigen::Index c = 0; c < b; ++c) {
      const Eigen::VectorXd v = mu.col(c);
      sum_sq.noalias() += (v * v.transpose()).cwiseAbs2();
    }
    done += static_cast<std::size_t>(b);
  }

  const double nd = static_cast<double>(n_draws);
  EmpiricalCovariance out;
  out.draws = n_draws;
  out.cov = sum / nd;
  const Eigen::MatrixXd var = (sum_sq / nd - out.cov.cwiseAbs2()) * (nd / (nd - 1.0));
  out.standard_error = (var.cwiseMax(0.0) / nd).cwiseSqrt();
  return out;
}

} // namespace nscov
