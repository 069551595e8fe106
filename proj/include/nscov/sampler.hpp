#pragma once

// MCMC for the covariate-dependent mixture model
//
//   y(s,t)       = x(s,t)' beta + delta(s) + sum_j w_j[x(s,t)] theta_j(s,t) + eps
//   theta_j(.,t) = gamma_j theta_j(.,t-1) + e_j(.,t),  e_j(.,t) ~ N(0, tau_j^2 R_j)
//   delta        ~ N(0, tau0^2 R_0),                   eps ~ N(0, sigma^2)
//
// R_j is the correlation matrix of the sites under range rho_j. The chain is
// started from theta_j(.,0) = 0, i.e. the first time of each segment draws
// theta_j(.,t) ~ N(0, tau_j^2 R_j); this keeps gamma_j conjugate.
//
// One sweep: theta_j(.,t) blocks (t within j), delta, beta, sigma^2, tau0^2,
// tau_j^2, gamma_j, rho0, rho_j, alpha_jk. Everything except rho and alpha
// is a Gibbs draw; rho and alpha use Gaussian random-walk Metropolis-Hastings.

#include <nscov/covariance.hpp>
#include <nscov/dataset.hpp>
#include <nscov/errors.hpp>
#include <nscov/kernels.hpp>
#include <nscov/linalg.hpp>
#include <nscov/random.hpp>
#include <nscov/weights.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace nscov {

struct Hyperpriors {
  double beta_var = 100.0;      // beta_k ~ N(0, beta_var)
  double alpha_var = 100.0;     // alpha_jk ~ N(0, alpha_var), j >= 2
  double precision_shape = 0.1; // 1/sigma^2, 1/tau_j^2, 1/tau0^2 ~ Gamma(shape, rate)
  double precision_rate = 0.1;
  double rho_max = 2000.0;      // rho_j, rho0 ~ Uniform(0, rho_max)

  void validate() const {
    if (!(beta_var > 0.0 && alpha_var > 0.0 && precision_shape > 0.0 &&
          precision_rate > 0.0 && rho_max > 0.0))
      throw ArgumentError("Hyperpriors: all prior constants must be positive");
  }
};

struct ModelSpec {
  Eigen::Index components = 1; // M
  double kappa = 1.0;          // fixed kernel smoothness (1 = exponential)

  void validate() const {
    if (components < 1)
      throw ArgumentError("ModelSpec: need at least one component");
    if (!(kappa > 0.0 && kappa <= 2.0))
      throw ArgumentError("ModelSpec: kappa must lie in (0, 2]");
  }
};

struct ParamState {
  Eigen::VectorXd beta;  // p
  double sigma2 = 1.0;
  Eigen::MatrixXd alpha; // M x p, row 0 is zero
  Eigen::VectorXd rho;   // M
  Eigen::VectorXd tau2;  // M, innovation variances
  Eigen::VectorXd gamma; // M
  double rho0 = 500.0;
  double tau0_2 = 1.0;
  Eigen::VectorXd delta;              // N
  std::vector<Eigen::MatrixXd> theta; // M of N x T

  Eigen::Index components() const { return rho.size(); }

  WeightScheme weights() const { return WeightScheme::multinomial_logistic(alpha, false); }
};

// Relabel components: component j of the result is component perm[j] of s.
inline ParamState permute_components(const ParamState &s,
                                     const std::vector<Eigen::Index> &perm) {
  const Eigen::Index m = s.components();
  if (static_cast<Eigen::Index>(perm.size()) != m)
    throw ArgumentError("permute_components: permutation size mismatch");
  const bool latent = !s.theta.empty();
  if (latent && static_cast<Eigen::Index>(s.theta.size()) != m)
    throw ArgumentError("permute_components: latent field count mismatch");
  ParamState out = s;
  for (Eigen::Index j = 0; j < m; ++j) {
    const Eigen::Index src = perm[static_cast<std::size_t>(j)];
    out.alpha.row(j) = s.alpha.row(src);
    out.rho(j) = s.rho(src);
    out.tau2(j) = s.tau2(src);
    out.gamma(j) = s.gamma(src);
    if (latent)
      out.theta[static_cast<std::size_t>(j)] = s.theta[static_cast<std::size_t>(src)];
  }
  return out;
}

// Induced covariance model of a parameter state. Each component kernel carries
// the stationary marginal variance tau_j^2 / (1 - gamma_j^2) of the AR(1) latent
// process, so cov_mu is the covariance of mu under stationarity.
inline CovModel to_cov_model(const ParamState &s, double kappa = 1.0) {
  std::vector<SpaceTimeKernel> kernels;
  for (Eigen::Index j = 0; j < s.components(); ++j) {
    const double g = s.gamma(j);
    kernels.emplace_back(SpatialKernel(s.rho(j), s.tau2(j) / (1.0 - g * g), kappa), g);
  }
  return CovModel(std::move(kernels), s.weights(), SpatialKernel(s.rho0, s.tau0_2, kappa),
                  s.sigma2);
}

// Weights of component j on every cell with finite covariates (NaN elsewhere).
inline std::vector<Eigen::MatrixXd> cell_weights(const Eigen::MatrixXd &alpha,
                                                 const Dataset &data) {
  const Eigen::Index n = data.n_sites(), t = data.n_times(), m = alpha.rows();
  std::vector<Eigen::MatrixXd> w(static_cast<std::size_t>(m),
                                 Eigen::MatrixXd::Constant(n, t, std::numeric_limits<double>::quiet_NaN()));
  if (m == 1) {
    for (Eigen::Index tt = 0; tt < t; ++tt)
      for (Eigen::Index i = 0; i < n; ++i)
        if (data.X.row(data.cell(i, tt)).allFinite())
          w[0](i, tt) = 1.0;
    return w;
  }
  Eigen::VectorXd z(m);
  for (Eigen::Index tt = 0; tt < t; ++tt)
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto row = data.X.row(data.cell(i, tt));
      if (!row.allFinite())
        continue;
      z.noalias() = alpha * row.transpose();
      const Eigen::VectorXd s = WeightScheme::softmax(z);
      for (Eigen::Index j = 0; j < m; ++j)
        w[static_cast<std::size_t>(j)](i, tt) = std::sqrt(s(j));
    }
  return w;
}

inline Eigen::MatrixXd latent_mu(const ParamState &s, const Dataset &data) {
  const auto w = cell_weights(s.alpha, data);
  Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(data.n_sites(), data.n_times());
  for (std::size_t j = 0; j < w.size(); ++j)
    mu += w[j].cwiseProduct(s.theta[j]);
  return mu;
}

inline Eigen::MatrixXd mean_trend(const Eigen::VectorXd &beta, const Dataset &data) {
  const Eigen::VectorXd xb = data.X * beta;
  return Eigen::Map<const Eigen::MatrixXd>(xb.data(), data.n_sites(), data.n_times());
}

// AR(1) innovations theta_t - gamma theta_{t-1}, restarting at segment starts.
inline Eigen::MatrixXd innovations(const Eigen::MatrixXd &theta, double gamma,
                                   const Dataset &data) {
  Eigen::MatrixXd e = theta;
  for (Eigen::Index t = 1; t < theta.cols(); ++t)
    if (data.linked(t))
      e.col(t) -= gamma * theta.col(t - 1);
  return e;
}

namespace detail {

struct SpatialFactor {
  JitteredCholesky chol;
  Eigen::MatrixXd precision; // R^{-1}
  double log_det = 0.0;
};

inline SpatialFactor make_factor(double range, double kappa, const Eigen::MatrixX2d &coords) {
  SpatialFactor f;
  f.chol = factorize_with_jitter(correlation_matrix(SpatialKernel(range, 1.0, kappa), coords),
                                 "spatial correlation");
  f.precision = spd_inverse(f.chol);
  f.log_det = f.chol.log_det();
  return f;
}

// sum over columns of e_t' R^{-1} e_t
inline double quad_form_sum(const JitteredCholesky &chol, const Eigen::MatrixXd &e) {
  const Eigen::MatrixXd v = chol.llt.matrixL().solve(e);
  return v.squaredNorm();
}

inline double log_normal_pdf(double x, double mean, double var) {
  return -0.5 * (std::log(2.0 * std::numbers::pi * var) + (x - mean) * (x - mean) / var);
}

// Log density of a variance whose precision is Gamma(shape, rate).
inline double log_inverse_gamma_pdf(double v, double shape, double rate) {
  if (!(v > 0.0))
    return -std::numeric_limits<double>::infinity();
  return shape * std::log(rate) - std::lgamma(shape) - (shape + 1.0) * std::log(v) - rate / v;
}

// Columns of X (rows restricted to observed cells) that are linear
// combinations of earlier columns.
inline std::vector<Eigen::Index> collinear_columns(const Eigen::MatrixXd &xobs) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xobs);
  std::vector<Eigen::Index> out;
  if (qr.rank() == xobs.cols())
    return out;
  const auto perm = qr.colsPermutation().indices();
  for (Eigen::Index k = qr.rank(); k < xobs.cols(); ++k)
    out.push_back(perm(k));
  std::sort(out.begin(), out.end());
  return out;
}

} // namespace detail

// Rows of X for observed cells, in (t, i) order.
inline Eigen::MatrixXd observed_design(const Dataset &data) {
  Eigen::MatrixXd xo(data.n_observed(), data.n_covariates());
  Eigen::Index r = 0;
  for (Eigen::Index t = 0; t < data.n_times(); ++t)
    for (Eigen::Index i = 0; i < data.n_sites(); ++i)
      if (data.observed(i, t))
        xo.row(r++) = data.X.row(data.cell(i, t));
  return xo;
}

// Throws NumericalError naming collinear design columns (only when data exist).
inline void check_design_rank(const Dataset &data) {
  if (data.n_observed() == 0)
    return;
  const auto bad = detail::collinear_columns(observed_design(data));
  if (bad.empty())
    return;
  std::ostringstream msg;
  msg << "design matrix is rank deficient on observed cells; collinear columns:";
  for (auto k : bad)
    msg << ' ' << data.covariate_names[static_cast<std::size_t>(k)];
  throw NumericalError(msg.str());
}

// Joint log density of (y, theta, delta, parameters) up to the point mass on
// alpha_1 = 0. Computed from scratch; used for diagnostics and tests.
inline double log_joint_density(const ParamState &s, const Dataset &data,
                                const ModelSpec &spec, const Hyperpriors &hyper) {
  using detail::log_normal_pdf;
  const double ninf = -std::numeric_limits<double>::infinity();
  const Eigen::Index n = data.n_sites(), t = data.n_times(), m = s.components();
  const Eigen::MatrixX2d coords = data.coords();

  const Eigen::MatrixXd fit = mean_trend(s.beta, data) + latent_mu(s, data);
  double lp = 0.0;
  for (Eigen::Index tt = 0; tt < t; ++tt)
    for (Eigen::Index i = 0; i < n; ++i)
      if (data.observed(i, tt))
        lp += log_normal_pdf(data.y(i, tt), fit(i, tt) + s.delta(i), s.sigma2);

  const double log2pi = std::log(2.0 * std::numbers::pi);
  for (Eigen::Index j = 0; j < m; ++j) {
    if (!(s.rho(j) > 0.0 && s.rho(j) < hyper.rho_max) || !(s.gamma(j) > 0.0 && s.gamma(j) < 1.0))
      return ninf;
    const auto f = detail::make_factor(s.rho(j), spec.kappa, coords);
    const Eigen::MatrixXd e = innovations(s.theta[static_cast<std::size_t>(j)], s.gamma(j), data);
    const double nt = static_cast<double>(n * t);
    lp += -0.5 * nt * (log2pi + std::log(s.tau2(j))) - 0.5 * static_cast<double>(t) * f.log_det -
          0.5 * detail::quad_form_sum(f.chol, e) / s.tau2(j);
    lp += detail::log_inverse_gamma_pdf(s.tau2(j), hyper.precision_shape, hyper.precision_rate);
    lp += -std::log(hyper.rho_max);
    if (j > 0)
      for (Eigen::Index k = 0; k < s.alpha.cols(); ++k)
        lp += log_normal_pdf(s.alpha(j, k), 0.0, hyper.alpha_var);
  }
  if (!(s.rho0 > 0.0 && s.rho0 < hyper.rho_max))
    return ninf;
  const auto f0 = detail::make_factor(s.rho0, spec.kappa, coords);
  lp += -0.5 * static_cast<double>(n) * (log2pi + std::log(s.tau0_2)) - 0.5 * f0.log_det -
        0.5 * detail::quad_form_sum(f0.chol, s.delta) / s.tau0_2;
  lp += detail::log_inverse_gamma_pdf(s.tau0_2, hyper.precision_shape, hyper.precision_rate);
  lp += -std::log(hyper.rho_max);
  lp += detail::log_inverse_gamma_pdf(s.sigma2, hyper.precision_shape, hyper.precision_rate);
  for (Eigen::Index k = 0; k < s.beta.size(); ++k)
    lp += log_normal_pdf(s.beta(k), 0.0, hyper.beta_var);
  return lp;
}

// Draw (parameters, delta, theta) from the model prior on the data layout.
inline ParamState draw_from_prior(const Dataset &data, const ModelSpec &spec,
                                  const Hyperpriors &hyper, Rng &rng) {
  const Eigen::Index n = data.n_sites(), t = data.n_times(), p = data.n_covariates();
  const Eigen::Index m = spec.components;
  const double sb = std::sqrt(hyper.beta_var), sa = std::sqrt(hyper.alpha_var);
  const auto precision_var = [&] {
    return inverse_gamma_draw(hyper.precision_shape, hyper.precision_rate, rng);
  };
  ParamState s;
  s.beta = sb * std_normal_vector(p, rng);
  s.sigma2 = precision_var();
  s.alpha = Eigen::MatrixXd::Zero(m, p);
  for (Eigen::Index j = 1; j < m; ++j)
    for (Eigen::Index k = 0; k < p; ++k)
      s.alpha(j, k) = sa * std_normal(rng);
  s.rho.resize(m);
  s.tau2.resize(m);
  s.gamma.resize(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    s.tau2(j) = precision_var();
    s.gamma(j) = uniform01(rng);
    s.rho(j) = hyper.rho_max * uniform01(rng);
  }
  s.tau0_2 = precision_var();
  s.rho0 = hyper.rho_max * uniform01(rng);

  const Eigen::MatrixX2d coords = data.coords();
  const auto f0 = detail::make_factor(s.rho0, spec.kappa, coords);
  s.delta = std::sqrt(s.tau0_2) * Eigen::VectorXd(f0.chol.llt.matrixL() * std_normal_vector(n, rng));
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto f = detail::make_factor(s.rho(j), spec.kappa, coords);
    Eigen::MatrixXd th(n, t);
    const double sd = std::sqrt(s.tau2(j));
    for (Eigen::Index tt = 0; tt < t; ++tt) {
      th.col(tt) = sd * Eigen::VectorXd(f.chol.llt.matrixL() * std_normal_vector(n, rng));
      if (data.linked(tt))
        th.col(tt) += s.gamma(j) * th.col(tt - 1);
    }
    s.theta.push_back(std::move(th));
  }
  return s;
}

// Fresh responses y ~ N(x'beta + delta + mu, sigma^2) on the observed cells of
// data; missing cells stay NaN.
inline Eigen::MatrixXd simulate_response(const ParamState &s, const Dataset &data, Rng &rng) {
  const Eigen::MatrixXd fit = mean_trend(s.beta, data) + latent_mu(s, data);
  Eigen::MatrixXd y = data.y;
  const double sd = std::sqrt(s.sigma2);
  for (Eigen::Index t = 0; t < data.n_times(); ++t)
    for (Eigen::Index i = 0; i < data.n_sites(); ++i)
      if (data.observed(i, t))
        y(i, t) = fit(i, t) + s.delta(i) + sd * std_normal(rng);
  return y;
}

// Gaussian full conditional in information form.
struct GaussianConditional {
  Eigen::VectorXd mean;
  Eigen::MatrixXd precision;

  Eigen::MatrixXd covariance() const {
    return spd_inverse(factorize_with_jitter(precision, "conditional precision"));
  }
};

// Running Metropolis-Hastings statistics for one scalar block.
struct MhStat {
  std::string name;
  double log_step = 0.0;
  long tries_burn_in = 0, accepts_burn_in = 0;
  long tries = 0, accepts = 0; // after burn-in

  double step() const { return std::exp(log_step); }
  double acceptance() const {
    return tries > 0 ? static_cast<double>(accepts) / static_cast<double>(tries)
                     : std::numeric_limits<double>::quiet_NaN();
  }
  double acceptance_burn_in() const {
    return tries_burn_in > 0
               ? static_cast<double>(accepts_burn_in) / static_cast<double>(tries_burn_in)
               : std::numeric_limits<double>::quiet_NaN();
  }
};

class GibbsSampler {
public:
  GibbsSampler(Dataset data, ModelSpec spec, Hyperpriors hyper, ParamState init,
               std::uint64_t seed)
      : data_(std::move(data)), spec_(spec), hyper_(hyper), rng_(seed), coords_(data_.coords()) {
    data_.validate();
    spec_.validate();
    hyper_.validate();
    check_design_rank(data_);
    x_obs_ = observed_design(data_);
    xtx_ = x_obs_.transpose() * x_obs_;
    n_obs_ = x_obs_.rows();
    set_state(std::move(init));
  }

  const ParamState &state() const { return state_; }
  const Dataset &data() const { return data_; }
  const ModelSpec &spec() const { return spec_; }
  const Hyperpriors &hyperpriors() const { return hyper_; }
  Rng &rng() { return rng_; }

  void set_state(ParamState s) {
    check_shapes(s);
    state_ = std::move(s);
    factors_.clear();
    for (Eigen::Index j = 0; j < m(); ++j)
      factors_.push_back(detail::make_factor(state_.rho(j), spec_.kappa, coords_));
    trend_factor_ = detail::make_factor(state_.rho0, spec_.kappa, coords_);
    refresh_trend();
    refresh_weights();
  }

  // Replaces the response values; the missing-data pattern must not change.
  void set_responses(const Eigen::MatrixXd &y) {
    if (y.rows() != data_.n_sites() || y.cols() != data_.n_times())
      throw ArgumentError("set_responses: wrong shape");
    for (Eigen::Index t = 0; t < y.cols(); ++t)
      for (Eigen::Index i = 0; i < y.rows(); ++i)
        if (std::isnan(y(i, t)) != std::isnan(data_.y(i, t)))
          throw ArgumentError("set_responses: missing-data pattern differs");
    data_.y = y;
  }

  // Fitted latent effect mu = sum_j w_j theta_j on cells with covariates.
  const Eigen::MatrixXd &mu() const { return mu_; }

  double log_likelihood() const {
    double ss = 0.0;
    for_observed([&](Eigen::Index i, Eigen::Index t) {
      const double r = residual(i, t);
      ss += r * r;
    });
    return -0.5 * static_cast<double>(n_obs_) * std::log(2.0 * std::numbers::pi * state_.sigma2) -
           0.5 * ss / state_.sigma2;
  }

  // ---- full conditionals -------------------------------------------------

  // theta_j(., t) given its temporal neighbours, the data at time t, all other
  // components and the parameters.
  GaussianConditional theta_conditional(Eigen::Index j, Eigen::Index t) const {
    return solve_information(theta_information(j, t), "theta block precision");
  }

  GaussianConditional delta_conditional() const {
    return solve_information(delta_information(), "delta precision");
  }

  GaussianConditional beta_conditional() const {
    return solve_information(beta_information(), "beta precision");
  }

  // (delta, beta) jointly; the site effects and the intercept are strongly
  // confounded, so the sweep draws them as one block.
  GaussianConditional trend_conditional() const {
    return solve_information(trend_information(), "trend precision");
  }

  // ---- updates ------------------------------------------------------------

  void gibbs_theta_block(Eigen::Index j, Eigen::Index t) {
    const Eigen::VectorXd draw = draw_information(theta_information(j, t), "theta block precision");
    auto &th = state_.theta[static_cast<std::size_t>(j)];
    mu_.col(t) += w_[static_cast<std::size_t>(j)].col(t).cwiseProduct(draw - th.col(t));
    th.col(t) = draw;
  }

  void gibbs_delta() {
    state_.delta = draw_information(delta_information(), "delta precision");
  }

  void gibbs_beta() {
    state_.beta = draw_information(beta_information(), "beta precision");
    refresh_trend();
  }

  void gibbs_trend() {
    const Eigen::VectorXd z = draw_information(trend_information(), "trend precision");
    const Eigen::Index n = data_.n_sites();
    state_.delta = z.head(n);
    state_.beta = z.tail(z.size() - n);
    refresh_trend();
  }

  void gibbs_sigma2() {
    double ss = 0.0;
    for_observed([&](Eigen::Index i, Eigen::Index t) {
      const double r = residual(i, t);
      ss += r * r;
    });
    state_.sigma2 = conjugate_variance(ss, static_cast<double>(n_obs_), "sigma2");
  }

  void gibbs_tau0() {
    const double ss = detail::quad_form_sum(trend_factor_.chol, state_.delta);
    state_.tau0_2 = conjugate_variance(ss, static_cast<double>(data_.n_sites()), "tau0_2");
  }

  void gibbs_tau2(Eigen::Index j) {
    const auto ju = static_cast<std::size_t>(j);
    const Eigen::MatrixXd e = innovations(state_.theta[ju], state_.gamma(j), data_);
    const double ss = detail::quad_form_sum(factors_[ju].chol, e);
    state_.tau2(j) = conjugate_variance(
        ss, static_cast<double>(data_.n_sites() * data_.n_times()), "tau2");
  }

  // gamma_j | theta_j is N(B/A, tau^2/A) truncated to (0, 1), with
  // A = sum theta_{t-1}' Q theta_{t-1} and B = sum theta_{t-1}' Q theta_t over
  // linked pairs.
  void gibbs_gamma(Eigen::Index j) {
    const auto ju = static_cast<std::size_t>(j);
    const Eigen::MatrixXd &th = state_.theta[ju];
    const Eigen::MatrixXd &q = factors_[ju].precision;
    double a = 0.0, b = 0.0;
    for (Eigen::Index t = 1; t < data_.n_times(); ++t) {
      if (!data_.linked(t))
        continue;
      const Eigen::VectorXd qprev = q * th.col(t - 1);
      a += th.col(t - 1).dot(qprev);
      b += th.col(t).dot(qprev);
    }
    if (!(a > 0.0)) {
      state_.gamma(j) = detail::clamp_open(uniform01(rng_), 0.0, 1.0);
      return;
    }
    state_.gamma(j) = truncated_normal(b / a, std::sqrt(state_.tau2(j) / a), 0.0, 1.0, rng_);
  }

  bool mh_rho0(double step) {
    const double cur = state_.rho0;
    const double prop = cur + step * std_normal(rng_);
    if (!(prop > 0.0 && prop < hyper_.rho_max))
      return false;
    if (prop == cur)
      return true;
    const auto target = [&](const detail::SpatialFactor &f) {
      return -0.5 * f.log_det - 0.5 * detail::quad_form_sum(f.chol, state_.delta) / state_.tau0_2;
    };
    const double lcur = target(trend_factor_);
    require_finite(lcur, "rho0");
    auto f = detail::make_factor(prop, spec_.kappa, coords_);
    if (std::log(uniform01(rng_)) < target(f) - lcur) {
      state_.rho0 = prop;
      trend_factor_ = std::move(f);
      return true;
    }
    return false;
  }

  bool mh_rho(Eigen::Index j, double step) {
    const auto ju = static_cast<std::size_t>(j);
    const double cur = state_.rho(j);
    const double prop = cur + step * std_normal(rng_);
    if (!(prop > 0.0 && prop < hyper_.rho_max))
      return false;
    if (prop == cur)
      return true;
    const Eigen::MatrixXd e = innovations(state_.theta[ju], state_.gamma(j), data_);
    const double half_t = 0.5 * static_cast<double>(data_.n_times());
    const auto target = [&](const detail::SpatialFactor &f) {
      return -half_t * f.log_det - 0.5 * detail::quad_form_sum(f.chol, e) / state_.tau2(j);
    };
    const double lcur = target(factors_[ju]);
    require_finite(lcur, "rho");
    auto f = detail::make_factor(prop, spec_.kappa, coords_);
    if (std::log(uniform01(rng_)) < target(f) - lcur) {
      state_.rho(j) = prop;
      factors_[ju] = std::move(f);
      return true;
    }
    return false;
  }

  // alpha_jk for j >= 1 (alpha_0 is fixed at zero). The weights move every
  // component's contribution, so the target is the full data likelihood.
  bool mh_alpha(Eigen::Index j, Eigen::Index k, double step) {
    if (j < 1 || j >= m())
      throw ArgumentError("mh_alpha: component index must be in [1, M)");
    const double cur = state_.alpha(j, k);
    const double prop = cur + step * std_normal(rng_);
    if (prop == cur)
      return true;
    const double lcur = log_likelihood() + detail::log_normal_pdf(cur, 0.0, hyper_.alpha_var);
    require_finite(lcur, "alpha");

    Eigen::MatrixXd alpha = state_.alpha;
    alpha(j, k) = prop;
    auto w = cell_weights(alpha, data_);
    Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(data_.n_sites(), data_.n_times());
    for (std::size_t l = 0; l < w.size(); ++l)
      mu += w[l].cwiseProduct(state_.theta[l]);
    double ss = 0.0;
    for_observed([&](Eigen::Index i, Eigen::Index t) {
      const double r = data_.y(i, t) - xb_(i, t) - state_.delta(i) - mu(i, t);
      ss += r * r;
    });
    const double lprop = -0.5 * static_cast<double>(n_obs_) *
                             std::log(2.0 * std::numbers::pi * state_.sigma2) -
                         0.5 * ss / state_.sigma2 +
                         detail::log_normal_pdf(prop, 0.0, hyper_.alpha_var);
    if (std::log(uniform01(rng_)) < lprop - lcur) {
      state_.alpha = std::move(alpha);
      w_ = std::move(w);
      mu_ = std::move(mu);
      return true;
    }
    return false;
  }

  // ---- sweeps -------------------------------------------------------------

  // MH bookkeeping, one entry per scalar block, in scan order:
  // rho0, rho_1..rho_M, alpha_jk (j >= 2).
  std::vector<MhStat> &mh_stats() { return mh_; }
  const std::vector<MhStat> &mh_stats() const { return mh_; }

  void init_steps(double step_rho, double step_alpha) {
    mh_.clear();
    mh_.push_back({"rho0", std::log(step_rho)});
    for (Eigen::Index j = 0; j < m(); ++j)
      mh_.push_back({"rho[" + std::to_string(j + 1) + "]", std::log(step_rho)});
    for (Eigen::Index j = 1; j < m(); ++j)
      for (Eigen::Index k = 0; k < data_.n_covariates(); ++k)
        mh_.push_back({"alpha[" + std::to_string(j + 1) + "," + std::to_string(k + 1) + "]",
                       std::log(step_alpha)});
  }

  // One systematic scan. When adapt_gain > 0 the MH log step sizes move by
  // adapt_gain * (accepted - target). burn_in selects which counters are used.
  void sweep(long iteration = 0, bool burn_in = false, double adapt_gain = 0.0,
             double target_accept = 0.4) {
    if (mh_.empty())
      init_steps(50.0, 0.5);
    const Eigen::Index t = data_.n_times();
    guarded(iteration, "theta", [&] {
      for (Eigen::Index j = 0; j < m(); ++j)
        for (Eigen::Index tt = 0; tt < t; ++tt)
          gibbs_theta_block(j, tt);
    });
    guarded(iteration, "delta/beta", [&] { gibbs_trend(); });
    guarded(iteration, "sigma2", [&] { gibbs_sigma2(); });
    guarded(iteration, "tau0_2", [&] { gibbs_tau0(); });
    for (Eigen::Index j = 0; j < m(); ++j)
      guarded(iteration, "tau2[" + std::to_string(j + 1) + "]", [&] { gibbs_tau2(j); });
    for (Eigen::Index j = 0; j < m(); ++j)
      guarded(iteration, "gamma[" + std::to_string(j + 1) + "]", [&] { gibbs_gamma(j); });

    std::size_t slot = 0;
    const auto record = [&](bool accepted) {
      MhStat &st = mh_[slot++];
      if (burn_in) {
        ++st.tries_burn_in;
        st.accepts_burn_in += accepted ? 1 : 0;
      } else {
        ++st.tries;
        st.accepts += accepted ? 1 : 0;
      }
      if (adapt_gain > 0.0)
        st.log_step += adapt_gain * ((accepted ? 1.0 : 0.0) - target_accept);
    };
    guarded(iteration, mh_[slot].name, [&] { record(mh_rho0(mh_[slot].step())); });
    for (Eigen::Index j = 0; j < m(); ++j)
      guarded(iteration, mh_[slot].name, [&] { record(mh_rho(j, mh_[slot].step())); });
    for (Eigen::Index j = 1; j < m(); ++j)
      for (Eigen::Index k = 0; k < data_.n_covariates(); ++k)
        guarded(iteration, mh_[slot].name, [&] { record(mh_alpha(j, k, mh_[slot].step())); });
  }

private:
  // Precision matrix and linear term b (precision * mean = b).
  struct Information {
    Eigen::MatrixXd precision;
    Eigen::VectorXd b;
  };

  static GaussianConditional solve_information(Information info, const char *what) {
    const auto chol = factorize_with_jitter(info.precision, what);
    GaussianConditional c;
    c.mean = chol.llt.solve(info.b);
    c.precision = std::move(info.precision);
    return c;
  }

  Eigen::VectorXd draw_information(const Information &info, const char *what) {
    const auto chol = factorize_with_jitter(info.precision, what);
    return mvn_from_precision(info.b, chol, rng_);
  }

  Information theta_information(Eigen::Index j, Eigen::Index t) const {
    const Eigen::Index n = data_.n_sites(), tt = data_.n_times();
    const auto ju = static_cast<std::size_t>(j);
    const Eigen::MatrixXd &th = state_.theta[ju];
    const double g = state_.gamma(j), inv_tau = 1.0 / state_.tau2(j);
    const Eigen::MatrixXd &q = factors_[ju].precision;

    double prior_scale = 1.0;
    Eigen::VectorXd prior_target = Eigen::VectorXd::Zero(n);
    if (data_.linked(t))
      prior_target += g * th.col(t - 1);
    if (t + 1 < tt && data_.linked(t + 1)) {
      prior_scale += g * g;
      prior_target += g * th.col(t + 1);
    }
    Information info;
    info.precision = (prior_scale * inv_tau) * q;
    info.b = inv_tau * (q * prior_target);
    const double inv_s2 = 1.0 / state_.sigma2;
    const Eigen::MatrixXd &w = w_[ju];
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!data_.observed(i, t))
        continue;
      const double wi = w(i, t);
      const double z = residual(i, t) + wi * th(i, t);
      info.precision(i, i) += wi * wi * inv_s2;
      info.b(i) += wi * z * inv_s2;
    }
    return info;
  }

  Information delta_information() const {
    Information info;
    info.precision = trend_factor_.precision / state_.tau0_2;
    info.b = Eigen::VectorXd::Zero(data_.n_sites());
    const double inv_s2 = 1.0 / state_.sigma2;
    for_observed([&](Eigen::Index i, Eigen::Index t) {
      info.precision(i, i) += inv_s2;
      info.b(i) += (residual(i, t) + state_.delta(i)) * inv_s2;
    });
    return info;
  }

  Information beta_information() const {
    Information info;
    info.precision = xtx_ / state_.sigma2;
    info.precision.diagonal().array() += 1.0 / hyper_.beta_var;
    Eigen::VectorXd z(n_obs_);
    Eigen::Index r = 0;
    for_observed([&](Eigen::Index i, Eigen::Index t) {
      z(r++) = data_.y(i, t) - state_.delta(i) - mu_(i, t);
    });
    info.b = x_obs_.transpose() * z / state_.sigma2;
    return info;
  }

  Information trend_information() const {
    const Eigen::Index n = data_.n_sites(), p = data_.n_covariates();
    const double inv_s2 = 1.0 / state_.sigma2;
    Information info;
    info.precision = Eigen::MatrixXd::Zero(n + p, n + p);
    info.precision.topLeftCorner(n, n) = trend_factor_.precision / state_.tau0_2;
    info.precision.bottomRightCorner(p, p) = xtx_ * inv_s2;
    info.precision.bottomRightCorner(p, p).diagonal().array() += 1.0 / hyper_.beta_var;
    info.b = Eigen::VectorXd::Zero(n + p);
    for_observed([&](Eigen::Index i, Eigen::Index t) {
      const Eigen::VectorXd x = data_.x(i, t);
      const double z = (data_.y(i, t) - mu_(i, t)) * inv_s2;
      info.precision(i, i) += inv_s2;
      info.precision.block(i, n, 1, p) += inv_s2 * x.transpose();
      info.b(i) += z;
      info.b.tail(p) += z * x;
    });
    info.precision.block(n, 0, p, n) = info.precision.block(0, n, n, p).transpose();
    return info;
  }

  Eigen::Index m() const { return spec_.components; }

  template <typename F> void for_observed(F &&f) const {
    for (Eigen::Index t = 0; t < data_.n_times(); ++t)
      for (Eigen::Index i = 0; i < data_.n_sites(); ++i)
        if (data_.observed(i, t))
          f(i, t);
  }

  double residual(Eigen::Index i, Eigen::Index t) const {
    return data_.y(i, t) - xb_(i, t) - state_.delta(i) - mu_(i, t);
  }

  void refresh_trend() { xb_ = mean_trend(state_.beta, data_); }

  void refresh_weights() {
    w_ = cell_weights(state_.alpha, data_);
    mu_ = Eigen::MatrixXd::Zero(data_.n_sites(), data_.n_times());
    for (std::size_t j = 0; j < w_.size(); ++j)
      mu_ += w_[j].cwiseProduct(state_.theta[j]);
  }

  double conjugate_variance(double ss, double n, const char *what) {
    if (!std::isfinite(ss) || ss < 0.0 || (n > 0.0 && ss == 0.0))
      throw NumericalError(std::string(what) + ": nonpositive sum of squares");
    return inverse_gamma_draw(hyper_.precision_shape + 0.5 * n,
                              hyper_.precision_rate + 0.5 * ss, rng_);
  }

  static void require_finite(double v, const char *what) {
    if (!std::isfinite(v))
      throw NumericalError(std::string(what) + ": non-finite log target at current state");
  }

  template <typename F> static void guarded(long iteration, const std::string &name, F &&f) {
    try {
      f();
    } catch (const std::exception &e) {
      throw NumericalError("iteration " + std::to_string(iteration) + ", parameter " + name +
                           ": " + e.what());
    }
  }

  void check_shapes(const ParamState &s) const {
    const Eigen::Index n = data_.n_sites(), t = data_.n_times(), p = data_.n_covariates();
    const bool ok = s.beta.size() == p && s.alpha.rows() == m() && s.alpha.cols() == p &&
                    s.rho.size() == m() && s.tau2.size() == m() && s.gamma.size() == m() &&
                    s.delta.size() == n && static_cast<Eigen::Index>(s.theta.size()) == m();
    if (!ok)
      throw ArgumentError("GibbsSampler: parameter state does not match data/model dimensions");
    for (const auto &th : s.theta)
      if (th.rows() != n || th.cols() != t)
        throw ArgumentError("GibbsSampler: latent field has wrong shape");
    if (!(s.sigma2 > 0.0 && s.tau0_2 > 0.0) || (s.tau2.array() <= 0.0).any())
      throw ArgumentError("GibbsSampler: variances must be positive");
    if ((s.gamma.array() <= 0.0).any() || (s.gamma.array() >= 1.0).any())
      throw ArgumentError("GibbsSampler: gamma must lie in (0, 1)");
    if ((s.rho.array() <= 0.0).any() || (s.rho.array() >= hyper_.rho_max).any() ||
        !(s.rho0 > 0.0 && s.rho0 < hyper_.rho_max))
      throw ArgumentError("GibbsSampler: ranges must lie in (0, rho_max)");
  }

  Dataset data_;
  ModelSpec spec_;
  Hyperpriors hyper_;
  Rng rng_;
  Eigen::MatrixX2d coords_;
  Eigen::MatrixXd x_obs_, xtx_;
  Eigen::Index n_obs_ = 0;

  ParamState state_;
  std::vector<detail::SpatialFactor> factors_;
  detail::SpatialFactor trend_factor_;
  Eigen::MatrixXd xb_, mu_;
  std::vector<Eigen::MatrixXd> w_;
  std::vector<MhStat> mh_;
};

} // namespace nscov
