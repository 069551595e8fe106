#pragma once

#include <nscov/covariance.hpp>
#include <nscov/dataset.hpp>
#include <nscov/sampler.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace nscov {

struct LagProbe {
  double h_s = 0.0;
  long h_t = 0;
};

struct CellProbe {
  Eigen::Index site = 0;
  Eigen::Index time = 0;
};

struct SamplerConfig {
  long n_iter = 20000;
  long burn_in = 10000;
  long thin = 1;
  double step_alpha = 0.5;  // initial random-walk SD for alpha_jk
  double step_rho = 50.0;   // initial random-walk SD for rho_j and rho0 (km)
  bool adapt = true;        // Robbins-Monro step adaptation during burn-in
  double target_accept = 0.4;
  std::uint64_t seed = 1;
  double init_rho = 500.0;
  double init_gamma = 0.5;
  std::vector<LagProbe> monitor_lags{{0.0, 0}, {100.0, 0}, {0.0, 2}};
  std::vector<CellProbe> monitor_cells; // empty: three observed cells chosen automatically

  void validate() const {
    if (n_iter < 1 || burn_in < 0 || burn_in >= n_iter)
      throw ArgumentError("SamplerConfig: need 0 <= burn_in < n_iter");
    if (thin < 1)
      throw ArgumentError("SamplerConfig: thin must be >= 1");
    if (!(step_alpha > 0.0) || !(step_rho > 0.0))
      throw ArgumentError("SamplerConfig: step sizes must be positive");
    if (!(target_accept > 0.0 && target_accept < 1.0))
      throw ArgumentError("SamplerConfig: target acceptance must lie in (0, 1)");
    if (!(init_rho > 0.0) || !(init_gamma > 0.0 && init_gamma < 1.0))
      throw ArgumentError("SamplerConfig: invalid initial values");
  }
};

// Per-iteration values of label-invariant quantities: cov_mu at fixed lags for
// two points with baseline covariates (intercept only), and mu at fixed cells.
struct MonitorTrace {
  std::vector<LagProbe> lags;
  std::vector<CellProbe> cells;
  Eigen::MatrixXd cov;      // n_iter x lags
  Eigen::MatrixXd mu;       // n_iter x cells
};

struct PosteriorDraws {
  ModelSpec spec;
  Hyperpriors hyper;
  SamplerConfig config;
  std::vector<ParamState> draws;
  std::vector<MhStat> mh;
};

struct ChainResult {
  PosteriorDraws posterior;
  MonitorTrace trace;
};

// Probe covariance at a lag for two points whose covariates are all at their
// mean (intercept only).
inline double baseline_cov(const CovModel &model, Eigen::Index p, const LagProbe &lag) {
  SpaceTimePoint a, b;
  a.x = Eigen::VectorXd::Zero(p);
  a.x(0) = 1.0;
  b.x = a.x;
  b.s = Eigen::RowVector2d(lag.h_s, 0.0);
  b.t = lag.h_t;
  return cov_mu(model, a, b);
}

// OLS start for beta, zero latent fields, residual-variance heuristics for the
// variances, rho at init_rho, gamma at init_gamma, alpha at zero.
inline ParamState initial_state(const Dataset &data, const ModelSpec &spec,
                                const Hyperpriors &hyper, const SamplerConfig &config) {
  const Eigen::Index n = data.n_sites(), t = data.n_times(), p = data.n_covariates();
  const Eigen::Index m = spec.components;
  ParamState s;
  s.beta = Eigen::VectorXd::Zero(p);
  double resid_var = 1.0;
  const Eigen::Index n_obs = data.n_observed();
  if (n_obs > p) {
    const Eigen::MatrixXd xo = observed_design(data);
    Eigen::VectorXd yo(n_obs);
    Eigen::Index r = 0;
    for (Eigen::Index tt = 0; tt < t; ++tt)
      for (Eigen::Index i = 0; i < n; ++i)
        if (data.observed(i, tt))
          yo(r++) = data.y(i, tt);
    s.beta = xo.colPivHouseholderQr().solve(yo);
    const double v = (yo - xo * s.beta).squaredNorm() / static_cast<double>(n_obs - p);
    if (v > 0.0 && std::isfinite(v))
      resid_var = v;
  }
  const double share = resid_var / 3.0;
  s.sigma2 = share;
  s.tau0_2 = share;
  const double rho = config.init_rho < hyper.rho_max ? config.init_rho : 0.5 * hyper.rho_max;
  s.rho0 = rho;
  s.alpha = Eigen::MatrixXd::Zero(m, p);
  s.rho = Eigen::VectorXd::Constant(m, rho);
  s.gamma = Eigen::VectorXd::Constant(m, config.init_gamma);
  s.tau2 = Eigen::VectorXd::Constant(m, share * (1.0 - config.init_gamma * config.init_gamma));
  s.delta = Eigen::VectorXd::Zero(n);
  s.theta.assign(static_cast<std::size_t>(m), Eigen::MatrixXd::Zero(n, t));
  return s;
}

inline std::vector<CellProbe> default_monitor_cells(const Dataset &data) {
  std::vector<CellProbe> cells;
  const Eigen::Index n = data.n_sites(), t = data.n_times();
  const Eigen::Index total = n * t;
  for (Eigen::Index frac : {0, 1, 2}) {
    // first observed cell at or after 0, 1/2 and the end of the grid
    for (Eigen::Index c = frac * (total - 1) / 2; c < total; ++c) {
      const Eigen::Index i = c % n, tt = c / n;
      if (data.observed(i, tt)) {
        cells.push_back({i, tt});
        break;
      }
    }
  }
  return cells;
}

// Runs the systematic-scan sampler. Deterministic given config.seed.
inline ChainResult run_chain(const Dataset &data, const ModelSpec &spec, const Hyperpriors &hyper,
                             const SamplerConfig &config) {
  config.validate();
  spec.validate();
  hyper.validate();
  data.validate();

  GibbsSampler sampler(data, spec, hyper, initial_state(data, spec, hyper, config), config.seed);
  sampler.init_steps(config.step_rho, config.step_alpha);

  ChainResult out;
  out.posterior.spec = spec;
  out.posterior.hyper = hyper;
  out.posterior.config = config;
  out.trace.lags = config.monitor_lags;
  out.trace.cells =
      config.monitor_cells.empty() ? default_monitor_cells(data) : config.monitor_cells;
  for (const auto &c : out.trace.cells)
    if (c.site < 0 || c.site >= data.n_sites() || c.time < 0 || c.time >= data.n_times())
      throw ArgumentError("run_chain: monitor cell outside the data grid");
  out.trace.cov.resize(config.n_iter, static_cast<Eigen::Index>(out.trace.lags.size()));
  out.trace.mu.resize(config.n_iter, static_cast<Eigen::Index>(out.trace.cells.size()));

  const Eigen::Index p = data.n_covariates();
  for (long it = 0; it < config.n_iter; ++it) {
    const bool burning = it < config.burn_in;
    const double gain =
        (config.adapt && burning) ? std::pow(static_cast<double>(it) + 1.0, -0.6) : 0.0;
    sampler.sweep(it, burning, gain, config.target_accept);

    const ParamState &s = sampler.state();
    const CovModel model = to_cov_model(s, spec.kappa);
    for (std::size_t l = 0; l < out.trace.lags.size(); ++l)
      out.trace.cov(it, static_cast<Eigen::Index>(l)) = baseline_cov(model, p, out.trace.lags[l]);
    for (std::size_t c = 0; c < out.trace.cells.size(); ++c) {
      const auto &cell = out.trace.cells[c];
      out.trace.mu(it, static_cast<Eigen::Index>(c)) = sampler.mu()(cell.site, cell.time);
    }
    if (!burning && (it - config.burn_in) % config.thin == 0)
      out.posterior.draws.push_back(s);
  }
  out.posterior.mh = sampler.mh_stats();
  return out;
}

} // namespace nscov
