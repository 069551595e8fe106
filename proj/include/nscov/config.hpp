#pragma once

// Flat "section.key = value" configuration. Lines starting with '#' are
// comments. Unknown keys and malformed values are errors. Lists are comma
// separated; matrices separate rows with ';'.

#include <nscov/chain.hpp>
#include <nscov/errors.hpp>
#include <nscov/predict.hpp>
#include <nscov/sampler.hpp>
#include <nscov/simulate.hpp>
#include <nscov/summaries.hpp>
#include <nscov/variogram.hpp>

#include <Eigen/Dense>

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace nscov {

struct RunConfig {
  ModelSpec model;
  Hyperpriors priors;
  SamplerConfig sampler;
  SimulationSpec simulate;
  bool simulate_curves = true;
  PredictOptions predict;
  VariogramBins variogram;
  EffectOptions summarize;
  double cv_holdout = 0.05;
  std::uint64_t cv_seed = 1;

  void validate() const {
    model.validate();
    priors.validate();
    sampler.validate();
    simulate.validate();
    predict.validate();
    variogram.validate();
    if (!(cv_holdout > 0.0 && cv_holdout < 1.0))
      throw ArgumentError("cv.holdout must lie in (0, 1)");
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos
                                                                      : pos - start)));
    if (pos == std::string_view::npos)
      break;
    start = pos + 1;
  }
  return out;
}

// Whole-string numeric parsers; false on any trailing garbage.
inline bool parse_double(std::string_view s, double &out) {
  const std::string t = trim(s);
  if (t.empty())
    return false;
  const char *first = t.data();
  if (*first == '+')
    ++first;
  const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size();
}

inline bool parse_long(std::string_view s, long &out) {
  const std::string t = trim(s);
  if (t.empty())
    return false;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size();
}

} // namespace detail

inline std::vector<LagProbe> parse_lags(const std::string &text) {
  std::vector<LagProbe> out;
  for (const auto &item : detail::split(text, ';')) {
    if (item.empty())
      continue;
    const auto parts = detail::split(item, ',');
    LagProbe lag;
    if (parts.size() != 2 || !detail::parse_double(parts[0], lag.h_s) ||
        !detail::parse_long(parts[1], lag.h_t) || lag.h_s < 0.0)
      throw ArgumentError("invalid lag '" + item + "' (expected h_s,h_t)");
    out.push_back(lag);
  }
  if (out.empty())
    throw ArgumentError("empty lag list");
  return out;
}

inline Eigen::VectorXd parse_vector(const std::string &text) {
  const auto parts = detail::split(text, ',');
  Eigen::VectorXd v(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i)
    if (!detail::parse_double(parts[i], v(static_cast<Eigen::Index>(i))))
      throw ArgumentError("invalid number '" + parts[i] + "'");
  return v;
}

inline std::vector<long> parse_long_list(const std::string &text) {
  std::vector<long> out;
  for (const auto &p : detail::split(text, ',')) {
    long v = 0;
    if (!detail::parse_long(p, v))
      throw ArgumentError("invalid integer '" + p + "'");
    out.push_back(v);
  }
  return out;
}

inline Eigen::MatrixXd parse_matrix(const std::string &text) {
  const auto rows = detail::split(text, ';');
  Eigen::MatrixXd m;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Eigen::VectorXd v = parse_vector(rows[r]);
    if (r == 0)
      m.resize(static_cast<Eigen::Index>(rows.size()), v.size());
    else if (v.size() != m.cols())
      throw ArgumentError("matrix rows differ in length");
    m.row(static_cast<Eigen::Index>(r)) = v.transpose();
  }
  return m;
}

namespace detail {

using Setter = std::function<void(const std::string &)>;

inline Setter set_double(double &target) {
  return [&target](const std::string &v) {
    if (!parse_double(v, target))
      throw ArgumentError("expected a number, got '" + v + "'");
  };
}

template <typename Int> Setter set_integer(Int &target) {
  return [&target](const std::string &v) {
    long x = 0;
    if (!parse_long(v, x))
      throw ArgumentError("expected an integer, got '" + v + "'");
    target = static_cast<Int>(x);
  };
}

inline Setter set_bool(bool &target) {
  return [&target](const std::string &v) {
    if (v == "true" || v == "1" || v == "yes")
      target = true;
    else if (v == "false" || v == "0" || v == "no")
      target = false;
    else
      throw ArgumentError("expected true/false, got '" + v + "'");
  };
}

inline std::map<std::string, Setter> config_setters(RunConfig &c) {
  std::map<std::string, Setter> s;
  s["model.components"] = set_integer(c.model.components);
  s["model.kappa"] = set_double(c.model.kappa);

  s["priors.beta_var"] = set_double(c.priors.beta_var);
  s["priors.alpha_var"] = set_double(c.priors.alpha_var);
  s["priors.precision_shape"] = set_double(c.priors.precision_shape);
  s["priors.precision_rate"] = set_double(c.priors.precision_rate);
  s["priors.rho_max"] = set_double(c.priors.rho_max);

  s["sampler.n_iter"] = set_integer(c.sampler.n_iter);
  s["sampler.burn_in"] = set_integer(c.sampler.burn_in);
  s["sampler.thin"] = set_integer(c.sampler.thin);
  s["sampler.step_alpha"] = set_double(c.sampler.step_alpha);
  s["sampler.step_rho"] = set_double(c.sampler.step_rho);
  s["sampler.adapt"] = set_bool(c.sampler.adapt);
  s["sampler.target_accept"] = set_double(c.sampler.target_accept);
  s["sampler.seed"] = set_integer(c.sampler.seed);
  s["sampler.init_rho"] = set_double(c.sampler.init_rho);
  s["sampler.init_gamma"] = set_double(c.sampler.init_gamma);
  s["sampler.monitor_lags"] = [&c](const std::string &v) { c.sampler.monitor_lags = parse_lags(v); };

  auto &sim = c.simulate;
  s["simulate.n_sites"] = set_integer(sim.n_sites);
  s["simulate.n_times"] = set_integer(sim.n_times);
  s["simulate.domain_km"] = set_double(sim.domain_km);
  s["simulate.covariate_range_km"] = set_double(sim.covariate_range_km);
  s["simulate.covariate_range_days"] = set_double(sim.covariate_range_days);
  s["simulate.n_covariates"] = set_integer(sim.n_covariates);
  s["simulate.beta"] = [&sim](const std::string &v) { sim.beta = parse_vector(v); };
  s["simulate.alpha"] = [&sim](const std::string &v) { sim.alpha = parse_matrix(v); };
  s["simulate.rho"] = [&sim](const std::string &v) { sim.rho = parse_vector(v); };
  s["simulate.gamma"] = [&sim](const std::string &v) { sim.gamma = parse_vector(v); };
  s["simulate.tau2"] = [&sim](const std::string &v) { sim.tau2 = parse_vector(v); };
  s["simulate.sigma2"] = set_double(sim.sigma2);
  s["simulate.tau0_2"] = set_double(sim.tau0_2);
  s["simulate.rho0"] = set_double(sim.rho0);
  s["simulate.kappa"] = set_double(sim.kappa);
  s["simulate.missing_fraction"] = set_double(sim.missing_fraction);
  s["simulate.start"] = [&sim](const std::string &v) {
    if (v == "stationary")
      sim.start = LatentStart::Stationary;
    else if (v == "zero")
      sim.start = LatentStart::ZeroStart;
    else
      throw ArgumentError("expected 'stationary' or 'zero', got '" + v + "'");
  };
  s["simulate.curves"] = set_bool(c.simulate_curves);

  s["predict.samples_per_draw"] = set_integer(c.predict.samples_per_draw);
  s["predict.level"] = set_double(c.predict.level);
  s["predict.seed"] = set_integer(c.predict.seed);

  s["variogram.bins"] = set_integer(c.variogram.count);
  s["variogram.width"] = set_double(c.variogram.width);

  s["summarize.offset"] = set_double(c.summarize.c);
  s["summarize.spatial_lag"] = set_double(c.summarize.spatial_lag);
  s["summarize.temporal_lag"] = set_integer(c.summarize.temporal_lag);

  s["cv.holdout"] = set_double(c.cv_holdout);
  s["cv.seed"] = set_integer(c.cv_seed);
  return s;
}

} // namespace detail

// Applies "key = value" lines to cfg (defaults untouched for absent keys).
inline void apply_config(RunConfig &cfg, std::istream &in, const std::string &origin = "config") {
  auto setters = detail::config_setters(cfg);
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#')
      continue;
    const auto eq = t.find('=');
    const std::string where = origin + ":" + std::to_string(line_no);
    if (eq == std::string::npos)
      throw ArgumentError(where + ": expected 'section.key = value'");
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string value = detail::trim(t.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end())
      throw ArgumentError(where + ": unknown key '" + key + "'");
    try {
      it->second(value);
    } catch (const ArgumentError &e) {
      throw ArgumentError(where + ": " + key + ": " + e.what());
    }
  }
}

inline RunConfig parse_config(const std::string &text) {
  RunConfig cfg;
  std::istringstream in(text);
  apply_config(cfg, in);
  cfg.validate();
  return cfg;
}

inline RunConfig load_config(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ArgumentError("cannot open config file '" + path + "'");
  RunConfig cfg;
  apply_config(cfg, in, path);
  cfg.validate();
  return cfg;
}

} // namespace nscov
