// nscov command-line interface. Exit codes: 0 success, 2 usage error,
// 3 data validation error, 4 numerical failure.

#include <nscov/nscov.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace nscov;

constexpr int kUsage = 2;
constexpr int kData = 3;
constexpr int kNumerical = 4;

RunConfig config_or_default(const std::string &path) {
  if (path.empty()) {
    RunConfig cfg;
    cfg.validate();
    return cfg;
  }
  return load_config(path);
}

std::ofstream open_out(const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw DataError("cannot write '" + path + "'");
  return out;
}

nlohmann::json truth_json(const ParamState &s) {
  std::vector<std::vector<double>> alpha(static_cast<std::size_t>(s.alpha.rows()));
  for (Eigen::Index j = 0; j < s.alpha.rows(); ++j)
    for (Eigen::Index k = 0; k < s.alpha.cols(); ++k)
      alpha[static_cast<std::size_t>(j)].push_back(s.alpha(j, k));
  const auto vec = [](const Eigen::VectorXd &v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  return {{"beta", vec(s.beta)},   {"sigma2", s.sigma2}, {"alpha", alpha},
          {"rho", vec(s.rho)},     {"tau2", vec(s.tau2)}, {"gamma", vec(s.gamma)},
          {"rho0", s.rho0},        {"tau0_2", s.tau0_2}};
}

void write_curves(const std::string &path, const ExampleCurves &f) {
  auto out = open_out(path);
  out << "s,s_prime,x_s,x_s_prime,covariance\n";
  for (Eigen::Index a = 0; a < f.s.size(); ++a)
    for (Eigen::Index b = 0; b < f.s.size(); ++b)
      out << detail::format_double(f.s(a)) << ',' << detail::format_double(f.s(b)) << ','
          << detail::format_double(f.x(a)) << ',' << detail::format_double(f.x(b)) << ','
          << detail::format_double(f.cov(a, b)) << '\n';
}

int cmd_simulate(const std::string &config, std::uint64_t seed, const std::string &dir) {
  const RunConfig cfg = config_or_default(config);
  std::filesystem::create_directories(dir);
  const auto sim = simulate_dataset(cfg.simulate, seed);
  save_dataset(dir + "/data.csv", sim.data);
  auto truth = open_out(dir + "/truth.json");
  truth << truth_json(sim.truth).dump(2) << '\n';
  if (cfg.simulate_curves) {
    write_curves(dir + "/curves_quadratic.csv", example_curves(CurveVariant::Quadratic));
    write_curves(dir + "/curves_periodic.csv", example_curves(CurveVariant::Periodic));
  }
  std::cout << "simulated " << sim.data.n_sites() << " sites x " << sim.data.n_times()
            << " times (" << sim.data.n_observed() << " observed) into " << dir << '\n';
  return 0;
}

void print_chain_summary(const ChainResult &res) {
  std::printf("retained draws: %zu\n", res.posterior.draws.size());
  std::printf("%-16s %10s %12s %12s\n", "MH block", "step", "acc(burn)", "acc(post)");
  for (const auto &st : res.posterior.mh)
    std::printf("%-16s %10.4g %12.3f %12.3f\n", st.name.c_str(), st.step(),
                st.acceptance_burn_in(), st.acceptance());
  const long burn = res.posterior.config.burn_in;
  const auto summarize = [&](const Eigen::MatrixXd &trace, Eigen::Index col) {
    const Eigen::VectorXd v = trace.col(col).tail(trace.rows() - burn);
    const double mean = v.mean();
    const double sd =
        v.size() > 1 ? std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1))
                     : 0.0;
    std::printf("  mean %12.5g  sd %12.5g\n", mean, sd);
  };
  for (std::size_t l = 0; l < res.trace.lags.size(); ++l) {
    std::printf("cov_mu(h_s=%g, h_t=%ld):", res.trace.lags[l].h_s, res.trace.lags[l].h_t);
    summarize(res.trace.cov, static_cast<Eigen::Index>(l));
  }
  for (std::size_t c = 0; c < res.trace.cells.size(); ++c) {
    std::printf("mu(site %ld, time %ld):", static_cast<long>(res.trace.cells[c].site),
                static_cast<long>(res.trace.cells[c].time));
    summarize(res.trace.mu, static_cast<Eigen::Index>(c));
  }
}

DrawsFile to_file(const ChainResult &res, const Dataset &data) {
  DrawsFile f;
  f.posterior = res.posterior;
  f.n_sites = data.n_sites();
  f.n_times = data.n_times();
  f.n_covariates = data.n_covariates();
  f.covariate_names = data.covariate_names;
  return f;
}

struct FitArgs {
  std::string data, config, out;
  std::optional<long> iters, burnin, components;
  std::optional<std::uint64_t> seed;
};

void apply_overrides(RunConfig &cfg, const FitArgs &a) {
  if (a.iters)
    cfg.sampler.n_iter = *a.iters;
  if (a.burnin)
    cfg.sampler.burn_in = *a.burnin;
  if (a.seed)
    cfg.sampler.seed = *a.seed;
  if (a.components)
    cfg.model.components = *a.components;
  cfg.validate();
}

int cmd_fit(const FitArgs &a) {
  RunConfig cfg = config_or_default(a.config);
  apply_overrides(cfg, a);
  const Dataset data = load_dataset(a.data);
  const auto res = run_chain(data, cfg.model, cfg.priors, cfg.sampler);
  save_draws(a.out, to_file(res, data));
  print_chain_summary(res);
  return 0;
}

void print_metrics(std::ostream &out, const ValidationMetrics &m) {
  out << "n,mse,mad,ave_var,med_sd,cov\n"
      << m.n << ',' << detail::format_double(m.mse) << ',' << detail::format_double(m.mad) << ','
      << detail::format_double(m.ave_var) << ',' << detail::format_double(m.med_sd) << ','
      << detail::format_double(m.cov) << '\n';
}

int cmd_predict(const std::string &draws_path, const std::string &data_path,
                const std::string &targets_path, const std::string &out_path,
                const std::string &config, const std::string &metrics_path) {
  const RunConfig cfg = config_or_default(config);
  const DrawsFile f = load_draws(draws_path);
  const Dataset data = load_dataset(data_path);
  if (f.n_sites != data.n_sites() || f.n_times != data.n_times() ||
      f.n_covariates != data.n_covariates())
    throw DataError("draws file dimensions do not match the dataset");
  const TargetFile targets = load_targets(targets_path, data);
  if (targets.points.empty())
    throw DataError("targets file has no rows");
  const auto res = predict_points(f.posterior, data, targets.points, cfg.predict);
  auto out = open_out(out_path);
  write_predictions(out, targets, res);
  if (targets.truth.allFinite()) {
    const auto m = validation_metrics(targets.truth, res);
    print_metrics(std::cout, m);
    if (!metrics_path.empty()) {
      auto mo = open_out(metrics_path);
      print_metrics(mo, m);
    }
  } else if (!metrics_path.empty()) {
    throw DataError("metrics requested but some targets have no y value");
  }
  return 0;
}

int cmd_variogram(const std::string &data_path, const std::string &stratify, bool standardize,
                  std::optional<long> bins, std::optional<double> width,
                  const std::string &out_path, const std::string &config) {
  const RunConfig cfg = config_or_default(config);
  const Dataset data = load_dataset(data_path);
  const auto fit = ols_residuals(data);
  VariogramBins vb = cfg.variogram;
  if (bins)
    vb.count = *bins;
  if (width)
    vb.width = *width;
  std::optional<Eigen::MatrixXd> field;
  if (!stratify.empty())
    field = covariate_field(data, data.covariate_index(stratify));
  const auto res = empirical_variogram(fit.residuals, data.coords(), vb,
                                       standardize ? ResidualKind::Standardized : ResidualKind::Raw,
                                       field);
  auto out = open_out(out_path);
  write_variogram(out, res);
  return 0;
}

int cmd_summarize(const std::string &draws_path, const std::string &lags,
                  const std::string &out_path, const std::string &config,
                  const std::string &covariates_out) {
  const RunConfig cfg = config_or_default(config);
  const DrawsFile f = load_draws(draws_path);
  if (f.posterior.draws.empty())
    throw DataError("draws file contains no draws");
  const auto report = summarize_effects(f.posterior, parse_lags(lags), {}, cfg.summarize);
  auto out = open_out(out_path);
  write_effects(out, report, f.covariate_names);
  if (!covariates_out.empty()) {
    auto co = open_out(covariates_out);
    write_covariate_effects(co, report, f.covariate_names);
  }
  write_covariate_effects(std::cout, report, f.covariate_names);
  return 0;
}

int cmd_cv(const FitArgs &a, double holdout, const std::string &m_list) {
  RunConfig cfg = config_or_default(a.config);
  const Dataset data = load_dataset(a.data);
  const std::uint64_t split_seed = a.seed ? *a.seed : cfg.cv_seed;
  const auto split = cv_split(data, holdout, split_seed);
  const Dataset train = mask_responses(data, split.train);
  const auto test = targets_from_mask(data, split.test);
  auto out = open_out(a.out);
  out << "M,n_test,mse,mad,ave_var,med_sd,cov\n";
  for (long m : parse_long_list(m_list)) {
    FitArgs fa = a;
    fa.components = m;
    RunConfig run = cfg;
    apply_overrides(run, fa);
    const auto res = run_chain(train, run.model, run.priors, run.sampler);
    const auto pred = predict_points(res.posterior, train, test.points, run.predict);
    const auto met = validation_metrics(test.truth, pred);
    out << m << ',' << met.n << ',' << detail::format_double(met.mse) << ','
        << detail::format_double(met.mad) << ',' << detail::format_double(met.ave_var) << ','
        << detail::format_double(met.med_sd) << ',' << detail::format_double(met.cov) << '\n';
    std::printf("M=%ld  MSE %.5g  MAD %.5g  AVE VAR %.5g  MED SD %.5g  COV %.3f\n", m, met.mse,
                met.mad, met.ave_var, met.med_sd, met.cov);
    std::fflush(stdout);
  }
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Covariate-dependent nonstationary space-time covariance models"};
  app.require_subcommand(1);

  std::string config, out, data, draws, targets, metrics, stratify, lags = "100,0;0,2";
  std::string covariates_out, m_list = "1,2,3";
  std::uint64_t seed = 1;
  bool standardize = false;
  std::optional<long> bins;
  std::optional<double> width;
  double holdout = 0.05;
  FitArgs fit;

  auto *sim = app.add_subcommand("simulate", "simulate a dataset and the 1-D example curves");
  sim->add_option("--config", config, "configuration file");
  sim->add_option("--seed", seed, "random seed");
  sim->add_option("--out", out, "output directory")->required();

  const auto add_fit_options = [&](CLI::App *c) {
    c->add_option("--data", fit.data, "dataset CSV")->required();
    c->add_option("--config", fit.config, "configuration file");
    c->add_option("--iters", fit.iters, "total MCMC iterations");
    c->add_option("--burnin", fit.burnin, "burn-in iterations");
    c->add_option("--seed", fit.seed, "random seed");
    c->add_option("--components,-M", fit.components, "mixture components");
    c->add_option("--out", fit.out, "output file")->required();
  };
  auto *fitc = app.add_subcommand("fit", "run the MCMC sampler and write posterior draws");
  add_fit_options(fitc);

  auto *pred = app.add_subcommand("predict", "posterior predictive summaries at targets");
  pred->add_option("--draws", draws, "draws file from fit")->required();
  pred->add_option("--data", data, "dataset CSV used for the fit")->required();
  pred->add_option("--targets", targets, "targets CSV")->required();
  pred->add_option("--out", out, "predictions CSV")->required();
  pred->add_option("--config", config, "configuration file");
  pred->add_option("--metrics", metrics, "also write validation metrics here");

  auto *vg = app.add_subcommand("variogram", "empirical variogram of OLS residuals");
  vg->add_option("--data", data, "dataset CSV")->required();
  vg->add_option("--stratify", stratify, "covariate name for low/high strata");
  vg->add_flag("--standardize", standardize, "divide residuals by each day's SD");
  vg->add_option("--bins", bins, "number of distance bins")->check(CLI::PositiveNumber);
  vg->add_option("--width", width, "bin width in km")->check(CLI::PositiveNumber);
  vg->add_option("--out", out, "output CSV")->required();
  vg->add_option("--config", config, "configuration file");

  auto *sm = app.add_subcommand("summarize", "covariance-effect ratios from draws");
  sm->add_option("--draws", draws, "draws file from fit")->required();
  sm->add_option("--lags", lags, "lags as \"h_s,h_t;h_s,h_t\"");
  sm->add_option("--out", out, "effect table CSV")->required();
  sm->add_option("--config", config, "configuration file");
  sm->add_option("--covariates-out", covariates_out, "per-covariate flag table CSV");

  auto *cv = app.add_subcommand("cv", "holdout validation across component counts");
  add_fit_options(cv);
  cv->add_option("--holdout", holdout, "holdout fraction");
  cv->add_option("--M-list", m_list, "comma-separated component counts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }

  try {
    if (*sim)
      return cmd_simulate(config, seed, out);
    if (*fitc)
      return cmd_fit(fit);
    if (*pred)
      return cmd_predict(draws, data, targets, out, config, metrics);
    if (*vg)
      return cmd_variogram(data, stratify, standardize, bins, width, out, config);
    if (*sm)
      return cmd_summarize(draws, lags, out, config, covariates_out);
    if (*cv)
      return cmd_cv(fit, holdout, m_list);
  } catch (const ArgumentError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const UnsupportedError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError &e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const DomainError &e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const NumericalError &e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  }
  return kUsage;
}
