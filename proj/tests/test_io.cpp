#include <nscov/io.hpp>
#include <nscov/simulate.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

using namespace nscov;

namespace {

CsvTable csv(const std::string &text) {
  std::istringstream in(text);
  return read_csv(in);
}

// great-circle distance on the sphere used by the projection
double haversine_km(double lon1, double lat1, double lon2, double lat2) {
  constexpr double deg = std::numbers::pi / 180.0;
  const double dphi = (lat2 - lat1) * deg, dlam = (lon2 - lon1) * deg;
  const double a = std::pow(std::sin(dphi / 2), 2) +
                   std::cos(lat1 * deg) * std::cos(lat2 * deg) * std::pow(std::sin(dlam / 2), 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(a));
}

std::string message_of(const std::function<void()> &f) {
  try {
    f();
  } catch (const std::exception &e) {
    return e.what();
  }
  return {};
}

const char *kSmall = "site_id,date,longitude,latitude,y,temp\n"
                     "a,2020-01-01,-100,40,1.0,10\n"
                     "b,2020-01-01,-101,41,2.0,12\n"
                     "a,2020-01-02,-100,40,1.5,11\n"
                     "b,2020-01-02,-101,41,,\n"
                     "a,2020-01-03,-100,40,0.5,15\n"
                     "b,2020-01-03,-101,41,3.0,13\n";

} // namespace

TEST(Mercator, LocalScaleMatchesGreatCircle) {
  // short steps at the reference latitude: projected distance = arc length
  const double d = 0.001;
  const auto a = mercator_project(-100.0, 40.0, 40.0);
  const auto east = mercator_project(-100.0 + d, 40.0, 40.0);
  const auto north = mercator_project(-100.0, 40.0 + d, 40.0);
  EXPECT_NEAR((east - a).norm(), haversine_km(-100, 40, -100 + d, 40), 1e-6);
  EXPECT_NEAR((north - a).norm(), haversine_km(-100, 40, -100, 40 + d), 1e-6);
  EXPECT_NEAR((east - a).norm() / d, 85.18, 0.01);
}

TEST(Mercator, InverseAndDomain) {
  for (double lat : {-60.0, 0.0, 33.3, 70.0}) {
    const auto xy = mercator_project(12.5, lat, 35.0);
    const auto ll = mercator_unproject(xy, 35.0);
    EXPECT_NEAR(ll(0), 12.5, 1e-10);
    EXPECT_NEAR(ll(1), lat, 1e-10);
  }
  EXPECT_THROW(mercator_project(0.0, 86.0, 40.0), DomainError);
  EXPECT_THROW(mercator_project(0.0, 10.0, -89.0), DomainError);
}

TEST(Csv, QuotesAndFieldCounts) {
  const auto t = csv("a,b,c\n\"x,1\",\"say \"\"hi\"\"\", 3 \n\n4,5,6\n");
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][0], "x,1");
  EXPECT_EQ(t.rows[0][1], "say \"hi\"");
  EXPECT_EQ(t.rows[0][2], "3");
  EXPECT_EQ(t.line[1], 4);
  const auto msg = message_of([] { csv("a,b\n1,2\n3\n"); });
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
  EXPECT_THROW(csv(""), DataError);
  EXPECT_THROW(csv("a,b\n\"open,2\n"), DataError);
}

TEST(Dates, IsoAndInteger) {
  EXPECT_EQ(parse_day("1970-01-02")->day, 1);
  EXPECT_TRUE(parse_day("2020-03-01")->iso);
  EXPECT_EQ(parse_day("2020-03-01")->day - parse_day("2020-02-28")->day, 2);
  EXPECT_EQ(parse_day("17")->day, 17);
  EXPECT_FALSE(parse_day("17")->iso);
  EXPECT_FALSE(parse_day("2021-02-29").has_value());
  EXPECT_FALSE(parse_day("soon").has_value());
}

TEST(Dataset, LoadsAndStandardizes) {
  const Dataset d = dataset_from_table(csv(kSmall));
  EXPECT_EQ(d.n_sites(), 2);
  EXPECT_EQ(d.n_times(), 3);
  EXPECT_EQ(d.covariate_names, (std::vector<std::string>{"intercept", "temp"}));
  EXPECT_TRUE(std::isnan(d.y(1, 1)));
  EXPECT_DOUBLE_EQ(d.reference_latitude, 40.5);
  // observed temps 10 12 11 15 13: mean 12.2, sd sqrt(3.7)
  EXPECT_NEAR(d.standardization.mean(0), 12.2, 1e-12);
  EXPECT_NEAR(d.standardization.sd(0), std::sqrt(3.7), 1e-12);
  double sum = 0, ss = 0;
  for (Eigen::Index t = 0; t < 3; ++t)
    for (Eigen::Index i = 0; i < 2; ++i)
      if (d.observed(i, t)) {
        sum += d.x(i, t)(1);
        ss += d.x(i, t)(1) * d.x(i, t)(1);
      }
  EXPECT_NEAR(sum, 0.0, 1e-12);
  EXPECT_NEAR(ss / 4.0, 1.0, 1e-12);
  EXPECT_NEAR(d.standardization.invert(0, d.x(0, 2)(1)), 15.0, 1e-12);
  EXPECT_TRUE(d.X.col(0).isOnes());
  EXPECT_EQ(d.segment_start, (std::vector<char>{1, 0, 0}));
}

TEST(Dataset, RoundTripThroughCsv) {
  SimulationSpec spec;
  spec.n_sites = 6;
  spec.n_times = 5;
  spec.missing_fraction = 0.2;
  const auto sim = simulate_dataset(spec, 4);
  std::ostringstream out;
  save_dataset(out, sim.data);
  const Dataset back = dataset_from_table(csv(out.str()), {false, 40.0});
  ASSERT_EQ(back.n_sites(), 6);
  ASSERT_EQ(back.n_times(), 5);
  for (Eigen::Index t = 0; t < 5; ++t)
    for (Eigen::Index i = 0; i < 6; ++i) {
      if (sim.data.observed(i, t))
        EXPECT_EQ(back.y(i, t), sim.data.y(i, t));
      else
        EXPECT_TRUE(std::isnan(back.y(i, t)));
      EXPECT_EQ(back.X.row(back.cell(i, t)), sim.data.X.row(sim.data.cell(i, t)));
    }
  for (std::size_t i = 0; i < 6; ++i)
    EXPECT_EQ(back.sites[i].xy, sim.data.sites[i].xy);
}

TEST(Dataset, ProjectsWithoutExplicitCoordinates) {
  const Dataset d = dataset_from_table(csv(kSmall), {true, 40.0});
  EXPECT_NEAR((d.sites[0].xy - d.sites[1].xy)(0), 85.18, 0.01);
}

TEST(Dataset, SeasonsBreakTheSeries) {
  const Dataset d = dataset_from_table(csv("site_id,date,longitude,latitude,season,y\n"
                                           "a,1,0,0,s1,1\nb,1,1,0,s1,2\n"
                                           "a,2,0,0,s1,1\nb,2,1,0,s1,2\n"
                                           "a,10,0,0,s2,1\nb,10,1,0,s2,3\n"));
  EXPECT_EQ(d.segment_start, (std::vector<char>{1, 0, 1}));
  EXPECT_FALSE(d.linked(2));
  std::ostringstream out;
  save_dataset(out, d);
  const Dataset back = dataset_from_table(csv(out.str()));
  EXPECT_EQ(back.segment_start, d.segment_start);
}

TEST(Dataset, Errors) {
  const std::string head = "site_id,date,longitude,latitude,y,temp\n";
  auto load = [&](const std::string &body) { dataset_from_table(csv(head + body)); };
  auto msg = message_of([&] { load("a,1,0,0,1,1\nb,1,1,0,2,2\na,1,0,0,3,3\n"); });
  EXPECT_NE(msg.find("lines 2 and 4"), std::string::npos) << msg;
  msg = message_of([&] { load("a,1,0,0,1,1\na,3,0,0,2,2\n"); });
  EXPECT_NE(msg.find("not contiguous"), std::string::npos) << msg;
  EXPECT_THROW(load("a,1,0,0,1,1\na,2020-01-02,0,0,2,2\n"), DataError);
  EXPECT_THROW(load("a,1,0,0,1,1\na,2,0,0,2,1\n"), DataError); // constant covariate
  EXPECT_THROW(load("a,1,0,0,1,\na,2,0,0,2,1\n"), DataError);  // covariate missing
  EXPECT_THROW(load("a,1,0,0,1,1\na,2,0,1,2,2\n"), DataError); // site moved
  EXPECT_THROW(load("a,1,0,89,1,1\na,2,0,89,2,2\n"), DataError);
  EXPECT_THROW(load("a,x,0,0,1,1\n"), DataError);
  EXPECT_THROW(dataset_from_table(csv("site_id,date,longitude,latitude,y,intercept\n")), DataError);
  EXPECT_THROW(dataset_from_table(csv("site_id,date,longitude,y\na,1,0,1\n")), DataError);
  msg = message_of([] {
    dataset_from_table(csv("site_id,date,longitude,latitude,season,y\n"
                           "a,1,0,0,s1,1\na,2,0,0,s2,1\na,3,0,0,s1,1\n"));
  });
  EXPECT_NE(msg.find("contiguous"), std::string::npos) << msg;
}

TEST(Targets, MapDatesAndStandardize) {
  const Dataset d = dataset_from_table(csv(kSmall));
  const auto t = targets_from_table(csv("site_id,date,longitude,latitude,temp\n"
                                        "c,2020-01-02,-100.5,40.5,12.2\n"
                                        "a,2020-01-06,-100,40,13.4\n"),
                                    d);
  ASSERT_EQ(t.points.size(), 2u);
  EXPECT_EQ(t.points[0].t, 1);
  EXPECT_EQ(t.points[1].t, 5);
  EXPECT_NEAR(t.points[0].x(1), 0.0, 1e-12);
  EXPECT_EQ(t.points[1].s, d.sites[0].xy);
  EXPECT_TRUE(std::isnan(t.truth(0)));
  EXPECT_THROW(targets_from_table(csv("site_id,date,longitude,latitude,temp\n"
                                      "a,2019-12-01,-100,40,1\n"),
                                  d),
               DataError);
  EXPECT_THROW(targets_from_table(csv("site_id,date,longitude,latitude,rain\na,1,0,0,1\n"), d),
               DataError);
}

namespace {

DrawsFile sample_draws() {
  SimulationSpec spec;
  spec.n_sites = 4;
  spec.n_times = 3;
  const auto sim = simulate_dataset(spec, 2);
  SamplerConfig cfg;
  cfg.n_iter = 30;
  cfg.burn_in = 10;
  cfg.seed = 5;
  const auto chain = run_chain(sim.data, ModelSpec{2, 1.0}, Hyperpriors{}, cfg);
  DrawsFile f;
  f.posterior = chain.posterior;
  f.n_sites = 4;
  f.n_times = 3;
  f.n_covariates = 3;
  f.covariate_names = sim.data.covariate_names;
  return f;
}

} // namespace

TEST(Draws, BitwiseRoundTrip) {
  const DrawsFile f = sample_draws();
  std::ostringstream out;
  save_draws(out, f);
  const std::string bytes = out.str();
  EXPECT_EQ(bytes.substr(0, 8), "NSCOVDRW");
  const DrawsFile g = load_draws_bytes(bytes);
  ASSERT_EQ(g.posterior.draws.size(), 20u);
  EXPECT_EQ(g.covariate_names, f.covariate_names);
  EXPECT_EQ(g.posterior.config.seed, 5u);
  EXPECT_EQ(g.posterior.mh.size(), f.posterior.mh.size());
  const auto &a = f.posterior.draws.back(), &b = g.posterior.draws.back();
  EXPECT_EQ(a.alpha, b.alpha);
  EXPECT_EQ(a.theta[1], b.theta[1]);
  EXPECT_EQ(a.delta, b.delta);
  EXPECT_EQ(a.rho0, b.rho0);
  std::ostringstream again;
  save_draws(again, g);
  EXPECT_EQ(again.str(), bytes);
}

TEST(Draws, EmptyFileIsValid) {
  DrawsFile f = sample_draws();
  f.posterior.draws.clear();
  std::ostringstream out;
  save_draws(out, f);
  EXPECT_TRUE(load_draws_bytes(out.str()).posterior.draws.empty());
}

TEST(Draws, CorruptionIsDetected) {
  const DrawsFile f = sample_draws();
  std::ostringstream out;
  save_draws(out, f);
  const std::string bytes = out.str();
  EXPECT_THROW(load_draws_bytes(bytes.substr(0, bytes.size() - 100)), DataError);
  EXPECT_THROW(load_draws_bytes(bytes.substr(0, 10)), DataError);
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x01;
  EXPECT_THROW(load_draws_bytes(flipped), DataError);
  std::string magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(load_draws_bytes(magic), DataError);
  std::string version = bytes;
  version[8] = 2;
  const auto msg = message_of([&] { load_draws_bytes(version); });
  EXPECT_NE(msg.find("version 2"), std::string::npos) << msg;
  DrawsFile wrong = f;
  wrong.n_sites = 5;
  std::ostringstream bad;
  EXPECT_THROW(save_draws(bad, wrong), ArgumentError);
}

TEST(Config, ParsesAndRejects) {
  const RunConfig c = parse_config("# comment\nmodel.components = 3\n"
                                   "sampler.monitor_lags = 0,0; 50,1\n"
                                   "simulate.alpha = 0,0,0;1,2,0\nsampler.adapt = no\n");
  EXPECT_EQ(c.model.components, 3);
  ASSERT_EQ(c.sampler.monitor_lags.size(), 2u);
  EXPECT_EQ(c.sampler.monitor_lags[1].h_t, 1);
  EXPECT_DOUBLE_EQ(c.sampler.monitor_lags[1].h_s, 50.0);
  EXPECT_EQ(c.simulate.alpha.rows(), 2);
  EXPECT_DOUBLE_EQ(c.simulate.alpha(1, 1), 2.0);
  EXPECT_FALSE(c.sampler.adapt);
  auto msg = message_of([] { parse_config("model.colour = 2\n"); });
  EXPECT_NE(msg.find("config:1: unknown key 'model.colour'"), std::string::npos) << msg;
  EXPECT_THROW(parse_config("model.components\n"), ArgumentError);
  EXPECT_THROW(parse_config("model.components = two\n"), ArgumentError);
  EXPECT_THROW(parse_config("sampler.burn_in = 50000\n"), ArgumentError);
  EXPECT_THROW(parse_lags("1,2,3"), ArgumentError);
  EXPECT_THROW(parse_lags("-1,0"), ArgumentError);
  EXPECT_THROW(parse_matrix("1,2;3"), ArgumentError);
}
