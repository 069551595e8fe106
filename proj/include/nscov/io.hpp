#pragma once

// CSV datasets, prediction targets, result tables and the binary draws file.
// Formats are described in docs/formats.md.

#include <nscov/chain.hpp>
#include <nscov/config.hpp>
#include <nscov/dataset.hpp>
#include <nscov/errors.hpp>
#include <nscov/predict.hpp>
#include <nscov/sampler.hpp>
#include <nscov/summaries.hpp>
#include <nscov/variogram.hpp>

#include <json.hpp>

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace nscov {

// ---- CSV ------------------------------------------------------------------

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<long> line; // source line of each row (header is line 1)
};

namespace detail {

// RFC 4180 style: fields may be quoted, "" escapes a quote.
inline std::vector<std::string> split_csv_line(const std::string &line, long line_no) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false, was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
      was_quoted = true;
    } else if (ch == ',') {
      out.push_back(was_quoted ? field : trim(field));
      field.clear();
      was_quoted = false;
    } else if (ch != '\r') {
      field += ch;
    }
  }
  if (quoted)
    throw DataError("line " + std::to_string(line_no) + ": unterminated quoted field");
  out.push_back(was_quoted ? field : trim(field));
  return out;
}

inline std::string csv_escape(const std::string &s) {
  if (s.find_first_of(",\"\n") == std::string::npos)
    return s;
  std::string out = "\"";
  for (char ch : s)
    out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return out + "\"";
}

inline std::string format_double(double v) {
  if (std::isnan(v))
    return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

} // namespace detail

inline CsvTable read_csv(std::istream &in) {
  CsvTable t;
  std::string line;
  long line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty())
      continue;
    auto fields = detail::split_csv_line(line, line_no);
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size())
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(t.header.size()) + " fields, found " +
                      std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
    t.line.push_back(line_no);
  }
  if (!have_header)
    throw DataError("CSV input is empty (no header row)");
  return t;
}

inline CsvTable read_csv_file(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw DataError("cannot open '" + path + "'");
  return read_csv(in);
}

// ---- dates ------------------------------------------------------------------

// Day number of an ISO date (days since 1970-01-01) or of a plain integer.
struct DayParse {
  long day = 0;
  bool iso = false;
};

inline std::optional<DayParse> parse_day(const std::string &s) {
  long v = 0;
  if (detail::parse_long(s, v))
    return DayParse{v, false};
  int y = 0;
  unsigned m = 0, d = 0;
  char extra = 0;
  if (s.size() == 10 && std::sscanf(s.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &extra) == 3) {
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                          std::chrono::day{d}};
    if (!ymd.ok())
      return std::nullopt;
    return DayParse{static_cast<long>(std::chrono::sys_days(ymd).time_since_epoch().count()), true};
  }
  return std::nullopt;
}

// ---- datasets -----------------------------------------------------------------

struct LoadOptions {
  bool standardize = true;
  std::optional<double> reference_latitude; // default: mean site latitude
};

namespace detail {

struct ColumnMap {
  std::map<std::string, std::size_t> index;
  std::vector<std::size_t> covariates; // in file order
  std::vector<std::string> covariate_names;

  bool has(const std::string &n) const { return index.count(n) > 0; }
  std::size_t at(const std::string &n) const { return index.at(n); }
};

inline ColumnMap map_columns(const CsvTable &t, bool require_y) {
  static const std::set<std::string> reserved{"site_id", "date",  "longitude", "latitude",
                                              "y",       "x_km",  "y_km",      "season"};
  ColumnMap c;
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    const std::string &name = t.header[i];
    if (name.empty())
      throw DataError("header column " + std::to_string(i + 1) + " has an empty name");
    if (!c.index.emplace(name, i).second)
      throw DataError("header: duplicate column '" + name + "'");
    if (name == "intercept")
      throw DataError("header: 'intercept' is reserved (the intercept is added automatically)");
    if (!reserved.count(name)) {
      c.covariates.push_back(i);
      c.covariate_names.push_back(name);
    }
  }
  for (const char *req : {"site_id", "date", "longitude", "latitude"})
    if (!c.has(req))
      throw DataError(std::string("header: missing required column '") + req + "'");
  if (require_y && !c.has("y"))
    throw DataError("header: missing required column 'y'");
  if (c.has("x_km") != c.has("y_km"))
    throw DataError("header: x_km and y_km must appear together");
  return c;
}

inline double field_number(const CsvTable &t, std::size_t row, std::size_t col, bool allow_missing) {
  const std::string &s = t.rows[row][col];
  if (s.empty() || s == "NA" || s == "NaN" || s == "nan") {
    if (allow_missing)
      return std::numeric_limits<double>::quiet_NaN();
    throw DataError("line " + std::to_string(t.line[row]) + ", column '" + t.header[col] +
                    "': value is missing");
  }
  double v = 0.0;
  if (!parse_double(s, v) || !std::isfinite(v))
    throw DataError("line " + std::to_string(t.line[row]) + ", column '" + t.header[col] +
                    "': '" + s + "' is not a finite number");
  return v;
}

} // namespace detail

inline Dataset dataset_from_table(const CsvTable &t, const LoadOptions &options = {}) {
  const auto cols = detail::map_columns(t, true);
  const bool has_xy = cols.has("x_km"), has_season = cols.has("season");
  const std::size_t c_site = cols.at("site_id"), c_date = cols.at("date");
  const std::size_t c_lon = cols.at("longitude"), c_lat = cols.at("latitude");
  const std::size_t c_y = cols.at("y");
  if (t.rows.empty())
    throw DataError("dataset has no rows");

  // Sites in order of first appearance.
  Dataset d;
  std::unordered_map<std::string, std::size_t> site_index;
  std::vector<long> site_first_line;
  std::vector<long> row_day(t.rows.size());
  std::optional<bool> iso;
  std::map<long, std::string> day_season;
  std::map<long, long> day_line;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto &row = t.rows[r];
    const std::string where = "line " + std::to_string(t.line[r]);
    if (row[c_site].empty())
      throw DataError(where + ": empty site_id");
    const double lon = detail::field_number(t, r, c_lon, false);
    const double lat = detail::field_number(t, r, c_lat, false);
    auto [it, inserted] = site_index.emplace(row[c_site], d.sites.size());
    if (inserted) {
      Site s;
      s.id = row[c_site];
      s.longitude = lon;
      s.latitude = lat;
      if (has_xy)
        s.xy = Eigen::RowVector2d(detail::field_number(t, r, cols.at("x_km"), false),
                                  detail::field_number(t, r, cols.at("y_km"), false));
      d.sites.push_back(s);
      site_first_line.push_back(t.line[r]);
    } else {
      const Site &s = d.sites[it->second];
      if (s.longitude != lon || s.latitude != lat)
        throw DataError(where + ": site '" + s.id + "' has coordinates that differ from line " +
                        std::to_string(site_first_line[it->second]));
    }
    const auto day = parse_day(row[c_date]);
    if (!day)
      throw DataError(where + ": date '" + row[c_date] + "' is neither YYYY-MM-DD nor an integer");
    if (iso && *iso != day->iso)
      throw DataError(where + ": mixed ISO and integer dates");
    iso = day->iso;
    row_day[r] = day->day;
    const std::string season = has_season ? row[cols.at("season")] : std::string();
    auto [sit, fresh] = day_season.emplace(day->day, season);
    if (fresh)
      day_line[day->day] = t.line[r];
    else if (sit->second != season)
      throw DataError(where + ": date '" + row[c_date] + "' has season '" + season +
                      "' but line " + std::to_string(day_line[day->day]) + " says '" +
                      sit->second + "'");
  }

  // Consecutive times, seasons as contiguous blocks.
  std::unordered_map<long, Eigen::Index> time_index;
  std::set<std::string> seasons_done;
  long prev_day = 0;
  std::string prev_season;
  for (const auto &[day, season] : day_season) {
    const auto tt = static_cast<Eigen::Index>(d.days.size());
    bool start = tt == 0;
    if (tt > 0) {
      if (season != prev_season) {
        seasons_done.insert(prev_season);
        if (seasons_done.count(season))
          throw DataError("season '" + season + "' is not a contiguous block of dates");
        start = true;
      } else if (day != prev_day + 1) {
        throw DataError("dates are not contiguous: gap after day " + std::to_string(prev_day) +
                        " (line " + std::to_string(day_line[day]) +
                        "); add a season column to break the series");
      }
    }
    time_index[day] = tt;
    d.days.push_back(day);
    d.segment_start.push_back(start ? 1 : 0);
    prev_day = day;
    prev_season = season;
  }
  // Date labels: the first spelling seen for each day.
  d.dates.assign(d.days.size(), std::string());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    auto &label = d.dates[static_cast<std::size_t>(time_index[row_day[r]])];
    if (label.empty())
      label = t.rows[r][c_date];
  }

  const Eigen::Index n = d.n_sites(), tn = static_cast<Eigen::Index>(d.days.size());
  const auto q = static_cast<Eigen::Index>(cols.covariates.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  d.y = Eigen::MatrixXd::Constant(n, tn, nan);
  Eigen::MatrixXd raw = Eigen::MatrixXd::Constant(n * tn, q, nan);
  std::vector<long> cell_line(static_cast<std::size_t>(n * tn), 0);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const Eigen::Index i = static_cast<Eigen::Index>(site_index[t.rows[r][c_site]]);
    const Eigen::Index tt = time_index[row_day[r]];
    const Eigen::Index cell = tt * n + i;
    auto &seen = cell_line[static_cast<std::size_t>(cell)];
    if (seen != 0)
      throw DataError("duplicate (site, date) = (" + t.rows[r][c_site] + ", " +
                      t.rows[r][c_date] + ") on lines " + std::to_string(seen) + " and " +
                      std::to_string(t.line[r]));
    seen = t.line[r];
    d.y(i, tt) = detail::field_number(t, r, c_y, true);
    for (Eigen::Index k = 0; k < q; ++k) {
      const double v = detail::field_number(t, r, cols.covariates[static_cast<std::size_t>(k)], true);
      if (std::isnan(v) && !std::isnan(d.y(i, tt)))
        throw DataError("line " + std::to_string(t.line[r]) + ", column '" +
                        cols.covariate_names[static_cast<std::size_t>(k)] +
                        "': covariate missing for an observed response");
      raw(cell, k) = v;
    }
  }

  double lat_sum = 0.0;
  for (const auto &s : d.sites)
    lat_sum += s.latitude;
  d.reference_latitude = options.reference_latitude.value_or(lat_sum / static_cast<double>(n));
  if (!has_xy)
    for (auto &s : d.sites) {
      try {
        s.xy = mercator_project(s.longitude, s.latitude, d.reference_latitude);
      } catch (const DomainError &e) {
        throw DataError("site '" + s.id + "': " + e.what());
      }
    }

  // Standardize over observed cells.
  d.standardization.names = cols.covariate_names;
  d.standardization.mean = Eigen::VectorXd::Zero(q);
  d.standardization.sd = Eigen::VectorXd::Ones(q);
  if (options.standardize && q > 0) {
    for (Eigen::Index k = 0; k < q; ++k) {
      double sum = 0.0, cnt = 0.0;
      for (Eigen::Index c = 0; c < n * tn; ++c)
        if (!std::isnan(d.y(c % n, c / n))) {
          sum += raw(c, k);
          cnt += 1.0;
        }
      if (cnt < 2.0)
        throw DataError("need at least two observed responses to standardize covariates");
      const double mean = sum / cnt;
      double ss = 0.0;
      for (Eigen::Index c = 0; c < n * tn; ++c)
        if (!std::isnan(d.y(c % n, c / n)))
          ss += (raw(c, k) - mean) * (raw(c, k) - mean);
      const double sd = std::sqrt(ss / (cnt - 1.0));
      if (!(sd > 0.0))
        throw DataError("covariate '" + cols.covariate_names[static_cast<std::size_t>(k)] +
                        "' is constant on observed cells");
      d.standardization.mean(k) = mean;
      d.standardization.sd(k) = sd;
    }
  }
  d.covariate_names.push_back("intercept");
  for (const auto &nm : cols.covariate_names)
    d.covariate_names.push_back(nm);
  d.X.resize(n * tn, q + 1);
  d.X.col(0).setOnes();
  for (Eigen::Index k = 0; k < q; ++k)
    d.X.col(k + 1) = ((raw.col(k).array() - d.standardization.mean(k)) / d.standardization.sd(k)).matrix();
  d.validate();
  return d;
}

inline Dataset load_dataset(const std::string &path, const LoadOptions &options = {}) {
  return dataset_from_table(read_csv_file(path), options);
}

// Writes one row per (site, time) cell with raw (destandardized) covariates
// and projected coordinates. A season column is written when the series has
// more than one segment.
inline void save_dataset(std::ostream &out, const Dataset &data) {
  const Eigen::Index n = data.n_sites(), t = data.n_times(), p = data.n_covariates();
  bool seasons = false;
  for (Eigen::Index tt = 1; tt < t; ++tt)
    seasons = seasons || data.segment_start[static_cast<std::size_t>(tt)];
  out << "site_id,date,longitude,latitude,x_km,y_km";
  if (seasons)
    out << ",season";
  out << ",y";
  for (Eigen::Index k = 1; k < p; ++k)
    out << ',' << detail::csv_escape(data.covariate_names[static_cast<std::size_t>(k)]);
  out << '\n';
  long season = 0;
  for (Eigen::Index tt = 0; tt < t; ++tt) {
    if (data.segment_start[static_cast<std::size_t>(tt)])
      ++season;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Site &s = data.sites[static_cast<std::size_t>(i)];
      out << detail::csv_escape(s.id) << ',' << data.dates[static_cast<std::size_t>(tt)] << ','
          << detail::format_double(s.longitude) << ',' << detail::format_double(s.latitude) << ','
          << detail::format_double(s.xy(0)) << ',' << detail::format_double(s.xy(1));
      if (seasons)
        out << ',' << season;
      out << ',' << detail::format_double(data.y(i, tt));
      for (Eigen::Index k = 1; k < p; ++k) {
        const double v = data.X(data.cell(i, tt), k);
        out << ',' << (std::isnan(v) ? std::string()
                                     : detail::format_double(data.standardization.invert(
                                           static_cast<std::size_t>(k - 1), v)));
      }
      out << '\n';
    }
  }
}

inline void save_dataset(const std::string &path, const Dataset &data) {
  std::ofstream out(path);
  if (!out)
    throw DataError("cannot write '" + path + "'");
  save_dataset(out, data);
  if (!out)
    throw DataError("write failed for '" + path + "'");
}

// ---- prediction targets ---------------------------------------------------------

struct TargetFile {
  std::vector<SpaceTimePoint> points;
  Eigen::VectorXd truth; // NaN when the file has no y value
  std::vector<std::string> site_ids;
  std::vector<std::string> dates;
};

// Targets in the dataset CSV layout; the y column is optional. Covariates must
// match the reference dataset's names and are standardized with its record;
// dates map onto its time index (days after the last date are forecasts).
inline TargetFile targets_from_table(const CsvTable &t, const Dataset &ref) {
  const auto cols = detail::map_columns(t, false);
  const auto &names = ref.standardization.names;
  if (cols.covariate_names.size() != names.size())
    throw DataError("targets: covariate columns do not match the dataset");
  std::vector<std::size_t> order;
  for (const auto &nm : names) {
    const auto it = cols.index.find(nm);
    if (it == cols.index.end())
      throw DataError("targets: missing covariate column '" + nm + "'");
    order.push_back(it->second);
  }
  std::unordered_map<long, Eigen::Index> time_index;
  for (std::size_t tt = 0; tt < ref.days.size(); ++tt)
    time_index[ref.days[tt]] = static_cast<Eigen::Index>(tt);
  const long last_day = ref.days.back();
  const Eigen::Index p = ref.n_covariates();

  TargetFile out;
  std::vector<double> truth;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto &row = t.rows[r];
    const std::string where = "targets line " + std::to_string(t.line[r]);
    SpaceTimePoint pt;
    if (cols.has("x_km")) {
      pt.s = Eigen::RowVector2d(detail::field_number(t, r, cols.at("x_km"), false),
                                detail::field_number(t, r, cols.at("y_km"), false));
    } else {
      try {
        pt.s = mercator_project(detail::field_number(t, r, cols.at("longitude"), false),
                                detail::field_number(t, r, cols.at("latitude"), false),
                                ref.reference_latitude);
      } catch (const DomainError &e) {
        throw DataError(where + ": " + e.what());
      }
    }
    const auto day = parse_day(row[cols.at("date")]);
    if (!day)
      throw DataError(where + ": unparseable date '" + row[cols.at("date")] + "'");
    if (const auto it = time_index.find(day->day); it != time_index.end())
      pt.t = static_cast<long>(it->second);
    else if (day->day > last_day)
      pt.t = static_cast<long>(ref.n_times() - 1) + (day->day - last_day);
    else
      throw DataError(where + ": date '" + row[cols.at("date")] +
                      "' is not a dataset date and not after the last one");
    pt.x.resize(p);
    pt.x(0) = 1.0;
    for (std::size_t k = 0; k < order.size(); ++k)
      pt.x(static_cast<Eigen::Index>(k + 1)) =
          ref.standardization.apply(k, detail::field_number(t, r, order[k], false));
    out.points.push_back(std::move(pt));
    truth.push_back(cols.has("y") ? detail::field_number(t, r, cols.at("y"), true)
                                  : std::numeric_limits<double>::quiet_NaN());
    out.site_ids.push_back(row[cols.at("site_id")]);
    out.dates.push_back(row[cols.at("date")]);
  }
  out.truth = Eigen::Map<Eigen::VectorXd>(truth.data(), static_cast<Eigen::Index>(truth.size()));
  return out;
}

inline TargetFile load_targets(const std::string &path, const Dataset &ref) {
  return targets_from_table(read_csv_file(path), ref);
}

// ---- result tables ----------------------------------------------------------------

inline void write_predictions(std::ostream &out, const TargetFile &targets,
                              const PredictionResult &res) {
  out << "site_id,date,y,mean,median,variance,sd,lower,upper\n";
  for (Eigen::Index a = 0; a < res.size(); ++a) {
    const auto au = static_cast<std::size_t>(a);
    out << detail::csv_escape(targets.site_ids[au]) << ',' << targets.dates[au] << ','
        << detail::format_double(targets.truth(a)) << ',' << detail::format_double(res.mean(a))
        << ',' << detail::format_double(res.median(a)) << ','
        << detail::format_double(res.variance(a)) << ',' << detail::format_double(res.sd(a)) << ','
        << detail::format_double(res.lower(a)) << ',' << detail::format_double(res.upper(a))
        << '\n';
  }
}

inline void write_variogram(std::ostream &out, const std::vector<VariogramResult> &results) {
  out << "stratum,kind,h,half_width,estimate,pairs\n";
  for (const auto &v : results)
    for (Eigen::Index b = 0; b < v.centers.size(); ++b)
      out << stratum_name(v.stratum) << ',' << kind_name(v.kind) << ','
          << detail::format_double(v.centers(b)) << ',' << detail::format_double(v.half_width)
          << ',' << (v.defined[static_cast<std::size_t>(b)] ? detail::format_double(v.estimate(b)) : "NA")
          << ',' << v.counts(b) << '\n';
}

inline void write_effects(std::ostream &out, const EffectReport &report,
                          const std::vector<std::string> &covariate_names) {
  out << "covariate,h_s,h_t,delta_mean,delta_lower,delta_upper,delta_tilde_mean,"
         "delta_tilde_lower,delta_tilde_upper,significant\n";
  const auto f = detail::format_double;
  for (const auto &r : report.rows)
    out << detail::csv_escape(covariate_names[static_cast<std::size_t>(r.k)]) << ',' << f(r.h_s)
        << ',' << r.h_t << ',' << f(r.delta.mean) << ',' << f(r.delta.lower) << ','
        << f(r.delta.upper) << ',' << f(r.delta_tilde.mean) << ',' << f(r.delta_tilde.lower)
        << ',' << f(r.delta_tilde.upper) << ',' << (r.significant ? 1 : 0) << '\n';
}

inline void write_covariate_effects(std::ostream &out, const EffectReport &report,
                                    const std::vector<std::string> &covariate_names) {
  out << "covariate,beta_mean,beta_lower,beta_upper,beta_scaled_mean,beta_scaled_lower,"
         "beta_scaled_upper,variance,spatial,temporal\n";
  const auto f = detail::format_double;
  for (const auto &e : report.covariates)
    out << detail::csv_escape(covariate_names[static_cast<std::size_t>(e.k)]) << ','
        << f(e.beta.mean) << ',' << f(e.beta.lower) << ',' << f(e.beta.upper) << ','
        << f(e.beta_scaled.mean) << ',' << f(e.beta_scaled.lower) << ','
        << f(e.beta_scaled.upper) << ',' << e.variance << ',' << e.spatial << ',' << e.temporal
        << '\n';
}

// ---- draws file -------------------------------------------------------------------

inline constexpr char kDrawsMagic[8] = {'N', 'S', 'C', 'O', 'V', 'D', 'R', 'W'};
inline constexpr char kDrawsEnd[8] = {'N', 'S', 'C', 'O', 'V', 'E', 'N', 'D'};
inline constexpr std::uint32_t kDrawsVersion = 1;

struct DrawsFile {
  PosteriorDraws posterior;
  Eigen::Index n_sites = 0, n_times = 0, n_covariates = 0;
  std::vector<std::string> covariate_names;
};

namespace detail {

inline std::uint64_t fnv1a(const char *data, std::size_t n,
                           std::uint64_t h = 14695981039346656037ULL) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::size_t record_doubles(Eigen::Index m, Eigen::Index n, Eigen::Index t, Eigen::Index p) {
  return static_cast<std::size_t>(p + 1 + m * p + 3 * m + 2 + n + m * n * t);
}

inline void pack_state(const ParamState &s, std::vector<double> &buf) {
  buf.clear();
  const auto put = [&](const auto &mat) {
    buf.insert(buf.end(), mat.data(), mat.data() + mat.size());
  };
  put(s.beta);
  buf.push_back(s.sigma2);
  put(s.alpha);
  put(s.rho);
  put(s.tau2);
  put(s.gamma);
  buf.push_back(s.rho0);
  buf.push_back(s.tau0_2);
  put(s.delta);
  for (const auto &th : s.theta)
    put(th);
}

inline ParamState unpack_state(const double *v, Eigen::Index m, Eigen::Index n, Eigen::Index t,
                               Eigen::Index p) {
  ParamState s;
  const auto take = [&](Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd out = Eigen::Map<const Eigen::MatrixXd>(v, rows, cols);
    v += rows * cols;
    return out;
  };
  s.beta = take(p, 1);
  s.sigma2 = *v++;
  s.alpha = take(m, p);
  s.rho = take(m, 1);
  s.tau2 = take(m, 1);
  s.gamma = take(m, 1);
  s.rho0 = *v++;
  s.tau0_2 = *v++;
  s.delta = take(n, 1);
  for (Eigen::Index j = 0; j < m; ++j)
    s.theta.push_back(take(n, t));
  return s;
}

inline nlohmann::json draws_header(const DrawsFile &f) {
  using nlohmann::json;
  const auto &pd = f.posterior;
  json lags = json::array();
  for (const auto &l : pd.config.monitor_lags)
    lags.push_back({l.h_s, l.h_t});
  json mh = json::array();
  for (const auto &st : pd.mh)
    mh.push_back({{"name", st.name},
                  {"log_step", st.log_step},
                  {"tries_burn_in", st.tries_burn_in},
                  {"accepts_burn_in", st.accepts_burn_in},
                  {"tries", st.tries},
                  {"accepts", st.accepts}});
  return json{
      {"format", "nscov-draws"},
      {"version", kDrawsVersion},
      {"dims",
       {{"components", pd.spec.components},
        {"sites", f.n_sites},
        {"times", f.n_times},
        {"covariates", f.n_covariates}}},
      {"covariate_names", f.covariate_names},
      {"model", {{"components", pd.spec.components}, {"kappa", pd.spec.kappa}}},
      {"priors",
       {{"beta_var", pd.hyper.beta_var},
        {"alpha_var", pd.hyper.alpha_var},
        {"precision_shape", pd.hyper.precision_shape},
        {"precision_rate", pd.hyper.precision_rate},
        {"rho_max", pd.hyper.rho_max}}},
      {"sampler",
       {{"n_iter", pd.config.n_iter},
        {"burn_in", pd.config.burn_in},
        {"thin", pd.config.thin},
        {"step_alpha", pd.config.step_alpha},
        {"step_rho", pd.config.step_rho},
        {"adapt", pd.config.adapt},
        {"target_accept", pd.config.target_accept},
        {"seed", pd.config.seed},
        {"init_rho", pd.config.init_rho},
        {"init_gamma", pd.config.init_gamma},
        {"monitor_lags", lags}}},
      {"mh", mh},
      {"record_doubles",
       record_doubles(pd.spec.components, f.n_sites, f.n_times, f.n_covariates)}};
}

} // namespace detail

// Layout: magic[8] "NSCOVDRW", uint32 version, uint64 header length L,
// L bytes of JSON header, count records of little-endian float64, then
// magic[8] "NSCOVEND", uint64 count, uint64 FNV-1a of every preceding byte.
inline void save_draws(std::ostream &out, const DrawsFile &f) {
  const auto &pd = f.posterior;
  const Eigen::Index m = pd.spec.components;
  const std::string header = detail::draws_header(f).dump();
  std::uint64_t h = detail::fnv1a(kDrawsMagic, 8);
  const auto emit = [&](const char *data, std::size_t n) {
    out.write(data, static_cast<std::streamsize>(n));
    h = detail::fnv1a(data, n, h);
  };
  out.write(kDrawsMagic, 8);
  const std::uint32_t version = kDrawsVersion;
  emit(reinterpret_cast<const char *>(&version), sizeof version);
  const std::uint64_t len = header.size();
  emit(reinterpret_cast<const char *>(&len), sizeof len);
  emit(header.data(), header.size());
  const std::size_t rec = detail::record_doubles(m, f.n_sites, f.n_times, f.n_covariates);
  std::vector<double> buf;
  for (const auto &s : pd.draws) {
    detail::pack_state(s, buf);
    if (buf.size() != rec)
      throw ArgumentError("save_draws: draw does not match the declared dimensions");
    emit(reinterpret_cast<const char *>(buf.data()), rec * sizeof(double));
  }
  const std::uint64_t count = pd.draws.size();
  out.write(kDrawsEnd, 8);
  out.write(reinterpret_cast<const char *>(&count), sizeof count);
  out.write(reinterpret_cast<const char *>(&h), sizeof h);
  if (!out)
    throw DataError("save_draws: write failed");
}

inline void save_draws(const std::string &path, const DrawsFile &f) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw DataError("cannot write '" + path + "'");
  save_draws(out, f);
}

inline DrawsFile load_draws_bytes(const std::string &bytes) {
  const std::size_t size = bytes.size();
  constexpr std::size_t footer = 8 + 8 + 8;
  if (size < 8 + 4 + 8 + footer || std::memcmp(bytes.data(), kDrawsMagic, 8) != 0)
    throw DataError("draws file: bad magic or too short");
  std::uint32_t version = 0;
  std::memcpy(&version, bytes.data() + 8, 4);
  if (version != kDrawsVersion)
    throw DataError("draws file: version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(kDrawsVersion) + ")");
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 12, 8);
  if (len > size - 20 - footer)
    throw DataError("draws file: truncated header");
  DrawsFile f;
  nlohmann::json hdr;
  try {
    hdr = nlohmann::json::parse(bytes.begin() + 20, bytes.begin() + 20 + static_cast<long>(len));
    auto &pd = f.posterior;
    const auto &dims = hdr.at("dims");
    pd.spec.components = dims.at("components").get<Eigen::Index>();
    f.n_sites = dims.at("sites").get<Eigen::Index>();
    f.n_times = dims.at("times").get<Eigen::Index>();
    f.n_covariates = dims.at("covariates").get<Eigen::Index>();
    f.covariate_names = hdr.at("covariate_names").get<std::vector<std::string>>();
    pd.spec.kappa = hdr.at("model").at("kappa").get<double>();
    const auto &pr = hdr.at("priors");
    pd.hyper.beta_var = pr.at("beta_var").get<double>();
    pd.hyper.alpha_var = pr.at("alpha_var").get<double>();
    pd.hyper.precision_shape = pr.at("precision_shape").get<double>();
    pd.hyper.precision_rate = pr.at("precision_rate").get<double>();
    pd.hyper.rho_max = pr.at("rho_max").get<double>();
    const auto &sc = hdr.at("sampler");
    pd.config.n_iter = sc.at("n_iter").get<long>();
    pd.config.burn_in = sc.at("burn_in").get<long>();
    pd.config.thin = sc.at("thin").get<long>();
    pd.config.step_alpha = sc.at("step_alpha").get<double>();
    pd.config.step_rho = sc.at("step_rho").get<double>();
    pd.config.adapt = sc.at("adapt").get<bool>();
    pd.config.target_accept = sc.at("target_accept").get<double>();
    pd.config.seed = sc.at("seed").get<std::uint64_t>();
    pd.config.init_rho = sc.at("init_rho").get<double>();
    pd.config.init_gamma = sc.at("init_gamma").get<double>();
    pd.config.monitor_lags.clear();
    for (const auto &l : sc.at("monitor_lags"))
      pd.config.monitor_lags.push_back({l.at(0).get<double>(), l.at(1).get<long>()});
    for (const auto &st : hdr.at("mh")) {
      MhStat m;
      m.name = st.at("name").get<std::string>();
      m.log_step = st.at("log_step").get<double>();
      m.tries_burn_in = st.at("tries_burn_in").get<long>();
      m.accepts_burn_in = st.at("accepts_burn_in").get<long>();
      m.tries = st.at("tries").get<long>();
      m.accepts = st.at("accepts").get<long>();
      pd.mh.push_back(m);
    }
  } catch (const nlohmann::json::exception &e) {
    throw DataError(std::string("draws file: malformed header: ") + e.what());
  }
  auto &pd = f.posterior;
  const std::size_t rec =
      detail::record_doubles(pd.spec.components, f.n_sites, f.n_times, f.n_covariates) *
      sizeof(double);
  const std::size_t body = 20 + len;
  if ((size - body) < footer || (size - body - footer) % rec != 0)
    throw DataError("draws file: truncated or corrupted record section");
  const std::size_t count = (size - body - footer) / rec;
  const char *foot = bytes.data() + size - footer;
  std::uint64_t stored_count = 0, stored_hash = 0;
  std::memcpy(&stored_count, foot + 8, 8);
  std::memcpy(&stored_hash, foot + 16, 8);
  if (std::memcmp(foot, kDrawsEnd, 8) != 0 || stored_count != count)
    throw DataError("draws file: missing or inconsistent footer (file truncated?)");
  if (detail::fnv1a(bytes.data(), size - footer) != stored_hash)
    throw DataError("draws file: checksum mismatch");
  std::vector<double> buf(rec / sizeof(double));
  for (std::size_t d = 0; d < count; ++d) {
    std::memcpy(buf.data(), bytes.data() + body + d * rec, rec);
    pd.draws.push_back(detail::unpack_state(buf.data(), pd.spec.components, f.n_sites, f.n_times,
                                            f.n_covariates));
  }
  return f;
}

inline DrawsFile load_draws(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_draws_bytes(ss.str());
}

} // namespace nscov
