#include "fracbench/io/results.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "fracbench/error.hpp"
#include "fracbench/io/file.hpp"

namespace fracbench::io {

using nlohmann::json;

ResultFormat format_from_path(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".csv") return ResultFormat::Csv;
  if (ext == ".json") return ResultFormat::Json;
  throw Error(ErrorCode::InvalidArgument, "unknown result format for " + path.string());
}

namespace {

[[noreturn]] void parse_fail(const std::string& what) { throw Error(ErrorCode::ParseError, what); }

// Value as it appears in a result file: rounded to 6 significant digits.
double rounded(double v) {
  if (!std::isfinite(v)) return v;
  return std::strtod(format_g6(v).c_str(), nullptr);
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

// RFC 4180 style: quoted fields may contain commas, quotes and newlines.
std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) parse_fail("CSV: unterminated quoted field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

double parse_double(const std::string& s) {
  if (s == "nan" || s.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) parse_fail("CSV: bad number '" + s + "'");
  return v;
}

int parse_int(const std::string& s) {
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) parse_fail("CSV: bad integer '" + s + "'");
  return v;
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    parse_fail(std::string("JSON: ") + e.what());
  }
}

// Wraps nlohmann lookups so missing keys and type errors become ParseError.
template <typename Fn>
auto guarded(Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const json::exception& e) {
    parse_fail(std::string("JSON: ") + e.what());
  }
}

json number_or_null(double v) { return std::isfinite(v) ? json(rounded(v)) : json(nullptr); }

double number_from(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

std::vector<std::string> leaderboard_header() {
  std::vector<std::string> h{"team"};
  for (Metric m : kMetrics) h.emplace_back(metric_name(m));
  for (Metric m : kMetrics) h.push_back("rank_" + std::string(metric_name(m)));
  h.insert(h.end(), {"mean_rank", "final_rank", "runtime_s"});
  return h;
}

std::string join_row(const std::vector<std::string>& cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) line += ',';
    line += csv_field(cells[i]);
  }
  return line + '\n';
}

void write_text(const std::filesystem::path& path, const std::string& text) { write_file_atomic(path, text); }

}  // namespace

std::vector<LeaderboardRecord> to_records(const Leaderboard& board) {
  std::vector<LeaderboardRecord> out;
  for (const LeaderboardEntry& e : board.entries) {
    LeaderboardRecord r;
    r.team = e.team;
    for (int m = 0; m < kMetricCount; ++m) r.means[m] = rounded(e.means[m]);
    r.ranks = e.ranks;
    r.mean_rank = rounded(e.mean_rank);
    r.final_rank = e.final_rank;
    r.runtime_s = rounded(e.runtime_s);
    out.push_back(std::move(r));
  }
  return out;
}

std::string leaderboard_csv(const Leaderboard& board) {
  std::string out = join_row(leaderboard_header());
  for (const LeaderboardEntry& e : board.entries) {
    std::vector<std::string> cells{e.team};
    for (double v : e.means) cells.push_back(format_g6(v));
    for (int r : e.ranks) cells.push_back(std::to_string(r));
    cells.push_back(format_g6(e.mean_rank));
    cells.push_back(std::to_string(e.final_rank));
    cells.push_back(format_g6(e.runtime_s));
    out += join_row(cells);
  }
  return out;
}

std::string leaderboard_json(const Leaderboard& board) {
  json entries = json::array();
  for (const LeaderboardRecord& r : to_records(board)) {
    json e = json::object();
    e["team"] = r.team;
    for (int m = 0; m < kMetricCount; ++m) e[std::string(metric_name(kMetrics[m]))] = number_or_null(r.means[m]);
    for (int m = 0; m < kMetricCount; ++m) e["rank_" + std::string(metric_name(kMetrics[m]))] = r.ranks[m];
    e["mean_rank"] = r.mean_rank;
    e["final_rank"] = r.final_rank;
    e["runtime_s"] = r.runtime_s;
    entries.push_back(std::move(e));
  }
  json doc = json::object();
  doc["entries"] = std::move(entries);
  return doc.dump(2) + '\n';
}

std::vector<LeaderboardRecord> parse_leaderboard_csv(std::string_view text) {
  const auto rows = parse_csv(text);
  if (rows.empty()) parse_fail("CSV: missing header");
  if (rows.front() != leaderboard_header()) parse_fail("CSV: unexpected leaderboard header");
  std::vector<LeaderboardRecord> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& c = rows[i];
    if (c.size() != rows.front().size()) parse_fail("CSV: row " + std::to_string(i) + " has the wrong column count");
    LeaderboardRecord r;
    r.team = c[0];
    for (int m = 0; m < kMetricCount; ++m) r.means[m] = parse_double(c[1 + m]);
    for (int m = 0; m < kMetricCount; ++m) r.ranks[m] = parse_int(c[1 + kMetricCount + m]);
    r.mean_rank = parse_double(c[13]);
    r.final_rank = parse_int(c[14]);
    r.runtime_s = parse_double(c[15]);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<LeaderboardRecord> parse_leaderboard_json(std::string_view text) {
  const json doc = parse_json(text);
  return guarded([&] {
    std::vector<LeaderboardRecord> out;
    for (const json& e : doc.at("entries")) {
      LeaderboardRecord r;
      r.team = e.at("team").get<std::string>();
      for (int m = 0; m < kMetricCount; ++m) {
        const std::string name(metric_name(kMetrics[m]));
        r.means[m] = number_from(e.at(name));
        r.ranks[m] = e.at("rank_" + name).get<int>();
      }
      r.mean_rank = e.at("mean_rank").get<double>();
      r.final_rank = e.at("final_rank").get<int>();
      r.runtime_s = e.at("runtime_s").get<double>();
      out.push_back(std::move(r));
    }
    return out;
  });
}

std::vector<LeaderboardRecord> read_leaderboard(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  return format_from_path(path) == ResultFormat::Csv ? parse_leaderboard_csv(text) : parse_leaderboard_json(text);
}

std::string stability_csv(const StabilityReport& report) {
  std::vector<std::string> header{"team", "original_rank"};
  for (std::size_t r = 1; r <= report.teams.size(); ++r) header.push_back("rank_" + std::to_string(r));
  std::string out = join_row(header);
  for (std::size_t t = 0; t < report.teams.size(); ++t) {
    std::vector<std::string> cells{report.teams[t], std::to_string(report.original_ranks[t])};
    for (double f : report.rank_frequency[t]) cells.push_back(format_g6(f));
    out += join_row(cells);
  }
  return out;
}

std::string stability_json(const StabilityReport& report) {
  json doc = json::object();
  doc["n_samples"] = report.n_samples;
  doc["seed"] = report.seed;
  doc["tau_mean"] = number_or_null(report.tau_mean);
  doc["tau_ci_low"] = number_or_null(report.tau_ci_low);
  doc["tau_ci_high"] = number_or_null(report.tau_ci_high);
  json teams = json::array();
  for (std::size_t t = 0; t < report.teams.size(); ++t) {
    json freq = json::array();
    for (double f : report.rank_frequency[t]) freq.push_back(rounded(f));
    teams.push_back({{"team", report.teams[t]}, {"original_rank", report.original_ranks[t]}, {"rank_frequency", freq}});
  }
  doc["teams"] = std::move(teams);
  json taus = json::array();
  for (double t : report.taus) taus.push_back(number_or_null(t));
  doc["taus"] = std::move(taus);
  return doc.dump(2) + '\n';
}

StabilityReport parse_stability_json(std::string_view text) {
  const json doc = parse_json(text);
  return guarded([&] {
    StabilityReport r;
    r.n_samples = doc.at("n_samples").get<std::size_t>();
    r.seed = doc.at("seed").get<std::uint64_t>();
    r.tau_mean = number_from(doc.at("tau_mean"));
    r.tau_ci_low = number_from(doc.at("tau_ci_low"));
    r.tau_ci_high = number_from(doc.at("tau_ci_high"));
    for (const json& t : doc.at("teams")) {
      r.teams.push_back(t.at("team").get<std::string>());
      r.original_ranks.push_back(t.at("original_rank").get<int>());
      r.rank_frequency.push_back(t.at("rank_frequency").get<std::vector<double>>());
    }
    for (const json& t : doc.at("taus")) r.taus.push_back(number_from(t));
    return r;
  });
}

std::string significance_csv(const SignificanceMatrix& m) {
  std::vector<std::string> header{"team"};
  header.insert(header.end(), m.teams.begin(), m.teams.end());
  std::string out = join_row(header);
  for (std::size_t i = 0; i < m.teams.size(); ++i) {
    std::vector<std::string> cells{m.teams[i]};
    for (double p : m.p[i]) cells.push_back(std::isnan(p) ? std::string() : format_g6(p));
    out += join_row(cells);
  }
  return out;
}

std::string significance_json(const SignificanceMatrix& m) {
  json doc = json::object();
  doc["metric"] = metric_name(m.metric);
  doc["teams"] = m.teams;
  json p = json::array();
  for (const auto& row : m.p) {
    json r = json::array();
    for (double v : row) r.push_back(number_or_null(v));
    p.push_back(std::move(r));
  }
  doc["p"] = std::move(p);
  return doc.dump(2) + '\n';
}

SignificanceMatrix parse_significance_csv(std::string_view text, Metric metric) {
  const auto rows = parse_csv(text);
  if (rows.empty() || rows.front().empty() || rows.front()[0] != "team") parse_fail("CSV: bad significance header");
  SignificanceMatrix m;
  m.metric = metric;
  m.teams.assign(rows.front().begin() + 1, rows.front().end());
  if (rows.size() != m.teams.size() + 1) parse_fail("CSV: significance matrix is not square");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != m.teams.size() + 1 || rows[i][0] != m.teams[i - 1])
      parse_fail("CSV: malformed significance row " + std::to_string(i));
    std::vector<double> row;
    for (std::size_t j = 1; j < rows[i].size(); ++j) row.push_back(parse_double(rows[i][j]));
    m.p.push_back(std::move(row));
  }
  return m;
}

SignificanceMatrix parse_significance_json(std::string_view text) {
  const json doc = parse_json(text);
  SignificanceMatrix m = guarded([&] {
    SignificanceMatrix out;
    out.metric = metric_from_name(doc.at("metric").get<std::string>());
    out.teams = doc.at("teams").get<std::vector<std::string>>();
    for (const json& row : doc.at("p")) {
      std::vector<double> r;
      for (const json& v : row) r.push_back(number_from(v));
      out.p.push_back(std::move(r));
    }
    return out;
  });
  if (m.p.size() != m.teams.size()) parse_fail("JSON: significance matrix is not square");
  for (const auto& row : m.p) {
    if (row.size() != m.teams.size()) parse_fail("JSON: significance matrix is not square");
  }
  return m;
}

void write_results(const Leaderboard& board, const std::filesystem::path& path, ResultFormat format) {
  write_text(path, format == ResultFormat::Csv ? leaderboard_csv(board) : leaderboard_json(board));
}

void write_results(const StabilityReport& report, const std::filesystem::path& path, ResultFormat format) {
  write_text(path, format == ResultFormat::Csv ? stability_csv(report) : stability_json(report));
}

void write_results(const SignificanceMatrix& m, const std::filesystem::path& path, ResultFormat format) {
  write_text(path, format == ResultFormat::Csv ? significance_csv(m) : significance_json(m));
}

// ---------------------------------------------------------------------------
// Study documents

namespace {

json metrics_json(const MetricArray& values) {
  json j = json::object();
  for (int m = 0; m < kMetricCount; ++m) j[std::string(metric_name(kMetrics[m]))] = values[m];
  return j;
}

MetricArray metrics_from(const json& j) {
  MetricArray out{};
  for (int m = 0; m < kMetricCount; ++m) out[m] = j.at(std::string(metric_name(kMetrics[m]))).get<double>();
  return out;
}

}  // namespace

std::string study_json(const Study& study) {
  json doc = json::object();
  doc["kind"] = study.kind;
  doc["warnings"] = study.warnings;
  json teams = json::array();
  for (const TeamResult& t : study.teams) {
    json cases = json::array();
    for (std::size_t c = 0; c < t.per_case.size(); ++c) {
      const CaseMetrics& cm = t.per_case[c];
      json row = json::object();
      if (c < t.case_ids.size()) row["case"] = t.case_ids[c];
      MetricArray values{};
      for (int m = 0; m < kMetricCount; ++m) values[m] = metric_value(cm, kMetrics[m]);
      row.update(metrics_json(values));
      row["fp_count"] = cm.fp_count;
      if (cm.runtime_s) row["runtime_s"] = *cm.runtime_s;
      cases.push_back(std::move(row));
    }
    teams.push_back({{"team", t.team}, {"runtime_s", t.mean_runtime_s}, {"cases", std::move(cases)}});
  }
  for (const TeamMeans& t : study.means_only) {
    teams.push_back({{"team", t.team}, {"runtime_s", t.runtime_s}, {"means", metrics_json(t.means)}});
  }
  doc["teams"] = std::move(teams);
  return doc.dump(2) + '\n';
}

Study parse_study_json(std::string_view text) {
  const json doc = parse_json(text);
  Study study = guarded([&] {
    Study s;
    s.kind = doc.value("kind", std::string("ct"));
    s.warnings = doc.value("warnings", 0);
    for (const json& t : doc.at("teams")) {
      const std::string name = t.at("team").get<std::string>();
      const double runtime = t.value("runtime_s", 0.0);
      if (t.contains("cases")) {
        TeamResult r;
        r.team = name;
        r.mean_runtime_s = runtime;
        for (const json& row : t.at("cases")) {
          const MetricArray v = metrics_from(row);
          CaseMetrics cm{v[0], v[1], v[2], v[3], v[4], v[5], row.value("fp_count", 0), std::nullopt};
          if (row.contains("runtime_s")) cm.runtime_s = row.at("runtime_s").get<double>();
          if (row.contains("case")) r.case_ids.push_back(row.at("case").get<std::string>());
          r.per_case.push_back(cm);
        }
        if (!r.case_ids.empty() && r.case_ids.size() != r.per_case.size())
          parse_fail("study: team " + name + " names only some of its cases");
        s.teams.push_back(std::move(r));
      } else {
        s.means_only.push_back(TeamMeans{name, metrics_from(t.at("means")), runtime});
      }
    }
    return s;
  });
  if (study.kind != "ct" && study.kind != "xray") parse_fail("study: kind must be ct or xray");
  if (!study.teams.empty() && !study.means_only.empty())
    parse_fail("study: teams mix per-case metrics and means-only entries");
  return study;
}

std::vector<TeamMeans> study_means(const Study& study) {
  if (!study.means_only.empty()) return study.means_only;
  return aggregate_means(study.teams);
}

std::string cases_csv(const Study& study) {
  std::vector<std::string> header{"team", "case"};
  for (Metric m : kMetrics) header.emplace_back(metric_name(m));
  header.insert(header.end(), {"fp_count", "runtime_s"});
  std::string out = join_row(header);
  for (const TeamResult& t : study.teams) {
    for (std::size_t c = 0; c < t.per_case.size(); ++c) {
      const CaseMetrics& cm = t.per_case[c];
      std::vector<std::string> cells{t.team, c < t.case_ids.size() ? t.case_ids[c] : std::to_string(c)};
      for (Metric m : kMetrics) cells.push_back(format_g6(metric_value(cm, m)));
      cells.push_back(std::to_string(cm.fp_count));
      cells.push_back(cm.runtime_s ? format_g6(*cm.runtime_s) : std::string());
      out += join_row(cells);
    }
  }
  return out;
}

}  // namespace fracbench::io
