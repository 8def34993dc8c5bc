#include "fracbench/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "fracbench/error.hpp"
#include "fracbench/metrics.hpp"
#include "fracbench/parallel.hpp"
#include "fracbench/rng.hpp"

namespace fracbench {

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::IouF: return "iou_f";
    case Metric::Hd95F: return "hd95_f";
    case Metric::AssdF: return "assd_f";
    case Metric::IouA: return "iou_a";
    case Metric::Hd95A: return "hd95_a";
    case Metric::AssdA: return "assd_a";
  }
  return "unknown";
}

Metric metric_from_name(std::string_view name) {
  for (Metric m : kMetrics) {
    if (metric_name(m) == name) return m;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown metric '" + std::string(name) + "'");
}

double metric_value(const CaseMetrics& c, Metric m) {
  switch (m) {
    case Metric::IouF: return c.iou_f;
    case Metric::Hd95F: return c.hd95_f;
    case Metric::AssdF: return c.assd_f;
    case Metric::IouA: return c.iou_a;
    case Metric::Hd95A: return c.hd95_a;
    case Metric::AssdA: return c.assd_a;
  }
  return 0.0;
}

namespace {

void check_alignment(std::span<const TeamResult> results) {
  if (results.empty()) return;
  const TeamResult& ref = results.front();
  if (ref.per_case.empty()) throw Error(ErrorCode::InvalidArgument, "team '" + ref.team + "' has no cases");
  for (const TeamResult& r : results) {
    if (r.per_case.size() != ref.per_case.size())
      throw Error(ErrorCode::CaseAlignmentError, "team '" + r.team + "' has a different number of cases");
    if (!r.case_ids.empty() && r.case_ids.size() != r.per_case.size())
      throw Error(ErrorCode::CaseAlignmentError, "team '" + r.team + "' has case ids that do not match its cases");
    if (!r.case_ids.empty() && !ref.case_ids.empty() && r.case_ids != ref.case_ids)
      throw Error(ErrorCode::CaseAlignmentError, "team '" + r.team + "' lists different cases");
  }
}

// Means over an index multiset; `cases` may repeat indices (bootstrap).
std::vector<TeamMeans> means_over(std::span<const TeamResult> results, std::span<const std::size_t> cases) {
  std::vector<TeamMeans> out;
  out.reserve(results.size());
  for (const TeamResult& r : results) {
    TeamMeans tm;
    tm.team = r.team;
    tm.runtime_s = r.mean_runtime_s;
    for (Metric m : kMetrics) {
      double sum = 0.0;
      for (std::size_t c : cases) sum += metric_value(r.per_case[c], m);
      tm.means[static_cast<int>(m)] = sum / static_cast<double>(cases.size());
    }
    out.push_back(std::move(tm));
  }
  return out;
}

struct RankedTeam {
  std::size_t input_index;
  std::array<int, kMetricCount> ranks;
  double mean_rank;
};

std::vector<RankedTeam> compute_ranks(std::span<const TeamMeans> means) {
  const std::size_t n = means.size();
  std::vector<RankedTeam> teams(n);
  for (std::size_t i = 0; i < n; ++i) teams[i].input_index = i;
  for (Metric m : kMetrics) {
    const int col = static_cast<int>(m);
    for (std::size_t i = 0; i < n; ++i) {
      const double vi = means[i].means[col];
      int better = 0;
      for (std::size_t j = 0; j < n; ++j) {
        const double vj = means[j].means[col];
        better += higher_is_better(m) ? (vj > vi) : (vj < vi);
      }
      teams[i].ranks[col] = better + 1;
    }
  }
  for (RankedTeam& t : teams) {
    t.mean_rank = std::accumulate(t.ranks.begin(), t.ranks.end(), 0) / static_cast<double>(kMetricCount);
  }
  // Integer rank sums compare exactly; the mean is for display only.
  std::stable_sort(teams.begin(), teams.end(), [&](const RankedTeam& a, const RankedTeam& b) {
    const int sa = std::accumulate(a.ranks.begin(), a.ranks.end(), 0);
    const int sb = std::accumulate(b.ranks.begin(), b.ranks.end(), 0);
    if (sa != sb) return sa < sb;
    const double ra = means[a.input_index].runtime_s, rb = means[b.input_index].runtime_s;
    if (ra != rb) return ra < rb;
    return means[a.input_index].team < means[b.input_index].team;
  });
  return teams;
}

void check_team_count(std::size_t n) {
  if (n < 2) throw Error(ErrorCode::InsufficientTeams, "ranking needs at least two teams");
}

}  // namespace

std::vector<TeamMeans> aggregate_means(std::span<const TeamResult> results) {
  check_alignment(results);
  if (results.empty()) return {};
  std::vector<std::size_t> cases(results.front().per_case.size());
  std::iota(cases.begin(), cases.end(), 0);
  return means_over(results, cases);
}

const LeaderboardEntry& Leaderboard::find(std::string_view team) const {
  for (const LeaderboardEntry& e : entries) {
    if (e.team == team) return e;
  }
  throw Error(ErrorCode::InvalidArgument, "team '" + std::string(team) + "' not on the leaderboard");
}

std::vector<std::string> Leaderboard::order() const {
  std::vector<std::string> out;
  for (const LeaderboardEntry& e : entries) out.push_back(e.team);
  return out;
}

Leaderboard rank_teams(std::span<const TeamMeans> means) {
  check_team_count(means.size());
  const std::vector<RankedTeam> ranked = compute_ranks(means);
  Leaderboard board;
  for (std::size_t pos = 0; pos < ranked.size(); ++pos) {
    const RankedTeam& t = ranked[pos];
    const TeamMeans& tm = means[t.input_index];
    LeaderboardEntry e;
    e.team = tm.team;
    e.means = tm.means;
    e.ranks = t.ranks;
    e.mean_rank = t.mean_rank;
    e.final_rank = static_cast<int>(pos) + 1;
    e.runtime_s = tm.runtime_s;
    auto sum = [](const RankedTeam& r) { return std::accumulate(r.ranks.begin(), r.ranks.end(), 0); };
    for (std::size_t other = 0; other < ranked.size(); ++other) {
      if (other == pos || sum(ranked[other]) != sum(t)) continue;
      e.runtime_tie_break = true;
      if (means[ranked[other].input_index].runtime_s == tm.runtime_s) e.name_tie_break = true;
    }
    board.entries.push_back(std::move(e));
  }
  return board;
}

std::vector<int> final_ranks(std::span<const TeamMeans> means) {
  check_team_count(means.size());
  const std::vector<RankedTeam> ranked = compute_ranks(means);
  std::vector<int> out(means.size());
  for (std::size_t pos = 0; pos < ranked.size(); ++pos) out[ranked[pos].input_index] = static_cast<int>(pos) + 1;
  return out;
}

double kendall_tau(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::LengthMismatch, "rankings differ in length");
  if (a.size() < 2) throw Error(ErrorCode::InvalidArgument, "kendall tau needs at least two items");
  long long concordant = 0, discordant = 0, ties_a = 0, ties_b = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const double da = a[i] - a[j];
      const double db = b[i] - b[j];
      if (da == 0.0 && db == 0.0) continue;
      if (da == 0.0) {
        ++ties_a;
      } else if (db == 0.0) {
        ++ties_b;
      } else if ((da > 0.0) == (db > 0.0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const double denom =
      std::sqrt(static_cast<double>((concordant + discordant + ties_a) * (concordant + discordant + ties_b)));
  if (denom == 0.0) throw Error(ErrorCode::InvalidArgument, "kendall tau undefined for a constant ranking");
  return static_cast<double>(concordant - discordant) / denom;
}

double kendall_tau(std::span<const int> a, std::span<const int> b) {
  const std::vector<double> da(a.begin(), a.end());
  const std::vector<double> db(b.begin(), b.end());
  return kendall_tau(da, db);
}

std::uint64_t bootstrap_stream_seed(std::uint64_t seed, std::uint64_t sample) { return stream_seed(seed, sample); }

std::size_t bootstrap_case_index(std::uint64_t draw, std::size_t n) {
  return static_cast<std::size_t>((static_cast<unsigned __int128>(draw) * n) >> 64);
}

StabilityReport bootstrap_stability(std::span<const TeamResult> results, std::size_t n_samples, std::uint64_t seed,
                                    unsigned jobs) {
  check_alignment(results);
  check_team_count(results.size());
  if (n_samples == 0) throw Error(ErrorCode::InvalidArgument, "bootstrap needs at least one sample");

  const std::size_t n_cases = results.front().per_case.size();
  const std::size_t n_teams = results.size();

  StabilityReport report;
  report.n_samples = n_samples;
  report.seed = seed;
  for (const TeamResult& r : results) report.teams.push_back(r.team);
  report.original_ranks = final_ranks(aggregate_means(results));

  std::vector<std::vector<int>> sample_ranks(n_samples);
  report.taus.resize(n_samples);
  parallel_for(n_samples, jobs, [&](std::size_t s) {
    std::mt19937_64 gen(bootstrap_stream_seed(seed, s));
    std::vector<std::size_t> cases(n_cases);
    for (std::size_t& c : cases) c = bootstrap_case_index(gen(), n_cases);
    sample_ranks[s] = final_ranks(means_over(results, cases));
    report.taus[s] = kendall_tau(std::span<const int>(sample_ranks[s]), std::span<const int>(report.original_ranks));
  });

  report.rank_frequency.assign(n_teams, std::vector<double>(n_teams, 0.0));
  for (const std::vector<int>& ranks : sample_ranks) {
    for (std::size_t t = 0; t < n_teams; ++t) report.rank_frequency[t][static_cast<std::size_t>(ranks[t] - 1)] += 1.0;
  }
  for (auto& row : report.rank_frequency) {
    for (double& f : row) f /= static_cast<double>(n_samples);
  }

  report.tau_mean = std::accumulate(report.taus.begin(), report.taus.end(), 0.0) / static_cast<double>(n_samples);
  std::vector<double> sorted = report.taus;
  std::sort(sorted.begin(), sorted.end());
  report.tau_ci_low = percentile_sorted(sorted, 0.025);
  report.tau_ci_high = percentile_sorted(sorted, 0.975);
  return report;
}

double wilcoxon_one_sided(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::LengthMismatch, "paired samples differ in length");
  std::vector<double> diffs;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    if (d != 0.0) diffs.push_back(d);
  }
  if (diffs.empty()) throw Error(ErrorCode::DegenerateTest, "all paired differences are zero");
  const std::size_t n = diffs.size();
  if (n < 5) throw Error(ErrorCode::InvalidArgument, "wilcoxon test needs at least 5 non-zero differences");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::abs(diffs[a]) < std::abs(diffs[b]); });

  // Doubled average ranks keep every rank integral.
  std::vector<int> rank2(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(diffs[order[j + 1]]) == std::abs(diffs[order[i]])) ++j;
    const int doubled = static_cast<int>(i + j + 2);  // (i+1) + (j+1)
    for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = doubled;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  int w2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (diffs[i] > 0.0) w2 += rank2[i];
  }

  if (n <= kWilcoxonExactLimit) {
    const int total = std::accumulate(rank2.begin(), rank2.end(), 0);
    std::vector<double> ways(static_cast<std::size_t>(total) + 1, 0.0);
    ways[0] = 1.0;
    int reach = 0;
    for (int r : rank2) {
      for (int s = reach; s >= 0; --s) ways[static_cast<std::size_t>(s + r)] += ways[static_cast<std::size_t>(s)];
      reach += r;
    }
    double tail = 0.0;
    for (int s = w2; s <= total; ++s) tail += ways[static_cast<std::size_t>(s)];
    return std::ldexp(tail, -static_cast<int>(n));
  }

  const double nn = static_cast<double>(n);
  const double mean = nn * (nn + 1.0) / 4.0;
  const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
  const double w = w2 / 2.0;
  const double z = (w - mean - 0.5) / std::sqrt(var);
  return 0.5 * std::erfc(z / std::sqrt(2.0));
}

SignificanceMatrix significance_matrix(std::span<const TeamResult> results, Metric metric) {
  check_alignment(results);
  const std::size_t n = results.size();
  SignificanceMatrix out;
  out.metric = metric;
  const double sign = higher_is_better(metric) ? 1.0 : -1.0;
  std::vector<std::vector<double>> samples(n);
  for (std::size_t t = 0; t < n; ++t) {
    out.teams.push_back(results[t].team);
    for (const CaseMetrics& c : results[t].per_case) samples[t].push_back(sign * metric_value(c, metric));
  }
  out.p.assign(n, std::vector<double>(n, std::numeric_limits<double>::quiet_NaN()));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      try {
        out.p[i][j] = wilcoxon_one_sided(samples[i], samples[j]);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateTest && e.code() != ErrorCode::InvalidArgument) throw;
      }
    }
  }
  return out;
}

}  // namespace fracbench
