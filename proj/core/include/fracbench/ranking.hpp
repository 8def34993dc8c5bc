#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fracbench/evaluation.hpp"

namespace fracbench {

enum class Metric { IouF = 0, Hd95F, AssdF, IouA, Hd95A, AssdA };

inline constexpr int kMetricCount = 6;
inline constexpr Metric kMetrics[kMetricCount] = {Metric::IouF, Metric::Hd95F, Metric::AssdF,
                                                  Metric::IouA, Metric::Hd95A, Metric::AssdA};

constexpr bool higher_is_better(Metric m) { return m == Metric::IouF || m == Metric::IouA; }
// Column names used in every serialized form: iou_f, hd95_f, ...
std::string_view metric_name(Metric m);
Metric metric_from_name(std::string_view name);  // throws InvalidArgument
double metric_value(const CaseMetrics& c, Metric m);

using MetricArray = std::array<double, kMetricCount>;

struct TeamResult {
  std::string team;
  std::vector<CaseMetrics> per_case;
  std::vector<std::string> case_ids;  // optional; when given, must agree across teams
  double mean_runtime_s = 0.0;
};

struct TeamMeans {
  std::string team;
  MetricArray means{};
  double runtime_s = 0.0;
};

// Arithmetic mean of every metric per team. Throws CaseAlignmentError when
// teams disagree on case count or case ids, InvalidArgument on zero cases.
std::vector<TeamMeans> aggregate_means(std::span<const TeamResult> results);

struct LeaderboardEntry {
  std::string team;
  MetricArray means{};
  std::array<int, kMetricCount> ranks{};
  double mean_rank = 0.0;
  int final_rank = 0;
  double runtime_s = 0.0;
  bool runtime_tie_break = false;  // mean rank tied, resolved by runtime
  bool name_tie_break = false;     // mean rank and runtime tied, resolved by name
};

// Entries are ordered by final rank.
struct Leaderboard {
  std::vector<LeaderboardEntry> entries;

  const LeaderboardEntry& find(std::string_view team) const;
  std::vector<std::string> order() const;
};

// Per-metric ranks (1 = best, tied means share the minimum rank), mean rank
// across the six metrics, final order by ascending mean rank with runtime and
// then team name as tie-breakers. Throws InsufficientTeams for fewer than two.
Leaderboard rank_teams(std::span<const TeamMeans> means);

// Final rank per team, aligned with the input order.
std::vector<int> final_ranks(std::span<const TeamMeans> means);

// Kendall tau-b. Equals (concordant - discordant) / (T(T-1)/2) without ties.
// Throws LengthMismatch for different lengths, InvalidArgument for fewer than
// two entries or when either input is constant.
double kendall_tau(std::span<const double> a, std::span<const double> b);
double kendall_tau(std::span<const int> a, std::span<const int> b);

struct StabilityReport {
  std::vector<std::string> teams;       // input order
  std::vector<int> original_ranks;      // final rank per team on the full case set
  std::vector<double> taus;             // one per bootstrap sample
  double tau_mean = 0.0;
  double tau_ci_low = 0.0;
  double tau_ci_high = 0.0;
  // rank_frequency[team][rank - 1] = fraction of samples in which team got rank
  std::vector<std::vector<double>> rank_frequency;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
};

// Draws n_samples bootstrap replicates of the case set, recomputes means and
// final ranks on each and compares them with the original ranking via Kendall
// tau. Sample s uses its own generator seeded with bootstrap_stream_seed(seed, s)
// and draws case indices with bootstrap_case_index, so results do not depend
// on `jobs`.
StabilityReport bootstrap_stability(std::span<const TeamResult> results, std::size_t n_samples = 1000,
                                    std::uint64_t seed = 0, unsigned jobs = 1);

// SplitMix64 finalizer of seed + (sample + 1) * golden-ratio increment.
std::uint64_t bootstrap_stream_seed(std::uint64_t seed, std::uint64_t sample);
// Maps one 64-bit draw of std::mt19937_64 onto [0, n): floor(draw * n / 2^64).
std::size_t bootstrap_case_index(std::uint64_t draw, std::size_t n);

// One-sided Wilcoxon signed-rank test of H1: median(x - y) > 0. Zero
// differences are dropped, tied magnitudes get average ranks. Exact null
// distribution up to 25 non-zero pairs, normal approximation with continuity
// correction above. Throws LengthMismatch, DegenerateTest when every
// difference is zero, InvalidArgument when fewer than 5 non-zero pairs remain.
double wilcoxon_one_sided(std::span<const double> x, std::span<const double> y);

inline constexpr std::size_t kWilcoxonExactLimit = 25;

struct SignificanceMatrix {
  std::vector<std::string> teams;
  Metric metric = Metric::IouF;
  // p[i][j]: p-value that team i is better than team j. NaN on the diagonal
  // and where the test is degenerate.
  std::vector<std::vector<double>> p;
};

// For lower-is-better metrics the samples are negated so that entry (i, j)
// always tests "i better than j".
SignificanceMatrix significance_matrix(std::span<const TeamResult> results, Metric metric = Metric::IouF);

}  // namespace fracbench
