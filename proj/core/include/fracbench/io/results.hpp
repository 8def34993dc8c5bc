#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fracbench/ranking.hpp"

namespace fracbench::io {

enum class ResultFormat { Csv, Json };

// From the file extension (.csv or .json). Throws InvalidArgument otherwise.
ResultFormat format_from_path(const std::filesystem::path& path);

// One leaderboard row. CSV columns, in order:
//   team, iou_f, hd95_f, assd_f, iou_a, hd95_a, assd_a,
//   rank_iou_f, rank_hd95_f, rank_assd_f, rank_iou_a, rank_hd95_a, rank_assd_a,
//   mean_rank, final_rank, runtime_s
// JSON holds {"entries": [...]} with the same keys per entry.
struct LeaderboardRecord {
  std::string team;
  MetricArray means{};
  std::array<int, kMetricCount> ranks{};
  double mean_rank = 0.0;
  int final_rank = 0;
  double runtime_s = 0.0;

  friend bool operator==(const LeaderboardRecord&, const LeaderboardRecord&) = default;
};

std::vector<LeaderboardRecord> to_records(const Leaderboard& board);

// Floats carry 6 significant digits in every result file.
std::string leaderboard_csv(const Leaderboard& board);
std::string leaderboard_json(const Leaderboard& board);
// Throw ParseError on malformed input.
std::vector<LeaderboardRecord> parse_leaderboard_csv(std::string_view text);
std::vector<LeaderboardRecord> parse_leaderboard_json(std::string_view text);
std::vector<LeaderboardRecord> read_leaderboard(const std::filesystem::path& path);

// CSV: team, original_rank, rank_1 .. rank_T (fraction of samples).
// JSON additionally holds the tau summary and every sample's tau.
std::string stability_csv(const StabilityReport& report);
std::string stability_json(const StabilityReport& report);
StabilityReport parse_stability_json(std::string_view text);

// CSV: header "team,<team_1>,...,<team_T>", one row per team, empty cells for
// NaN. JSON: {"metric", "teams", "p"} with null for NaN.
std::string significance_csv(const SignificanceMatrix& m);
std::string significance_json(const SignificanceMatrix& m);
SignificanceMatrix parse_significance_csv(std::string_view text, Metric metric);
SignificanceMatrix parse_significance_json(std::string_view text);

void write_results(const Leaderboard& board, const std::filesystem::path& path, ResultFormat format);
void write_results(const StabilityReport& report, const std::filesystem::path& path, ResultFormat format);
void write_results(const SignificanceMatrix& m, const std::filesystem::path& path, ResultFormat format);

// Output of the evaluate step and input of rank/bootstrap/significance.
// Either every team has per-case metrics, or every team has means only.
struct Study {
  std::string kind = "ct";  // "ct" or "xray"
  std::vector<TeamResult> teams;
  std::vector<TeamMeans> means_only;
  int warnings = 0;
};

// Per-case values are written with full precision so downstream ranking sees
// exactly what evaluation produced.
std::string study_json(const Study& study);
// Throws ParseError for malformed documents or mixed per-case/means-only teams.
Study parse_study_json(std::string_view text);
// Per-team means: aggregated from cases, or taken as given.
std::vector<TeamMeans> study_means(const Study& study);

// team, case, six metrics, fp_count, runtime_s (empty when unknown).
std::string cases_csv(const Study& study);

}  // namespace fracbench::io
