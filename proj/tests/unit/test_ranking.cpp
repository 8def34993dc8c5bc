#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "challenge_tables.hpp"
#include "expect_error.hpp"
#include "fracbench/ranking.hpp"
#include "oracles.hpp"

using namespace fracbench;

namespace {

CaseMetrics case_with(double iou, double hd, double assd) {
  CaseMetrics c;
  c.iou_f = c.iou_a = iou;
  c.hd95_f = c.hd95_a = hd;
  c.assd_f = c.assd_a = assd;
  return c;
}

// Teams with per-case quality drawn around a team-specific level; team 0 is
// better than every other team on every case when `dominant` is set.
std::vector<TeamResult> synthetic_study(std::size_t teams, std::size_t cases, std::uint64_t seed, bool dominant) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<TeamResult> out(teams);
  for (std::size_t t = 0; t < teams; ++t) {
    out[t].team = "team" + std::to_string(t);
    out[t].mean_runtime_s = 10.0 + t;
  }
  for (std::size_t c = 0; c < cases; ++c)
    for (std::size_t t = 0; t < teams; ++t) {
      double q = 0.4 + 0.3 * u(rng);
      if (dominant && t == 0) q = 0.95 + 0.04 * u(rng);
      out[t].per_case.push_back(case_with(q, 20.0 * (1.0 - q), 5.0 * (1.0 - q)));
    }
  return out;
}

std::vector<double> as_double(const std::vector<int>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST(Aggregate, MeansPerMetric) {
  TeamResult a{"a", {case_with(0.8, 1, 2), case_with(0.9, 3, 4)}, {}, 5.0};
  TeamResult b{"b", {case_with(0.5, 1, 1), case_with(0.5, 1, 1)}, {}, 1.0};
  const std::vector<TeamResult> rs{a, b};
  const auto means = aggregate_means(rs);
  EXPECT_DOUBLE_EQ(means[0].means[0], 0.85);
  EXPECT_DOUBLE_EQ(means[0].means[1], 2.0);
  EXPECT_EQ(means[1].means[0], 0.5);
  EXPECT_EQ(means[0].runtime_s, 5.0);
}

TEST(Aggregate, MisalignedCasesRejected) {
  std::vector<TeamResult> rs{{"a", {case_with(1, 0, 0)}, {}, 0}, {"b", {case_with(1, 0, 0), case_with(1, 0, 0)}, {}, 0}};
  EXPECT_FB_ERROR(aggregate_means(rs), CaseAlignmentError);
  rs[1].per_case.pop_back();
  rs[0].case_ids = {"c1"};
  rs[1].case_ids = {"c2"};
  EXPECT_FB_ERROR(aggregate_means(rs), CaseAlignmentError);
}

TEST(Rank, PublishedCtOrder) {
  const auto teams = fixtures::ct_leaderboard();
  EXPECT_EQ(rank_teams(teams).order(), fixtures::names_of(teams));
  const auto ranks = final_ranks(teams);
  for (std::size_t i = 0; i < ranks.size(); ++i) EXPECT_EQ(ranks[i], static_cast<int>(i) + 1);
}

TEST(Rank, PublishedXrayOrder) {
  const auto teams = fixtures::xray_leaderboard();
  EXPECT_EQ(rank_teams(teams).order(), fixtures::names_of(teams));
}

TEST(Rank, OrderDoesNotDependOnInputOrder) {
  auto teams = fixtures::ct_leaderboard();
  const auto expected = fixtures::names_of(teams);
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    std::shuffle(teams.begin(), teams.end(), rng);
    EXPECT_EQ(rank_teams(teams).order(), expected);
  }
}

TEST(Rank, DominatingTeamAndTieBreaks) {
  std::vector<TeamMeans> two{{"b", {0.5, 9, 9, 0.5, 9, 9}, 1}, {"a", {0.9, 1, 1, 0.9, 1, 1}, 100}};
  const Leaderboard lb = rank_teams(two);
  EXPECT_EQ(lb.order(), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(lb.find("a").mean_rank, 1.0);
  EXPECT_EQ(lb.find("b").mean_rank, 2.0);

  std::vector<TeamMeans> tied{{"slow", {0.9, 9, 1, 0.5, 9, 1}, 50}, {"fast", {0.5, 1, 9, 0.9, 1, 9}, 10}};
  const Leaderboard by_runtime = rank_teams(tied);
  EXPECT_EQ(by_runtime.order(), (std::vector<std::string>{"fast", "slow"}));
  EXPECT_TRUE(by_runtime.entries[0].runtime_tie_break);

  tied[0].runtime_s = tied[1].runtime_s;
  const Leaderboard by_name = rank_teams(tied);
  EXPECT_EQ(by_name.order(), (std::vector<std::string>{"fast", "slow"}));
  EXPECT_TRUE(by_name.entries[0].name_tie_break);
}

TEST(Rank, TiedMetricSharesMinimumRank) {
  std::vector<TeamMeans> t{{"a", {0.9, 1, 1, 0.9, 1, 1}, 1}, {"b", {0.9, 2, 2, 0.8, 2, 2}, 1}, {"c", {0.5, 3, 3, 0.7, 3, 3}, 1}};
  const Leaderboard lb = rank_teams(t);
  EXPECT_EQ(lb.find("a").ranks[0], 1);
  EXPECT_EQ(lb.find("b").ranks[0], 1);
  EXPECT_EQ(lb.find("c").ranks[0], 3);
}

TEST(Rank, InsufficientTeams) {
  std::vector<TeamMeans> one{{"a", {}, 0}};
  EXPECT_FB_ERROR(rank_teams(one), InsufficientTeams);
}

TEST(RankProperties, MatchesOracleAndIsMonotoneInvariant) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<TeamMeans> teams(2 + rng() % 8);
    for (std::size_t i = 0; i < teams.size(); ++i) {
      teams[i].team = "t" + std::to_string(i);
      // Coarse values so that ties actually occur.
      for (double& m : teams[i].means) m = std::round(u(rng) * 4) / 4;
      teams[i].runtime_s = std::round(u(rng) * 3);
    }
    const auto ranks = final_ranks(teams);
    EXPECT_EQ(ranks, oracle::final_ranks(teams));
    auto transformed = teams;
    for (TeamMeans& tm : transformed)
      for (double& m : tm.means) m = std::exp(3.0 * m) + 7.0;
    EXPECT_EQ(final_ranks(transformed), ranks);
    auto one_column = teams;
    const int column = static_cast<int>(rng() % kMetricCount);
    for (TeamMeans& tm : one_column) tm.means[column] = 2.0 * tm.means[column] * tm.means[column] * tm.means[column] + 1.0;
    EXPECT_EQ(final_ranks(one_column), ranks);
  }
}

TEST(Kendall, Examples) {
  const std::vector<int> id{1, 2, 3, 4};
  const std::vector<int> rev{4, 3, 2, 1};
  const std::vector<int> swap{2, 1, 3, 4};
  EXPECT_EQ(kendall_tau(id, id), 1.0);
  EXPECT_EQ(kendall_tau(id, rev), -1.0);
  EXPECT_NEAR(kendall_tau(id, swap), 1.0 - 2.0 / 6.0, 1e-15);
  const std::vector<int> shorter{1, 2, 3};
  EXPECT_FB_ERROR(kendall_tau(id, shorter), LengthMismatch);
}

TEST(Kendall, MatchesPairCountingOnPermutations) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 200; ++t) {
    const int n = 2 + static_cast<int>(rng() % 9);
    std::vector<int> a(n), b(n);
    std::iota(a.begin(), a.end(), 1);
    std::iota(b.begin(), b.end(), 1);
    std::shuffle(a.begin(), a.end(), rng);
    std::shuffle(b.begin(), b.end(), rng);
    const double tau = kendall_tau(a, b);
    EXPECT_EQ(tau, oracle::kendall_pairs(as_double(a), as_double(b)));
    EXPECT_EQ(tau, kendall_tau(b, a));
    EXPECT_LE(std::abs(tau), 1.0);
    std::vector<int> reversed(a);
    for (int& r : reversed) r = n + 1 - r;
    EXPECT_EQ(kendall_tau(a, a), 1.0);
    EXPECT_EQ(kendall_tau(a, reversed), -1.0);
  }
}

TEST(Kendall, TiesUseTauB) {
  std::mt19937_64 rng(81);
  for (int t = 0; t < 100; ++t) {
    const int n = 3 + static_cast<int>(rng() % 8);
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = static_cast<double>(rng() % 3);
      b[i] = static_cast<double>(rng() % 3);
    }
    if (std::adjacent_find(a.begin(), a.end(), std::not_equal_to<>()) == a.end() ||
        std::adjacent_find(b.begin(), b.end(), std::not_equal_to<>()) == b.end())
      continue;
    EXPECT_NEAR(kendall_tau(a, b), oracle::kendall_pairs(a, b), 1e-15);
  }
}

TEST(Bootstrap, DominantTeamAlwaysFirst) {
  const auto study = synthetic_study(4, 20, 3, true);
  const StabilityReport r = bootstrap_stability(study, 1000, 42);
  EXPECT_EQ(r.rank_frequency[0][0], 1.0);
  EXPECT_EQ(r.taus.size(), 1000u);
  EXPECT_LE(r.tau_ci_low, r.tau_mean);
  EXPECT_LE(r.tau_mean, r.tau_ci_high);
}

TEST(Bootstrap, SingleCaseIsFullyStable) {
  const auto study = synthetic_study(3, 1, 5, false);
  const StabilityReport r = bootstrap_stability(study, 50, 1);
  EXPECT_EQ(r.tau_mean, 1.0);
  EXPECT_EQ(r.tau_ci_low, 1.0);
  EXPECT_EQ(r.tau_ci_high, 1.0);
}

TEST(Bootstrap, MatchesIndependentImplementation) {
  auto study = synthetic_study(3, 15, 9, false);
  // Near-tie between teams 1 and 2.
  for (std::size_t c = 0; c < study[1].per_case.size(); ++c) {
    study[2].per_case[c] = study[1].per_case[c];
    study[2].per_case[c].iou_f += (c % 2 ? 1e-3 : -1e-3);
  }
  const StabilityReport r = bootstrap_stability(study, 300, 77);
  const oracle::BootstrapSummary o = oracle::bootstrap(study, 300, 77);
  EXPECT_EQ(r.taus, o.taus);
  EXPECT_EQ(r.rank_frequency, o.rank_frequency);
}

TEST(Bootstrap, DeterministicAcrossRunsAndJobs) {
  const auto study = synthetic_study(5, 12, 4, false);
  const StabilityReport a = bootstrap_stability(study, 200, 5, 1);
  const StabilityReport b = bootstrap_stability(study, 200, 5, 4);
  EXPECT_EQ(a.taus, b.taus);
  EXPECT_EQ(a.rank_frequency, b.rank_frequency);
  EXPECT_EQ(a.tau_mean, b.tau_mean);
  EXPECT_NE(a.taus, bootstrap_stability(study, 200, 6, 1).taus);
}

TEST(Bootstrap, CaseIndexIsInRangeAndUnbiasedAtTheEnds) {
  EXPECT_EQ(bootstrap_case_index(0, 7), 0u);
  EXPECT_EQ(bootstrap_case_index(~std::uint64_t{0}, 7), 6u);
  EXPECT_EQ(bootstrap_case_index(std::uint64_t{1} << 63, 2), 1u);
}

TEST(Wilcoxon, Examples) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  const std::vector<double> y{0, 0, 0, 0, 0};
  EXPECT_NEAR(wilcoxon_one_sided(x, y), 0.03125, 1e-15);
  EXPECT_NEAR(wilcoxon_one_sided(y, x), 1.0, 1e-15);
  EXPECT_FB_ERROR(wilcoxon_one_sided(x, x), DegenerateTest);
  const std::vector<double> few{1, 0, 0, 0, 0};
  EXPECT_FB_ERROR(wilcoxon_one_sided(few, y), InvalidArgument);
  const std::vector<double> shorter{0, 0, 0};
  EXPECT_FB_ERROR(wilcoxon_one_sided(x, shorter), LengthMismatch);
}

TEST(Wilcoxon, MatchesEnumerationUpToTwelve) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g(0.2, 1.0);
  for (int t = 0; t < 200; ++t) {
    const int n = 5 + static_cast<int>(rng() % 8);
    std::vector<double> x(n), y(n, 0.0);
    for (double& v : x) v = t % 3 == 0 ? std::round(g(rng) * 2) / 2 : g(rng);
    int nonzero = 0;
    for (double v : x) nonzero += v != 0.0;
    if (nonzero < 5) continue;
    EXPECT_NEAR(wilcoxon_one_sided(x, y), oracle::wilcoxon_enumerated(x, y), 1e-12);
  }
}

TEST(Wilcoxon, MorePositiveDifferencesLowerP) {
  for (std::size_t n : {6u, 12u, 30u}) {
    std::vector<double> x(n), y(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) x[i] = -static_cast<double>(i + 1);
    double previous = wilcoxon_one_sided(x, y);
    EXPECT_GT(previous, 0.0);
    EXPECT_LE(previous, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = -x[i];
      const double p = wilcoxon_one_sided(x, y);
      EXPECT_LT(p, previous) << "n=" << n << " flipped " << i + 1;
      EXPECT_GT(p, 0.0);
      previous = p;
    }
  }
}

TEST(Wilcoxon, ComplementaryDirections) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int n : {6, 20, 40}) {
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = g(rng);
      y[i] = g(rng);
    }
    const double pxy = wilcoxon_one_sided(x, y), pyx = wilcoxon_one_sided(y, x);
    EXPECT_GE(pxy + pyx, 1.0 - 1e-12);
    EXPECT_GE(pxy, 0.0);
    EXPECT_LE(pxy, 1.0);
  }
}

TEST(Significance, DominantTeamAndDiagonal) {
  auto study = synthetic_study(3, 30, 12, true);
  const SignificanceMatrix m = significance_matrix(study, Metric::IouF);
  EXPECT_TRUE(std::isnan(m.p[0][0]));
  EXPECT_LT(m.p[0][1], 0.05);
  EXPECT_LT(m.p[0][2], 0.05);
  EXPECT_GT(m.p[1][0], 0.95);
  // Lower-is-better metric: the dominant team has smaller distances.
  const SignificanceMatrix h = significance_matrix(study, Metric::Hd95F);
  EXPECT_LT(h.p[0][1], 0.05);
}

TEST(Significance, IdenticalTeamsAreDegenerate) {
  auto study = synthetic_study(2, 10, 2, false);
  study[1].per_case = study[0].per_case;
  const SignificanceMatrix m = significance_matrix(study);
  EXPECT_TRUE(std::isnan(m.p[0][1]));
  EXPECT_TRUE(std::isnan(m.p[1][0]));
}
