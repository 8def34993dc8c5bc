#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "expect_error.hpp"
#include "fracbench/evaluation.hpp"
#include "fracbench/phantom.hpp"
#include "oracles.hpp"

using namespace fracbench;

namespace {

Grid3 unit_grid(int nx, int ny, int nz) { return Grid3{{nx, ny, nz}, {1, 1, 1}, {0, 0, 0}}; }

void fill(LabelVolume& v, Index3 lo, Index3 hi, std::uint8_t id) {
  for (int k = lo[2]; k <= hi[2]; ++k)
    for (int j = lo[1]; j <= hi[1]; ++j)
      for (int i = lo[0]; i <= hi[0]; ++i) v.at(i, j, k) = id;
}

// Three bones, five fragments, all separated by background.
LabelVolume three_bone_volume() {
  LabelVolume v(unit_grid(20, 12, 10), 0);
  fill(v, {1, 1, 1}, {4, 4, 4}, 1);
  fill(v, {1, 6, 1}, {3, 8, 2}, 2);
  fill(v, {7, 1, 1}, {11, 5, 5}, 11);
  fill(v, {7, 7, 1}, {8, 9, 3}, 12);
  fill(v, {14, 2, 2}, {17, 8, 7}, 21);
  return v;
}

}  // namespace

TEST(OverlapMatching, IdentityMatchesEveryFragmentToItself) {
  const LabelVolume v = three_bone_volume();
  const FragmentScores s = evaluate_fragments(v, v);
  ASSERT_EQ(s.fragments.size(), 5u);
  for (const FragmentScore& f : s.fragments) {
    ASSERT_TRUE(f.match.pred.has_value());
    EXPECT_EQ(*f.match.pred, f.match.gt);
    EXPECT_EQ(f.match.iou, 1.0);
  }
  EXPECT_EQ(s.fp_count, 0);
  EXPECT_TRUE(s.unmatched_predictions.empty());
}

TEST(OverlapMatching, SpuriousFragmentIsFalsePositive) {
  const LabelVolume gt = three_bone_volume();
  LabelVolume pred = gt;
  fill(pred, {18, 10, 8}, {19, 11, 9}, 3);
  const FragmentScores s = evaluate_fragments(gt, pred);
  EXPECT_EQ(s.fp_count, 1);
  ASSERT_EQ(s.unmatched_predictions.size(), 1u);
  EXPECT_EQ(s.unmatched_predictions[0], (FragmentLabel{Anatomy::Sacrum, 3}));
  EXPECT_EQ(s.iou, 1.0);
}

TEST(OverlapMatching, LargerGroundTruthClaimsFirst) {
  // gt 1 (8 cells) and gt 2 (4 cells) both overlap pred 1 best; gt 1 wins it.
  LabelVolume gt(unit_grid(8, 2, 1), 0), pred(unit_grid(8, 2, 1), 0);
  fill(gt, {0, 0, 0}, {3, 1, 0}, 1);
  fill(gt, {4, 0, 0}, {5, 1, 0}, 2);
  fill(pred, {2, 0, 0}, {5, 1, 0}, 1);
  fill(pred, {6, 0, 0}, {7, 1, 0}, 2);
  const auto matches = evaluate_fragments(gt, pred).fragments;
  ASSERT_EQ(matches.size(), 2u);
  EXPECT_EQ(matches[0].match.gt.index, 1);
  EXPECT_EQ(matches[0].match.pred->index, 1);
  EXPECT_DOUBLE_EQ(matches[0].match.iou, 4.0 / 12.0);
  // Only pred 2 is left for gt 2 and it does not overlap: missed, not matched.
  EXPECT_EQ(matches[1].match.gt.index, 2);
  EXPECT_FALSE(matches[1].match.pred.has_value());
  EXPECT_TRUE(matches[1].penalized);
}

TEST(OverlapMatching, CrossBoneOverlapIsNeverMatched) {
  LabelVolume gt(unit_grid(4, 4, 4), 0), pred(unit_grid(4, 4, 4), 0);
  fill(gt, {0, 0, 0}, {1, 1, 1}, 1);
  fill(pred, {0, 0, 0}, {1, 1, 1}, 11);
  const FragmentScores s = evaluate_fragments(gt, pred);
  EXPECT_FALSE(s.fragments[0].match.pred.has_value());
  EXPECT_EQ(s.fp_count, 1);
}

TEST(Penalty, MissingTwoVoxelFragment) {
  LabelVolume gt(unit_grid(4, 4, 4), 0);
  fill(gt, {1, 1, 1}, {2, 1, 1}, 1);
  const LabelVolume pred(gt.grid, 0);
  const FragmentScores s = evaluate_fragments(gt, pred);
  EXPECT_EQ(s.iou, 0.0);
  EXPECT_DOUBLE_EQ(s.hd95, std::sqrt(6.0));
  EXPECT_DOUBLE_EQ(s.assd, std::sqrt(6.0) / 2.0);
  EXPECT_EQ(s.fp_count, 0);
}

TEST(Penalty, DeletedFragmentInFullCase) {
  const LabelVolume gt = three_bone_volume();
  LabelVolume pred = gt;
  for (auto& c : pred.voxels)
    if (c == 12) c = 0;
  const FragmentScores s = evaluate_fragments(gt, pred);
  // Fragment 12 spans 2x3x3 cells: diameter sqrt(4 + 9 + 9).
  const double d = std::sqrt(22.0);
  EXPECT_DOUBLE_EQ(s.iou, 4.0 / 5.0);
  EXPECT_DOUBLE_EQ(s.hd95, d / 5.0);
  EXPECT_DOUBLE_EQ(s.assd, d / 2.0 / 5.0);
}

TEST(Penalty, DeletingAnyFragmentIsStrictlyWorse) {
  const LabelVolume gt = three_bone_volume();
  const CaseMetrics perfect = evaluate_case(gt, gt);
  for (const FragmentCount& f : list_fragments(gt)) {
    LabelVolume pred = gt;
    for (auto& c : pred.voxels)
      if (c == encode_label(f.label)) c = 0;
    const CaseMetrics m = evaluate_case(gt, pred);
    EXPECT_LT(m.iou_f, perfect.iou_f);
    EXPECT_GT(m.hd95_f, perfect.hd95_f);
    EXPECT_GT(m.assd_f, perfect.assd_f);
  }
}

TEST(Anatomy, MissingSacrumChargesBonePenalty) {
  const LabelVolume gt = three_bone_volume();
  LabelVolume pred = gt;
  for (auto& c : pred.voxels)
    if (c >= 1 && c <= 10) c = 0;
  const AnatomyScores a = evaluate_anatomy(gt, pred);
  ASSERT_EQ(a.bones.size(), 3u);
  EXPECT_DOUBLE_EQ(a.iou, 2.0 / 3.0);
  // Sacrum cells span x 1..4, y 1..8, z 1..4: box 4x8x4.
  const double diameter = std::sqrt(16.0 + 64.0 + 16.0);
  EXPECT_DOUBLE_EQ(a.hd95, diameter / 3.0);
  EXPECT_DOUBLE_EQ(a.assd, diameter / 2.0 / 3.0);
  EXPECT_TRUE(a.bones[0].penalized);
}

TEST(Anatomy, BoneAbsentFromGroundTruthIsIgnored) {
  LabelVolume gt(unit_grid(6, 6, 6), 0);
  fill(gt, {0, 0, 0}, {2, 2, 2}, 1);
  LabelVolume pred = gt;
  fill(pred, {4, 4, 4}, {5, 5, 5}, 21);
  const AnatomyScores a = evaluate_anatomy(gt, pred);
  EXPECT_EQ(a.bones.size(), 1u);
  EXPECT_EQ(a.iou, 1.0);
}

TEST(Case, IdentityIsPerfect) {
  const LabelVolume v = three_bone_volume();
  const CaseMetrics m = evaluate_case(v, v, 12.5);
  EXPECT_EQ(m.iou_f, 1.0);
  EXPECT_EQ(m.hd95_f, 0.0);
  EXPECT_EQ(m.assd_f, 0.0);
  EXPECT_EQ(m.iou_a, 1.0);
  EXPECT_EQ(m.hd95_a, 0.0);
  EXPECT_EQ(m.assd_a, 0.0);
  EXPECT_EQ(m.fp_count, 0);
  EXPECT_EQ(m.runtime_s, 12.5);
}

TEST(Case, DilatedPredictionDegradesWithoutFalsePositives) {
  const LabelVolume gt = three_bone_volume();
  const LabelVolume pred = perturb(gt, PerturbationSpec{{DilateOp{1}}, 0});
  const CaseMetrics m = evaluate_case(gt, pred);
  EXPECT_LT(m.iou_f, 1.0);
  EXPECT_GT(m.hd95_f, 0.0);
  EXPECT_GT(m.assd_f, 0.0);
  EXPECT_EQ(m.fp_count, 0);
  const CaseMetrics o = oracle::evaluate(gt, pred);
  EXPECT_NEAR(m.iou_f, o.iou_f, 1e-12);
  EXPECT_NEAR(m.hd95_f, o.hd95_f, 1e-9);
  EXPECT_NEAR(m.assd_f, o.assd_f, 1e-9);
  EXPECT_NEAR(m.iou_a, o.iou_a, 1e-12);
  EXPECT_NEAR(m.hd95_a, o.hd95_a, 1e-9);
  EXPECT_NEAR(m.assd_a, o.assd_a, 1e-9);
}

TEST(Case, PermutedIndicesGiveIdenticalMetrics) {
  const LabelVolume gt = three_bone_volume();
  const LabelVolume pred = perturb(gt, PerturbationSpec{{ErodeOp{1}}, 0});
  const CaseMetrics base = evaluate_case(gt, pred);
  for (std::uint64_t seed = 0; seed < 10; ++seed)
    EXPECT_EQ(evaluate_case(gt, permute_fragment_indices(pred, seed)), base);
}

TEST(Case, NoGroundTruthAndKindMismatch) {
  const LabelVolume empty(unit_grid(3, 3, 3), 0);
  EXPECT_FB_ERROR(evaluate_case(empty, empty), NoGroundTruth);
  const CaseData a = three_bone_volume();
  const CaseData b = MultiLabelMask2D(4, 4);
  EXPECT_FB_ERROR(evaluate_case(a, b), KindMismatch);
  const LabelVolume other(unit_grid(3, 3, 4), 0);
  EXPECT_FB_ERROR(evaluate_case(three_bone_volume(), other), GridMismatch);
}

TEST(Case2D, SpuriousBitPlaneIsOneFalsePositive) {
  MultiLabelMask2D gt(16, 16);
  for (int y = 2; y < 8; ++y)
    for (int x = 2; x < 10; ++x) gt.at(x, y) |= label_bit(1);
  for (int y = 5; y < 12; ++y)
    for (int x = 6; x < 14; ++x) gt.at(x, y) |= label_bit(11);
  MultiLabelMask2D pred = gt;
  for (int y = 12; y < 15; ++y)
    for (int x = 1; x < 4; ++x) pred.at(x, y) |= label_bit(22);
  const CaseMetrics m = evaluate_case(gt, pred);
  EXPECT_EQ(m.fp_count, 1);
  EXPECT_EQ(m.iou_f, 1.0);
  const CaseMetrics self = evaluate_case(gt, gt);
  EXPECT_EQ(self.iou_f, 1.0);
  EXPECT_EQ(self.hd95_a, 0.0);
}

TEST(Case2D, MissingFragmentUsesPlanarSphere) {
  MultiLabelMask2D gt(8, 8);
  gt.at(2, 2) = label_bit(1);
  gt.at(3, 2) = label_bit(1);
  const FragmentScores s = evaluate_fragments(gt, MultiLabelMask2D(8, 8));
  EXPECT_DOUBLE_EQ(s.hd95, std::sqrt(5.0));
}

TEST(CaseProperties, MatchesOracleOnRandomVolumes) {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 20; ++t) {
    const LabelVolume gt = oracle::random_label_volume(rng, {14, 12, 10});
    if (list_fragments(gt).empty()) continue;
    LabelVolume pred = oracle::random_label_volume(rng, {14, 12, 10});
    const CaseMetrics m = evaluate_case(gt, pred);
    const CaseMetrics o = oracle::evaluate(gt, pred);
    EXPECT_NEAR(m.iou_f, o.iou_f, 1e-12);
    EXPECT_NEAR(m.hd95_f, o.hd95_f, 1e-9);
    EXPECT_NEAR(m.assd_f, o.assd_f, 1e-9);
    EXPECT_NEAR(m.iou_a, o.iou_a, 1e-12);
    EXPECT_NEAR(m.hd95_a, o.hd95_a, 1e-9);
    EXPECT_NEAR(m.assd_a, o.assd_a, 1e-9);
    EXPECT_EQ(m.fp_count, o.fp_count);
    const FragmentScores fs = evaluate_fragments(gt, pred);
    int matched = 0;
    for (const FragmentScore& f : fs.fragments) matched += f.match.pred.has_value();
    EXPECT_EQ(fs.fp_count, static_cast<int>(list_fragments(pred).size()) - matched);
    EXPECT_EQ(evaluate_case(gt, pred), m);
    EXPECT_GE(m.iou_f, 0.0);
    EXPECT_LE(m.iou_f, 1.0);
  }
}

TEST(CaseProperties, ParallelEvaluationMatchesSerial) {
  std::mt19937_64 rng(7);
  const LabelVolume gt = oracle::random_label_volume(rng, {20, 20, 20});
  const LabelVolume pred = perturb(gt, PerturbationSpec{{DilateOp{1}}, 0});
  EXPECT_EQ(evaluate_case(gt, pred, {}, EvalOptions{1}), evaluate_case(gt, pred, {}, EvalOptions{4}));
}
