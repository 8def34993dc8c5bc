#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "fracbench/labels.hpp"
#include "fracbench/metrics.hpp"

namespace fracbench {

struct FragmentMatch {
  FragmentLabel gt;
  std::optional<FragmentLabel> pred;  // empty when no overlapping candidate remained
  double iou = 0.0;
};

struct LabeledMask {
  FragmentLabel label;
  BinaryMask mask;
};

// Cell counts and pairwise intersections of every label present in a ground
// truth / prediction pair. Indexed by encoded label id (0 unused).
struct OverlapTable {
  std::array<std::size_t, kMaxLabelId + 1> gt_cells{};
  std::array<std::size_t, kMaxLabelId + 1> pred_cells{};
  std::array<std::array<std::size_t, kMaxLabelId + 1>, kMaxLabelId + 1> intersection{};

  double iou(int gt_id, int pred_id) const;
};

// Greedy one-to-one matching within each bone: ground-truth fragments are
// visited largest first (ties by id) and each claims the unclaimed prediction
// of the same bone with the highest IoU (ties by id). Zero-overlap candidates
// are never claimed. One entry per ground-truth fragment, in visiting order.
std::vector<FragmentMatch> match_fragments(const OverlapTable& overlaps);
std::vector<FragmentMatch> match_fragments(std::span<const LabeledMask> gt, std::span<const LabeledMask> pred);

struct FragmentScore {
  FragmentMatch match;
  double hd95 = 0.0;
  double assd = 0.0;
  bool penalized = false;
};

struct FragmentScores {
  double iou = 0.0;
  double hd95 = 0.0;
  double assd = 0.0;
  int fp_count = 0;
  std::vector<FragmentScore> fragments;
  std::vector<FragmentLabel> unmatched_predictions;
};

struct AnatomyScore {
  Anatomy anatomy = Anatomy::Sacrum;
  double iou = 0.0;
  double hd95 = 0.0;
  double assd = 0.0;
  bool penalized = false;
};

struct AnatomyScores {
  double iou = 0.0;
  double hd95 = 0.0;
  double assd = 0.0;
  std::vector<AnatomyScore> bones;  // bones present in the ground truth
};

struct CaseMetrics {
  double iou_f = 0.0;
  double hd95_f = 0.0;
  double assd_f = 0.0;
  double iou_a = 0.0;
  double hd95_a = 0.0;
  double assd_a = 0.0;
  int fp_count = 0;
  std::optional<double> runtime_s;

  friend bool operator==(const CaseMetrics&, const CaseMetrics&) = default;
};

struct EvalOptions {
  unsigned jobs = 1;  // workers for per-pair surface distances; 0 = all cores
};

// Per ground-truth fragment: matched pairs are scored with IoU/HD95/ASSD,
// missed fragments get IoU 0, HD95 = bounding-sphere diameter, ASSD = radius.
// Case values are unweighted means over ground-truth fragments.
// Throws NoGroundTruth when the ground truth holds no fragment.
FragmentScores evaluate_fragments(const LabelVolume& gt, const LabelVolume& pred, const EvalOptions& opts = {});
FragmentScores evaluate_fragments(const MultiLabelMask2D& gt, const MultiLabelMask2D& pred,
                                  const EvalOptions& opts = {});

// Bone-level metrics on merged fragment labels, averaged over the bones
// present in the ground truth. A bone missing from the prediction is charged
// the bounding-sphere penalty of the ground-truth bone.
AnatomyScores evaluate_anatomy(const LabelVolume& gt, const LabelVolume& pred, const EvalOptions& opts = {});
AnatomyScores evaluate_anatomy(const MultiLabelMask2D& gt, const MultiLabelMask2D& pred,
                               const EvalOptions& opts = {});

CaseMetrics evaluate_case(const LabelVolume& gt, const LabelVolume& pred, std::optional<double> runtime_s = {},
                          const EvalOptions& opts = {});
CaseMetrics evaluate_case(const MultiLabelMask2D& gt, const MultiLabelMask2D& pred,
                          std::optional<double> runtime_s = {}, const EvalOptions& opts = {});

using CaseData = std::variant<LabelVolume, MultiLabelMask2D>;

// Dispatches on the data kind. Throws KindMismatch when gt and pred differ.
CaseMetrics evaluate_case(const CaseData& gt, const CaseData& pred, std::optional<double> runtime_s = {},
                          const EvalOptions& opts = {});

}  // namespace fracbench
