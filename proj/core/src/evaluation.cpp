#include "fracbench/evaluation.hpp"

#include <algorithm>
#include <bit>
#include <numeric>

#include "fracbench/error.hpp"
#include "fracbench/parallel.hpp"

namespace fracbench {

double OverlapTable::iou(int gt_id, int pred_id) const {
  const std::size_t inter = intersection[gt_id][pred_id];
  const std::size_t uni = gt_cells[gt_id] + pred_cells[pred_id] - inter;
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<FragmentMatch> match_fragments(const OverlapTable& overlaps) {
  std::vector<int> gt_ids;
  for (int id = 1; id <= kMaxLabelId; ++id) {
    if (overlaps.gt_cells[id] > 0) gt_ids.push_back(id);
  }
  std::stable_sort(gt_ids.begin(), gt_ids.end(),
                   [&](int a, int b) { return overlaps.gt_cells[a] > overlaps.gt_cells[b]; });

  std::array<bool, kMaxLabelId + 1> claimed{};
  std::vector<FragmentMatch> out;
  out.reserve(gt_ids.size());
  for (int g : gt_ids) {
    const FragmentLabel gt_label = decode_label(g);
    const int first = kFragmentsPerBone * code(gt_label.anatomy) + 1;
    int best = 0;
    double best_iou = 0.0;
    for (int p = first; p < first + kFragmentsPerBone; ++p) {
      if (claimed[p] || overlaps.pred_cells[p] == 0 || overlaps.intersection[g][p] == 0) continue;
      const double value = overlaps.iou(g, p);
      if (value > best_iou) {
        best = p;
        best_iou = value;
      }
    }
    FragmentMatch match{gt_label, std::nullopt, 0.0};
    if (best != 0) {
      claimed[best] = true;
      match.pred = decode_label(best);
      match.iou = best_iou;
    }
    out.push_back(match);
  }
  return out;
}

std::vector<FragmentMatch> match_fragments(std::span<const LabeledMask> gt, std::span<const LabeledMask> pred) {
  OverlapTable table;
  const BinaryMask* reference = !gt.empty() ? &gt.front().mask : (!pred.empty() ? &pred.front().mask : nullptr);
  auto check = [&](const LabeledMask& m) {
    if (!(m.mask.grid == reference->grid) || m.mask.planar != reference->planar ||
        m.mask.cells.size() != reference->cells.size())
      throw Error(ErrorCode::GridMismatch, "fragment masks live on different grids");
  };
  for (const auto& m : gt) {
    check(m);
    const int id = encode_label(m.label);
    if (table.gt_cells[id] != 0) throw Error(ErrorCode::InvalidArgument, "duplicate ground-truth label");
    table.gt_cells[id] = m.mask.count();
  }
  for (const auto& m : pred) {
    check(m);
    const int id = encode_label(m.label);
    if (table.pred_cells[id] != 0) throw Error(ErrorCode::InvalidArgument, "duplicate predicted label");
    table.pred_cells[id] = m.mask.count();
  }
  for (const auto& g : gt) {
    for (const auto& p : pred) {
      std::size_t inter = 0;
      for (std::size_t i = 0; i < g.mask.cells.size(); ++i) inter += (g.mask.cells[i] && p.mask.cells[i]) ? 1 : 0;
      table.intersection[encode_label(g.label)][encode_label(p.label)] = inter;
    }
  }
  return match_fragments(table);
}

namespace {

constexpr std::uint32_t anatomy_set(std::uint32_t bits) {
  return ((bits & anatomy_bits(Anatomy::Sacrum)) ? 1u : 0u) | ((bits & anatomy_bits(Anatomy::LeftHip)) ? 2u : 0u) |
         ((bits & anatomy_bits(Anatomy::RightHip)) ? 4u : 0u);
}

struct Box {
  Index3 lo{INT32_MAX, INT32_MAX, INT32_MAX};
  Index3 hi{-1, -1, -1};

  void add(int i, int j, int k) {
    lo = {std::min(lo[0], i), std::min(lo[1], j), std::min(lo[2], k)};
    hi = {std::max(hi[0], i), std::max(hi[1], j), std::max(hi[2], k)};
  }
};

// Everything evaluation needs from one ground-truth / prediction pair,
// gathered in a single raster sweep. Surface point order equals that of
// extract_surface on the corresponding binary mask.
struct CaseGeometry {
  Grid3 grid;
  bool planar = false;
  OverlapTable fragments;
  std::array<Box, kMaxLabelId + 1> gt_boxes;
  std::array<SurfacePointSet, kMaxLabelId + 1> gt_surfaces;
  std::array<SurfacePointSet, kMaxLabelId + 1> pred_surfaces;

  std::array<std::size_t, kAnatomyCount> gt_bone_cells{};
  std::array<std::size_t, kAnatomyCount> pred_bone_cells{};
  std::array<std::size_t, kAnatomyCount> bone_intersection{};
  std::array<Box, kAnatomyCount> gt_bone_boxes;
  std::array<SurfacePointSet, kAnatomyCount> gt_bone_surfaces;
  std::array<SurfacePointSet, kAnatomyCount> pred_bone_surfaces;
};

template <typename BitsFn>
void emit_boundary(const Grid3& grid, bool planar, BitsFn bits, int i, int j, int k, std::size_t idx,
                   std::uint32_t own, std::array<SurfacePointSet, kMaxLabelId + 1>& label_surfaces,
                   std::array<SurfacePointSet, kAnatomyCount>& bone_surfaces) {
  const int nx = grid.dims[0], ny = grid.dims[1], nz = grid.dims[2];
  const std::size_t sy = static_cast<std::size_t>(nx);
  const std::size_t sz = sy * static_cast<std::size_t>(ny);
  std::uint32_t interior = own;
  std::uint32_t bone_interior = anatomy_set(own);
  auto meet = [&](bool in_grid, std::size_t n) {
    const std::uint32_t nb = in_grid ? bits(n) : 0u;
    interior &= nb;
    bone_interior &= anatomy_set(nb);
  };
  meet(i > 0, idx - 1);
  meet(i < nx - 1, idx + 1);
  meet(j > 0, idx - sy);
  meet(j < ny - 1, idx + sy);
  if (!planar) {
    meet(k > 0, idx - sz);
    meet(k < nz - 1, idx + sz);
  }
  const std::uint32_t boundary = own & ~interior;
  const std::uint32_t bone_boundary = anatomy_set(own) & ~bone_interior;
  if ((boundary | bone_boundary) == 0) return;
  const Vec3 c = grid.center(i, j, k);
  for (std::uint32_t b = boundary; b != 0; b &= b - 1) label_surfaces[std::countr_zero(b) + 1].points.push_back(c);
  for (std::uint32_t b = bone_boundary; b != 0; b &= b - 1) bone_surfaces[std::countr_zero(b)].points.push_back(c);
}

template <typename GtBits, typename PredBits>
CaseGeometry analyze(const Grid3& grid, bool planar, GtBits gt_bits, PredBits pred_bits) {
  CaseGeometry geo;
  geo.grid = grid;
  geo.planar = planar;
  const int nx = grid.dims[0], ny = grid.dims[1], nz = grid.dims[2];
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      std::size_t idx = grid.index(0, j, k);
      for (int i = 0; i < nx; ++i, ++idx) {
        const std::uint32_t g = gt_bits(idx);
        const std::uint32_t p = pred_bits(idx);
        if ((g | p) == 0) continue;

        for (std::uint32_t b = g; b != 0; b &= b - 1) {
          const int id = std::countr_zero(b) + 1;
          ++geo.fragments.gt_cells[id];
          geo.gt_boxes[id].add(i, j, k);
          for (std::uint32_t q = p; q != 0; q &= q - 1) ++geo.fragments.intersection[id][std::countr_zero(q) + 1];
        }
        for (std::uint32_t q = p; q != 0; q &= q - 1) ++geo.fragments.pred_cells[std::countr_zero(q) + 1];

        const std::uint32_t ga = anatomy_set(g);
        const std::uint32_t pa = anatomy_set(p);
        for (int a = 0; a < kAnatomyCount; ++a) {
          const std::uint32_t bit = 1u << a;
          if (ga & bit) {
            ++geo.gt_bone_cells[a];
            geo.gt_bone_boxes[a].add(i, j, k);
          }
          if (pa & bit) ++geo.pred_bone_cells[a];
          if (ga & pa & bit) ++geo.bone_intersection[a];
        }

        if (g != 0) emit_boundary(grid, planar, gt_bits, i, j, k, idx, g, geo.gt_surfaces, geo.gt_bone_surfaces);
        if (p != 0)
          emit_boundary(grid, planar, pred_bits, i, j, k, idx, p, geo.pred_surfaces, geo.pred_bone_surfaces);
      }
    }
  }
  return geo;
}

CaseGeometry analyze(const LabelVolume& gt, const LabelVolume& pred) {
  if (!(gt.grid == pred.grid) || gt.voxels.size() != gt.grid.size() || pred.voxels.size() != pred.grid.size())
    throw Error(ErrorCode::GridMismatch, "ground truth and prediction volumes differ in grid");
  validate_labels(gt);
  validate_labels(pred);
  auto bits_of = [](const LabelVolume& v) {
    return [data = v.voxels.data()](std::size_t idx) -> std::uint32_t {
      const std::uint8_t id = data[idx];
      return id == 0 ? 0u : label_bit(id);
    };
  };
  return analyze(gt.grid, false, bits_of(gt), bits_of(pred));
}

CaseGeometry analyze(const MultiLabelMask2D& gt, const MultiLabelMask2D& pred) {
  if (gt.width != pred.width || gt.height != pred.height)
    throw Error(ErrorCode::GridMismatch, "ground truth and prediction masks differ in size");
  validate_labels(gt);
  validate_labels(pred);
  auto bits_of = [](const MultiLabelMask2D& m) {
    return [data = m.pixels.data()](std::size_t idx) { return data[idx]; };
  };
  return analyze(gt.grid(), true, bits_of(gt), bits_of(pred));
}

FragmentScores score_fragments(const CaseGeometry& geo, const EvalOptions& opts) {
  std::vector<FragmentMatch> matches = match_fragments(geo.fragments);
  if (matches.empty()) throw Error(ErrorCode::NoGroundTruth, "ground truth holds no fragment");

  FragmentScores out;
  out.fragments.resize(matches.size());
  parallel_for(matches.size(), opts.jobs, [&](std::size_t i) {
    FragmentScore& score = out.fragments[i];
    score.match = matches[i];
    const int g = encode_label(matches[i].gt);
    if (matches[i].pred) {
      const SurfaceDistances d = surface_distances(geo.pred_surfaces[encode_label(*matches[i].pred)], geo.gt_surfaces[g]);
      score.hd95 = d.hd95;
      score.assd = d.assd;
    } else {
      const BoundingSphere sphere = bounding_sphere(geo.grid, geo.planar, geo.gt_boxes[g].lo, geo.gt_boxes[g].hi);
      score.hd95 = 2.0 * sphere.radius;
      score.assd = sphere.radius;
      score.penalized = true;
    }
  });

  std::array<bool, kMaxLabelId + 1> claimed{};
  double iou_sum = 0.0, hd_sum = 0.0, assd_sum = 0.0;
  for (const FragmentScore& s : out.fragments) {
    iou_sum += s.match.iou;
    hd_sum += s.hd95;
    assd_sum += s.assd;
    if (s.match.pred) claimed[encode_label(*s.match.pred)] = true;
  }
  const double n = static_cast<double>(out.fragments.size());
  out.iou = iou_sum / n;
  out.hd95 = hd_sum / n;
  out.assd = assd_sum / n;
  for (int id = 1; id <= kMaxLabelId; ++id) {
    if (geo.fragments.pred_cells[id] > 0 && !claimed[id]) out.unmatched_predictions.push_back(decode_label(id));
  }
  out.fp_count = static_cast<int>(out.unmatched_predictions.size());
  return out;
}

AnatomyScores score_anatomy(const CaseGeometry& geo, const EvalOptions& opts) {
  std::vector<int> present;
  for (int a = 0; a < kAnatomyCount; ++a) {
    if (geo.gt_bone_cells[a] > 0) present.push_back(a);
  }
  if (present.empty()) throw Error(ErrorCode::NoGroundTruth, "ground truth holds no bone");

  AnatomyScores out;
  out.bones.resize(present.size());
  parallel_for(present.size(), opts.jobs, [&](std::size_t i) {
    const int a = present[i];
    AnatomyScore& s = out.bones[i];
    s.anatomy = static_cast<Anatomy>(a);
    if (geo.pred_bone_cells[a] == 0) {
      const BoundingSphere sphere = bounding_sphere(geo.grid, geo.planar, geo.gt_bone_boxes[a].lo, geo.gt_bone_boxes[a].hi);
      s.iou = 0.0;
      s.hd95 = 2.0 * sphere.radius;
      s.assd = sphere.radius;
      s.penalized = true;
      return;
    }
    const std::size_t inter = geo.bone_intersection[a];
    s.iou = static_cast<double>(inter) / static_cast<double>(geo.gt_bone_cells[a] + geo.pred_bone_cells[a] - inter);
    const SurfaceDistances d = surface_distances(geo.pred_bone_surfaces[a], geo.gt_bone_surfaces[a]);
    s.hd95 = d.hd95;
    s.assd = d.assd;
  });

  double iou_sum = 0.0, hd_sum = 0.0, assd_sum = 0.0;
  for (const AnatomyScore& s : out.bones) {
    iou_sum += s.iou;
    hd_sum += s.hd95;
    assd_sum += s.assd;
  }
  const double n = static_cast<double>(out.bones.size());
  out.iou = iou_sum / n;
  out.hd95 = hd_sum / n;
  out.assd = assd_sum / n;
  return out;
}

CaseMetrics combine(const FragmentScores& f, const AnatomyScores& a, std::optional<double> runtime_s) {
  CaseMetrics m;
  m.iou_f = f.iou;
  m.hd95_f = f.hd95;
  m.assd_f = f.assd;
  m.iou_a = a.iou;
  m.hd95_a = a.hd95;
  m.assd_a = a.assd;
  m.fp_count = f.fp_count;
  m.runtime_s = runtime_s;
  return m;
}

}  // namespace

FragmentScores evaluate_fragments(const LabelVolume& gt, const LabelVolume& pred, const EvalOptions& opts) {
  return score_fragments(analyze(gt, pred), opts);
}

FragmentScores evaluate_fragments(const MultiLabelMask2D& gt, const MultiLabelMask2D& pred, const EvalOptions& opts) {
  return score_fragments(analyze(gt, pred), opts);
}

AnatomyScores evaluate_anatomy(const LabelVolume& gt, const LabelVolume& pred, const EvalOptions& opts) {
  return score_anatomy(analyze(gt, pred), opts);
}

AnatomyScores evaluate_anatomy(const MultiLabelMask2D& gt, const MultiLabelMask2D& pred, const EvalOptions& opts) {
  return score_anatomy(analyze(gt, pred), opts);
}

CaseMetrics evaluate_case(const LabelVolume& gt, const LabelVolume& pred, std::optional<double> runtime_s,
                          const EvalOptions& opts) {
  const CaseGeometry geo = analyze(gt, pred);
  return combine(score_fragments(geo, opts), score_anatomy(geo, opts), runtime_s);
}

CaseMetrics evaluate_case(const MultiLabelMask2D& gt, const MultiLabelMask2D& pred, std::optional<double> runtime_s,
                          const EvalOptions& opts) {
  const CaseGeometry geo = analyze(gt, pred);
  return combine(score_fragments(geo, opts), score_anatomy(geo, opts), runtime_s);
}

CaseMetrics evaluate_case(const CaseData& gt, const CaseData& pred, std::optional<double> runtime_s,
                          const EvalOptions& opts) {
  if (gt.index() != pred.index())
    throw Error(ErrorCode::KindMismatch, "ground truth and prediction are different data kinds");
  return std::visit(
      [&](const auto& g) {
        using T = std::decay_t<decltype(g)>;
        return evaluate_case(g, std::get<T>(pred), runtime_s, opts);
      },
      gt);
}

}  // namespace fracbench
