#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "fracbench/grid.hpp"
#include "fracbench/labels.hpp"

namespace fracbench {

struct Ellipsoid {
  Vec3 center;  // mm; phantom grids are centred on the origin
  Vec3 radii;   // mm

  bool contains(const Vec3& p) const;
};

struct Plane {
  Vec3 point;
  Vec3 normal;

  // Signed side of p: true when (p - point) . normal > 0.
  bool positive(const Vec3& p) const { return dot(p - point, normal) > 0.0; }
};

struct BoneSpec {
  Ellipsoid shape;
  double hu = 700.0;
  std::vector<Plane> fracture_planes;
  int random_planes = 0;  // extra planes drawn from the phantom seed
};

inline constexpr int kMaxFracturePlanes = 9;

// Three ellipsoid bones inside a soft-tissue ellipsoid body, surrounded by
// air. Bones are indexed by anatomy code (sacrum, left hip, right hip).
struct PhantomSpec {
  Index3 dims{128, 128, 128};
  Vec3 spacing{2.0, 2.0, 2.0};
  Ellipsoid body;
  double soft_tissue_hu = 40.0;
  double background_hu = -1000.0;
  std::array<BoneSpec, kAnatomyCount> bones;
  double min_fragment_mm3 = 500.0;
  std::uint64_t seed = 0;

  // Default pelvis-like layout scaled to the grid extent, no fractures.
  static PhantomSpec standard(Index3 dims = {128, 128, 128}, Vec3 spacing = {2.0, 2.0, 2.0});
  Grid3 grid() const;
};

struct Phantom {
  IntensityVolume ct;
  LabelVolume labels;
  std::vector<std::string> warnings;  // merged or dropped slivers
};

// Splits every bone along its fracture planes, merges pieces below
// min_fragment_mm3 (or beyond ten per bone) into their most-adjacent
// neighbour, and labels fragments largest first. Deterministic per seed.
// Throws InvalidArgument for more than nine planes on one bone.
Phantom generate_phantom(const PhantomSpec& spec);

struct DilateOp {
  int iterations = 1;
};
struct ErodeOp {
  int iterations = 1;
};
struct DeleteFragmentOp {
  FragmentLabel label;
};
struct MergeOp {
  FragmentLabel keep;
  FragmentLabel absorb;
};
struct SplitOp {
  FragmentLabel label;
  Plane plane;  // physical coordinates
};
struct ShiftOp {
  FragmentLabel label;
  Vec3 offset_mm;  // rounded to whole voxels
};

using PerturbOp = std::variant<DilateOp, ErodeOp, DeleteFragmentOp, MergeOp, SplitOp, ShiftOp>;

struct PerturbationSpec {
  std::vector<PerturbOp> operations;
  std::uint64_t seed = 0;

  // Draws `count` operations on fragments of `gt` from the seed.
  static PerturbationSpec random(const LabelVolume& gt, std::uint64_t seed, int count);
};

// Applies the operations in order. Throws InvalidLabel when an operation
// names a label that is absent at that point.
LabelVolume perturb(const LabelVolume& gt, const PerturbationSpec& spec);

// Randomly permutes fragment indices within each bone (ids stay inside the
// bone). Used to check that evaluation is driven by overlap, not ids.
LabelVolume permute_fragment_indices(const LabelVolume& volume, std::uint64_t seed);
MultiLabelMask2D permute_fragment_indices(const MultiLabelMask2D& mask, std::uint64_t seed);

}  // namespace fracbench
