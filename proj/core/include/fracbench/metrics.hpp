#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fracbench/grid.hpp"
#include "fracbench/labels.hpp"

namespace fracbench {

// Physical centres (mm) of the boundary cells of a mask. z = 0 plane for 2D
// masks on the default pixel grid.
struct SurfacePointSet {
  std::vector<Vec3> points;

  bool empty() const { return points.empty(); }
  std::size_t size() const { return points.size(); }
};

struct BoundingSphere {
  Vec3 center;
  double radius = 0.0;
};

// |a ∩ b| / |a ∪ b|; 1.0 when both masks are empty.
double iou(const BinaryMask& a, const BinaryMask& b);

// Foreground cells with at least one face neighbour (6 in 3D, 4 for planar
// masks) that is background or outside the grid.
SurfacePointSet extract_surface(const BinaryMask& mask);

// Linear-interpolation percentile of an ascending range, q in [0, 1].
// This is the single place where the percentile convention lives.
double percentile_sorted(std::span<const double> sorted, double q);

// Nearest-neighbour index over a fixed point set (static kd-tree). Queries
// return exactly the minimum an exhaustive scan would find.
class SurfaceIndex {
 public:
  explicit SurfaceIndex(std::span<const Vec3> points);

  // Squared Euclidean distance to the closest indexed point.
  double nearest_squared(const Vec3& q) const;
  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    std::size_t begin;
    std::size_t end;
    int axis;         // -1 for leaves
    double split;
    std::size_t left;
    std::size_t right;
  };

  std::size_t build(std::size_t begin, std::size_t end);
  void search(std::size_t node, const Vec3& q, double& best) const;

  std::vector<Vec3> points_;
  std::vector<Node> nodes_;
};

// For every point of `from`, Euclidean distance to the closest point of `to`.
std::vector<double> directed_distances(const SurfacePointSet& from, const SurfacePointSet& to);

struct SurfaceDistances {
  double hd95 = 0.0;
  double assd = 0.0;
  double hausdorff = 0.0;  // max directed distance, both directions
};

// HD95, ASSD and the plain Hausdorff distance from one pair of directed
// distance sweeps. Throws EmptySurface when either set is empty.
SurfaceDistances surface_distances(const SurfacePointSet& cp, const SurfacePointSet& cg);

// max(P95(cp -> cg), P95(cg -> cp)). Throws EmptySurface on empty input.
double hd95(const SurfacePointSet& cp, const SurfacePointSet& cg);
// Mean of both directed distance sets. Throws EmptySurface on empty input.
double assd(const SurfacePointSet& cp, const SurfacePointSet& cg);

// Sphere circumscribing the tight physical bounding box of the mask (box
// spans full cell extents). Planar masks use the in-plane box only.
// Throws EmptyMask on an empty mask.
BoundingSphere bounding_sphere(const BinaryMask& mask);

// Same rule from an inclusive cell-index box.
BoundingSphere bounding_sphere(const Grid3& grid, bool planar, const Index3& lo, const Index3& hi);

}  // namespace fracbench
