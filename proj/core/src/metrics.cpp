#include "fracbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fracbench/error.hpp"
#include "surface_scan.hpp"

namespace fracbench {

namespace {

constexpr std::size_t kLeafSize = 16;

void require_same_grid(const BinaryMask& a, const BinaryMask& b) {
  if (!(a.grid == b.grid) || a.planar != b.planar || a.cells.size() != b.cells.size())
    throw Error(ErrorCode::GridMismatch, "masks live on different grids");
}

double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace

double iou(const BinaryMask& a, const BinaryMask& b) {
  require_same_grid(a, b);
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    const bool pa = a.cells[i] != 0;
    const bool pb = b.cells[i] != 0;
    inter += (pa && pb) ? 1 : 0;
    uni += (pa || pb) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

SurfacePointSet extract_surface(const BinaryMask& mask) {
  SurfacePointSet out;
  detail::scan_boundary(
      mask.grid, mask.planar, [&](std::size_t idx) { return mask.cells[idx] != 0; },
      [&](int i, int j, int k, std::size_t) { out.points.push_back(mask.grid.center(i, j, k)); });
  return out;
}

double percentile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error(ErrorCode::InvalidArgument, "percentile of an empty set");
  if (sorted.size() == 1) return sorted.front();
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

SurfaceIndex::SurfaceIndex(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    build(0, points_.size());
  }
}

std::size_t SurfaceIndex::build(std::size_t begin, std::size_t end) {
  const std::size_t id = nodes_.size();
  nodes_.push_back(Node{begin, end, -1, 0.0, 0, 0});
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = points_[begin], hi = points_[begin];
  for (std::size_t i = begin + 1; i < end; ++i) {
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], points_[i][a]);
      hi[a] = std::max(hi[a], points_[i][a]);
    }
  }
  int axis = 0;
  for (int a = 1; a < 3; ++a) {
    if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;
  }
  if (hi[axis] == lo[axis]) return id;  // all points coincide

  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(points_.begin() + static_cast<std::ptrdiff_t>(begin),
                   points_.begin() + static_cast<std::ptrdiff_t>(mid),
                   points_.begin() + static_cast<std::ptrdiff_t>(end),
                   [axis](const Vec3& a, const Vec3& b) { return a[axis] < b[axis]; });
  const double split = points_[mid][axis];
  const std::size_t left = build(begin, mid);
  const std::size_t right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

// Left subtree holds coordinates <= split, right subtree >= split. Pruning
// uses the single-axis gap, which never exceeds the full squared distance in
// floating point, so results equal an exhaustive scan bit for bit.
void SurfaceIndex::search(std::size_t node_id, const Vec3& q, double& best) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (std::size_t i = node.begin; i < node.end; ++i) best = std::min(best, squared_distance(q, points_[i]));
    return;
  }
  const double diff = q[node.axis] - node.split;
  const std::size_t near = diff <= 0.0 ? node.left : node.right;
  const std::size_t far = diff <= 0.0 ? node.right : node.left;
  search(near, q, best);
  if (diff * diff <= best) search(far, q, best);
}

double SurfaceIndex::nearest_squared(const Vec3& q) const {
  double best = std::numeric_limits<double>::infinity();
  if (!nodes_.empty()) search(0, q, best);
  return best;
}

std::vector<double> directed_distances(const SurfacePointSet& from, const SurfacePointSet& to) {
  if (to.empty()) throw Error(ErrorCode::EmptySurface, "target surface is empty");
  const SurfaceIndex index(to.points);
  std::vector<double> out;
  out.reserve(from.size());
  for (const Vec3& p : from.points) out.push_back(std::sqrt(index.nearest_squared(p)));
  return out;
}

SurfaceDistances surface_distances(const SurfacePointSet& cp, const SurfacePointSet& cg) {
  if (cp.empty() || cg.empty()) throw Error(ErrorCode::EmptySurface, "surface distance needs two nonempty surfaces");
  std::vector<double> forward = directed_distances(cp, cg);
  std::vector<double> backward = directed_distances(cg, cp);

  SurfaceDistances out;
  const double total = std::accumulate(forward.begin(), forward.end(), 0.0) +
                       std::accumulate(backward.begin(), backward.end(), 0.0);
  out.assd = total / static_cast<double>(forward.size() + backward.size());

  std::sort(forward.begin(), forward.end());
  std::sort(backward.begin(), backward.end());
  out.hd95 = std::max(percentile_sorted(forward, 0.95), percentile_sorted(backward, 0.95));
  out.hausdorff = std::max(forward.back(), backward.back());
  return out;
}

double hd95(const SurfacePointSet& cp, const SurfacePointSet& cg) { return surface_distances(cp, cg).hd95; }

double assd(const SurfacePointSet& cp, const SurfacePointSet& cg) { return surface_distances(cp, cg).assd; }

BoundingSphere bounding_sphere(const Grid3& grid, bool planar, const Index3& lo, const Index3& hi) {
  Vec3 box_lo, box_hi;
  for (int a = 0; a < 3; ++a) {
    box_lo[a] = grid.offset[a] + lo[a] * grid.spacing[a];
    box_hi[a] = grid.offset[a] + (hi[a] + 1) * grid.spacing[a];
  }
  if (planar) box_hi.z = box_lo.z;
  const Vec3 diag = box_hi - box_lo;
  return BoundingSphere{0.5 * (box_lo + box_hi), 0.5 * norm(diag)};
}

BoundingSphere bounding_sphere(const BinaryMask& mask) {
  Index3 lo{mask.grid.dims[0], mask.grid.dims[1], mask.grid.dims[2]};
  Index3 hi{-1, -1, -1};
  for (std::size_t idx = 0; idx < mask.cells.size(); ++idx) {
    if (mask.cells[idx] == 0) continue;
    const Index3 c = mask.grid.coords(idx);
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], c[a]);
      hi[a] = std::max(hi[a], c[a]);
    }
  }
  if (hi[0] < 0) throw Error(ErrorCode::EmptyMask, "bounding sphere of an empty mask");
  return bounding_sphere(mask.grid, mask.planar, lo, hi);
}

}  // namespace fracbench
