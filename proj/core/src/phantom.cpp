#include "fracbench/phantom.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "fracbench/error.hpp"
#include "fracbench/rng.hpp"

namespace fracbench {

bool Ellipsoid::contains(const Vec3& p) const {
  const Vec3 d = p - center;
  const double q = (d.x * d.x) / (radii.x * radii.x) + (d.y * d.y) / (radii.y * radii.y) +
                   (d.z * d.z) / (radii.z * radii.z);
  return q <= 1.0;
}

PhantomSpec PhantomSpec::standard(Index3 dims, Vec3 spacing) {
  PhantomSpec spec;
  spec.dims = dims;
  spec.spacing = spacing;
  const Vec3 e{dims[0] * spacing.x, dims[1] * spacing.y, dims[2] * spacing.z};
  spec.body = {{0.0, 0.0, 0.0}, {0.45 * e.x, 0.35 * e.y, 0.45 * e.z}};
  spec.bones[code(Anatomy::Sacrum)].shape = {{0.0, 0.12 * e.y, 0.0}, {0.08 * e.x, 0.08 * e.y, 0.15 * e.z}};
  // LPS frame: +x points to the patient's left.
  spec.bones[code(Anatomy::LeftHip)].shape = {{0.22 * e.x, 0.0, 0.0}, {0.11 * e.x, 0.14 * e.y, 0.25 * e.z}};
  spec.bones[code(Anatomy::RightHip)].shape = {{-0.22 * e.x, 0.0, 0.0}, {0.11 * e.x, 0.14 * e.y, 0.25 * e.z}};
  return spec;
}

Grid3 PhantomSpec::grid() const {
  Grid3 g;
  g.dims = dims;
  g.spacing = spacing;
  g.offset = {-0.5 * dims[0] * spacing.x, -0.5 * dims[1] * spacing.y, -0.5 * dims[2] * spacing.z};
  return g;
}

namespace {

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Vec3 random_unit_vector(std::mt19937_64& rng) {
  // Marsaglia's method: uniform on the sphere from two uniforms.
  while (true) {
    const double a = 2.0 * unit_uniform(rng) - 1.0;
    const double b = 2.0 * unit_uniform(rng) - 1.0;
    const double s = a * a + b * b;
    if (s >= 1.0 || s == 0.0) continue;
    const double r = 2.0 * std::sqrt(1.0 - s);
    return {a * r, b * r, 1.0 - 2.0 * s};
  }
}

template <typename Fn>
void for_each_face_neighbour(const Grid3& grid, std::size_t idx, Fn&& fn) {
  const Index3 c = grid.coords(idx);
  const std::size_t sy = static_cast<std::size_t>(grid.dims[0]);
  const std::size_t sz = sy * static_cast<std::size_t>(grid.dims[1]);
  if (c[0] > 0) fn(idx - 1);
  if (c[0] < grid.dims[0] - 1) fn(idx + 1);
  if (c[1] > 0) fn(idx - sy);
  if (c[1] < grid.dims[1] - 1) fn(idx + sy);
  if (c[2] > 0) fn(idx - sz);
  if (c[2] < grid.dims[2] - 1) fn(idx + sz);
}

// Splits one bone's voxels into plane-bounded regions, merges undersized or
// surplus regions and writes size-ordered labels.
void fragment_bone(const Grid3& grid, Anatomy anatomy, const std::vector<std::size_t>& voxels,
                   const std::vector<Plane>& planes, double min_cells, LabelVolume& labels,
                   std::vector<std::string>& warnings) {
  if (voxels.empty()) {
    warnings.push_back(std::string(to_string(anatomy)) + ": bone does not intersect the grid");
    return;
  }
  std::map<std::uint32_t, int> region_of_signature;
  std::vector<int> region(grid.size(), -1);
  std::vector<std::size_t> cells;
  std::vector<std::uint32_t> signature;
  for (std::size_t idx : voxels) {
    const Index3 c = grid.coords(idx);
    const Vec3 p = grid.center(c[0], c[1], c[2]);
    std::uint32_t sig = 0;
    for (std::size_t k = 0; k < planes.size(); ++k) sig |= planes[k].positive(p) ? (1u << k) : 0u;
    auto [it, inserted] = region_of_signature.try_emplace(sig, static_cast<int>(cells.size()));
    if (inserted) {
      cells.push_back(0);
      signature.push_back(sig);
    }
    region[idx] = it->second;
    ++cells[static_cast<std::size_t>(it->second)];
  }

  const std::size_t n = cells.size();
  std::vector<std::vector<std::size_t>> contact(n, std::vector<std::size_t>(n, 0));
  for (std::size_t idx : voxels) {
    const int r = region[idx];
    for_each_face_neighbour(grid, idx, [&](std::size_t nb) {
      const int q = region[nb];
      if (q >= 0 && q != r) ++contact[static_cast<std::size_t>(r)][static_cast<std::size_t>(q)];
    });
  }

  // parent[r] == r while r is a live region; merged regions point at their host.
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::vector<bool> dropped(n, false);
  auto live = [&](std::size_t r) { return parent[r] == r && !dropped[r]; };
  while (true) {
    std::size_t live_count = 0;
    std::size_t smallest = n;
    for (std::size_t r = 0; r < n; ++r) {
      if (!live(r)) continue;
      ++live_count;
      if (smallest == n || cells[r] < cells[smallest]) smallest = r;
    }
    if (smallest == n) break;
    if (static_cast<double>(cells[smallest]) >= min_cells && live_count <= kFragmentsPerBone) break;

    std::size_t host = n;
    for (std::size_t q = 0; q < n; ++q) {
      if (q == smallest || !live(q) || contact[smallest][q] == 0) continue;
      if (host == n || contact[smallest][q] > contact[smallest][host]) host = q;
    }
    if (host == n) {
      dropped[smallest] = true;
      warnings.push_back(std::string(to_string(anatomy)) + ": isolated piece of " + std::to_string(cells[smallest]) +
                         " voxels omitted");
      continue;
    }
    warnings.push_back(std::string(to_string(anatomy)) + ": piece of " + std::to_string(cells[smallest]) +
                       " voxels merged into a neighbour");
    parent[smallest] = host;
    cells[host] += cells[smallest];
    for (std::size_t q = 0; q < n; ++q) {
      contact[host][q] += contact[smallest][q];
      contact[q][host] += contact[q][smallest];
      contact[smallest][q] = contact[q][smallest] = 0;
    }
    contact[host][host] = 0;
  }

  auto root = [&](std::size_t r) {
    while (parent[r] != r) r = parent[r];
    return r;
  };
  std::vector<std::size_t> order;
  for (std::size_t r = 0; r < n; ++r) {
    if (live(r)) order.push_back(r);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (cells[a] != cells[b]) return cells[a] > cells[b];
    return signature[a] < signature[b];
  });
  std::vector<int> label_of(n, 0);
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    label_of[order[rank]] = encode_label({anatomy, static_cast<int>(rank) + 1});
  }
  for (std::size_t idx : voxels) {
    const std::size_t r = root(static_cast<std::size_t>(region[idx]));
    labels.voxels[idx] = dropped[r] ? 0 : static_cast<std::uint8_t>(label_of[r]);
  }
}

}  // namespace

Phantom generate_phantom(const PhantomSpec& spec) {
  const Grid3 grid = spec.grid();
  validate_grid(grid);
  Phantom out;
  out.ct = IntensityVolume(grid, static_cast<float>(spec.background_hu));
  out.labels = LabelVolume(grid, 0);

  std::array<std::vector<Plane>, kAnatomyCount> planes;
  for (int b = 0; b < kAnatomyCount; ++b) {
    const BoneSpec& bone = spec.bones[static_cast<std::size_t>(b)];
    planes[static_cast<std::size_t>(b)] = bone.fracture_planes;
    std::mt19937_64 rng(stream_seed(spec.seed, static_cast<std::uint64_t>(b)));
    for (int k = 0; k < bone.random_planes; ++k) {
      Vec3 point = bone.shape.center;
      for (int a = 0; a < 3; ++a) point[a] += (unit_uniform(rng) - 0.5) * bone.shape.radii[a];
      planes[static_cast<std::size_t>(b)].push_back({point, random_unit_vector(rng)});
    }
    if (planes[static_cast<std::size_t>(b)].size() > kMaxFracturePlanes)
      throw Error(ErrorCode::InvalidArgument, "at most nine fracture planes per bone");
  }

  std::array<std::vector<std::size_t>, kAnatomyCount> bone_voxels;
  for (int k = 0; k < grid.dims[2]; ++k) {
    for (int j = 0; j < grid.dims[1]; ++j) {
      for (int i = 0; i < grid.dims[0]; ++i) {
        const Vec3 p = grid.center(i, j, k);
        const std::size_t idx = grid.index(i, j, k);
        if (spec.body.contains(p)) out.ct.voxels[idx] = static_cast<float>(spec.soft_tissue_hu);
        for (int b = 0; b < kAnatomyCount; ++b) {
          const BoneSpec& bone = spec.bones[static_cast<std::size_t>(b)];
          if (bone.shape.radii.x <= 0.0 || !bone.shape.contains(p)) continue;
          out.ct.voxels[idx] = static_cast<float>(bone.hu);
          bone_voxels[static_cast<std::size_t>(b)].push_back(idx);
          break;
        }
      }
    }
  }

  const double voxel_mm3 = grid.spacing.x * grid.spacing.y * grid.spacing.z;
  for (int b = 0; b < kAnatomyCount; ++b) {
    fragment_bone(grid, static_cast<Anatomy>(b), bone_voxels[static_cast<std::size_t>(b)],
                  planes[static_cast<std::size_t>(b)], spec.min_fragment_mm3 / voxel_mm3, out.labels, out.warnings);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Perturbations

namespace {

void require_present(const LabelVolume& v, int id) {
  if (std::find(v.voxels.begin(), v.voxels.end(), static_cast<std::uint8_t>(id)) == v.voxels.end())
    throw Error(ErrorCode::InvalidLabel, "label " + std::to_string(id) + " not present");
}

// Reassigns indices of one bone so that larger fragments get smaller indices.
void renormalize_bone(LabelVolume& v, Anatomy anatomy) {
  const int first = kFragmentsPerBone * code(anatomy) + 1;
  std::array<std::size_t, kFragmentsPerBone> counts{};
  for (std::uint8_t id : v.voxels) {
    if (id >= first && id < first + kFragmentsPerBone) ++counts[static_cast<std::size_t>(id - first)];
  }
  std::vector<int> present;
  for (int s = 0; s < kFragmentsPerBone; ++s) {
    if (counts[static_cast<std::size_t>(s)] > 0) present.push_back(s);
  }
  std::stable_sort(present.begin(), present.end(), [&](int a, int b) {
    return counts[static_cast<std::size_t>(a)] > counts[static_cast<std::size_t>(b)];
  });
  std::array<std::uint8_t, kFragmentsPerBone> remap{};
  for (std::size_t r = 0; r < present.size(); ++r)
    remap[static_cast<std::size_t>(present[r])] = static_cast<std::uint8_t>(first + static_cast<int>(r));
  for (std::uint8_t& id : v.voxels) {
    if (id >= first && id < first + kFragmentsPerBone) id = remap[static_cast<std::size_t>(id - first)];
  }
}

void apply(LabelVolume& v, const DilateOp& op) {
  for (int it = 0; it < op.iterations; ++it) {
    LabelVolume next = v;
    for (std::size_t idx = 0; idx < v.voxels.size(); ++idx) {
      if (v.voxels[idx] != 0) continue;
      std::uint8_t best = 0;
      for_each_face_neighbour(v.grid, idx, [&](std::size_t nb) {
        const std::uint8_t id = v.voxels[nb];
        if (id != 0 && (best == 0 || id < best)) best = id;
      });
      next.voxels[idx] = best;
    }
    v = std::move(next);
  }
}

void apply(LabelVolume& v, const ErodeOp& op) {
  for (int it = 0; it < op.iterations; ++it) {
    LabelVolume next = v;
    for (std::size_t idx = 0; idx < v.voxels.size(); ++idx) {
      const std::uint8_t id = v.voxels[idx];
      if (id == 0) continue;
      const Index3 c = v.grid.coords(idx);
      bool border = false;
      for (int a = 0; a < 3; ++a) border = border || c[a] == 0 || c[a] == v.grid.dims[a] - 1;
      for_each_face_neighbour(v.grid, idx, [&](std::size_t nb) { border = border || v.voxels[nb] != id; });
      if (border) next.voxels[idx] = 0;
    }
    v = std::move(next);
  }
}

void apply(LabelVolume& v, const DeleteFragmentOp& op) {
  const int id = encode_label(op.label);
  require_present(v, id);
  std::replace(v.voxels.begin(), v.voxels.end(), static_cast<std::uint8_t>(id), std::uint8_t{0});
}

void apply(LabelVolume& v, const MergeOp& op) {
  const int keep = encode_label(op.keep);
  const int absorb = encode_label(op.absorb);
  require_present(v, keep);
  require_present(v, absorb);
  if (keep == absorb) return;
  std::replace(v.voxels.begin(), v.voxels.end(), static_cast<std::uint8_t>(absorb), static_cast<std::uint8_t>(keep));
  renormalize_bone(v, op.keep.anatomy);
  if (op.absorb.anatomy != op.keep.anatomy) renormalize_bone(v, op.absorb.anatomy);
}

void apply(LabelVolume& v, const SplitOp& op) {
  const int id = encode_label(op.label);
  require_present(v, id);
  const int first = kFragmentsPerBone * code(op.label.anatomy) + 1;
  std::array<bool, kFragmentsPerBone> used{};
  for (std::uint8_t x : v.voxels) {
    if (x >= first && x < first + kFragmentsPerBone) used[static_cast<std::size_t>(x - first)] = true;
  }
  int free_slot = -1;
  for (int s = 0; s < kFragmentsPerBone && free_slot < 0; ++s) {
    if (!used[static_cast<std::size_t>(s)]) free_slot = s;
  }
  if (free_slot < 0) throw Error(ErrorCode::InvalidLabel, "no free fragment index left in the bone");
  const auto new_id = static_cast<std::uint8_t>(first + free_slot);
  for (std::size_t idx = 0; idx < v.voxels.size(); ++idx) {
    if (v.voxels[idx] != id) continue;
    const Index3 c = v.grid.coords(idx);
    if (op.plane.positive(v.grid.center(c[0], c[1], c[2]))) v.voxels[idx] = new_id;
  }
}

void apply(LabelVolume& v, const ShiftOp& op) {
  const int id = encode_label(op.label);
  require_present(v, id);
  Index3 shift;
  for (int a = 0; a < 3; ++a) shift[a] = static_cast<int>(std::lround(op.offset_mm[a] / v.grid.spacing[a]));
  std::vector<std::size_t> moved;
  for (std::size_t idx = 0; idx < v.voxels.size(); ++idx) {
    if (v.voxels[idx] == id) {
      moved.push_back(idx);
      v.voxels[idx] = 0;
    }
  }
  for (std::size_t idx : moved) {
    const Index3 c = v.grid.coords(idx);
    const int i = c[0] + shift[0], j = c[1] + shift[1], k = c[2] + shift[2];
    if (v.grid.contains(i, j, k)) v.voxels[v.grid.index(i, j, k)] = static_cast<std::uint8_t>(id);
  }
}

std::vector<int> present_ids(const LabelVolume& v) {
  std::vector<int> out;
  for (const FragmentCount& f : list_fragments(v)) out.push_back(encode_label(f.label));
  return out;
}

}  // namespace

LabelVolume perturb(const LabelVolume& gt, const PerturbationSpec& spec) {
  LabelVolume v = gt;
  for (const PerturbOp& op : spec.operations) {
    std::visit([&](const auto& o) { apply(v, o); }, op);
  }
  return v;
}

PerturbationSpec PerturbationSpec::random(const LabelVolume& gt, std::uint64_t seed, int count) {
  PerturbationSpec spec;
  spec.seed = seed;
  std::mt19937_64 rng(stream_seed(seed, 0));
  LabelVolume state = gt;
  for (int n = 0; n < count; ++n) {
    const std::vector<int> ids = present_ids(state);
    if (ids.empty()) break;
    const int pick = ids[static_cast<std::size_t>(rng() % ids.size())];
    const FragmentLabel label = decode_label(pick);
    PerturbOp op;
    switch (rng() % 6) {
      case 0: op = DilateOp{1}; break;
      case 1: op = ErodeOp{1}; break;
      case 2: op = DeleteFragmentOp{label}; break;
      case 3: {
        int other = pick;
        for (int id : ids) {
          if (id != pick && decode_label(id).anatomy == label.anatomy) other = id;
        }
        op = MergeOp{label, decode_label(other)};
        break;
      }
      case 4: {
        Vec3 centroid;
        std::size_t count_cells = 0;
        for (std::size_t idx = 0; idx < state.voxels.size(); ++idx) {
          if (state.voxels[idx] != pick) continue;
          const Index3 c = state.grid.coords(idx);
          centroid = centroid + state.grid.center(c[0], c[1], c[2]);
          ++count_cells;
        }
        centroid = (1.0 / static_cast<double>(count_cells)) * centroid;
        op = SplitOp{label, Plane{centroid, random_unit_vector(rng)}};
        break;
      }
      default: {
        Vec3 offset;
        for (int a = 0; a < 3; ++a) offset[a] = (static_cast<double>(rng() % 5) - 2.0) * state.grid.spacing[a];
        op = ShiftOp{label, offset};
        break;
      }
    }
    try {
      std::visit([&](const auto& o) { apply(state, o); }, op);
    } catch (const Error&) {
      continue;  // e.g. split with no free slot; skip the draw
    }
    spec.operations.push_back(op);
  }
  return spec;
}

namespace {

// Random injective map from present fragment slots to the ten slots of each bone.
std::array<int, kMaxLabelId + 1> random_relabel(const std::array<bool, kMaxLabelId + 1>& present, std::uint64_t seed) {
  std::array<int, kMaxLabelId + 1> map{};
  std::mt19937_64 rng(stream_seed(seed, 0));
  for (Anatomy a : kAnatomies) {
    std::array<int, kFragmentsPerBone> slots;
    std::iota(slots.begin(), slots.end(), 1);
    for (int i = kFragmentsPerBone - 1; i > 0; --i) std::swap(slots[static_cast<std::size_t>(i)], slots[rng() % static_cast<std::uint64_t>(i + 1)]);
    int next = 0;
    for (int index = 1; index <= kFragmentsPerBone; ++index) {
      const int id = encode_label({a, index});
      if (present[static_cast<std::size_t>(id)]) map[static_cast<std::size_t>(id)] = encode_label({a, slots[static_cast<std::size_t>(next++)]});
    }
  }
  return map;
}

}  // namespace

LabelVolume permute_fragment_indices(const LabelVolume& volume, std::uint64_t seed) {
  std::array<bool, kMaxLabelId + 1> present{};
  for (const FragmentCount& f : list_fragments(volume)) present[static_cast<std::size_t>(encode_label(f.label))] = true;
  const auto map = random_relabel(present, seed);
  LabelVolume out = volume;
  for (std::uint8_t& id : out.voxels) {
    if (id != 0) id = static_cast<std::uint8_t>(map[id]);
  }
  return out;
}

MultiLabelMask2D permute_fragment_indices(const MultiLabelMask2D& mask, std::uint64_t seed) {
  std::array<bool, kMaxLabelId + 1> present{};
  for (const FragmentCount& f : list_fragments(mask)) present[static_cast<std::size_t>(encode_label(f.label))] = true;
  const auto map = random_relabel(present, seed);
  MultiLabelMask2D out = mask;
  for (std::uint32_t& word : out.pixels) {
    std::uint32_t next = 0;
    for (std::uint32_t b = word & kValidLabelBits; b != 0; b &= b - 1) next |= label_bit(map[static_cast<std::size_t>(std::countr_zero(b) + 1)]);
    word = next;
  }
  return out;
}

}  // namespace fracbench
