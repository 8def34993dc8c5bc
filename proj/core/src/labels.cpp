#include "fracbench/labels.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>

#include "fracbench/error.hpp"

namespace fracbench {

void validate_grid(const Grid3& grid) {
  for (int axis = 0; axis < 3; ++axis) {
    if (grid.dims[axis] < 0) throw Error(ErrorCode::InvalidArgument, "negative grid dimension");
    if (!(grid.spacing[axis] > 0.0) || !std::isfinite(grid.spacing[axis]))
      throw Error(ErrorCode::InvalidArgument, "grid spacing must be positive and finite");
  }
}

const char* to_string(Anatomy a) {
  switch (a) {
    case Anatomy::Sacrum: return "sacrum";
    case Anatomy::LeftHip: return "left_hip";
    case Anatomy::RightHip: return "right_hip";
  }
  return "unknown";
}

std::string to_string(const FragmentLabel& label) {
  return std::string(to_string(label.anatomy)) + "#" + std::to_string(label.index);
}

int encode_label(FragmentLabel label) {
  if (label.index < 1 || label.index > kFragmentsPerBone)
    throw Error(ErrorCode::InvalidLabel, "fragment index " + std::to_string(label.index) + " outside 1..10");
  const int c = code(label.anatomy);
  if (c < 0 || c >= kAnatomyCount) throw Error(ErrorCode::InvalidLabel, "unknown anatomy code");
  return kFragmentsPerBone * c + label.index;
}

FragmentLabel decode_label(int id) {
  if (!is_valid_label_id(id))
    throw Error(ErrorCode::InvalidLabel, "label id " + std::to_string(id) + " outside 1..30");
  return FragmentLabel{static_cast<Anatomy>((id - 1) / kFragmentsPerBone), (id - 1) % kFragmentsPerBone + 1};
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](std::uint8_t c) { return c != 0; }));
}

void validate_labels(const LabelVolume& volume) {
  for (std::uint8_t v : volume.voxels) {
    if (v > kMaxLabelId) throw Error(ErrorCode::InvalidLabel, "voxel label " + std::to_string(v) + " above 30");
  }
}

void validate_labels(const MultiLabelMask2D& mask) {
  for (std::uint32_t w : mask.pixels) {
    if ((w & ~kValidLabelBits) != 0) throw Error(ErrorCode::InvalidLabel, "pixel carries reserved label bits");
  }
}

namespace {

template <typename Pred>
BinaryMask mask_from(const LabelVolume& volume, Pred pred) {
  BinaryMask out(volume.grid, false);
  for (std::size_t i = 0; i < volume.voxels.size(); ++i) out.cells[i] = pred(volume.voxels[i]) ? 1 : 0;
  return out;
}

BinaryMask mask_from_bits(const MultiLabelMask2D& mask, std::uint32_t bits) {
  BinaryMask out(mask.grid(), true);
  for (std::size_t i = 0; i < mask.pixels.size(); ++i) out.cells[i] = (mask.pixels[i] & bits) != 0 ? 1 : 0;
  return out;
}

}  // namespace

BinaryMask fragment_mask(const LabelVolume& volume, FragmentLabel label) {
  const int id = encode_label(label);
  return mask_from(volume, [id](std::uint8_t v) { return v == id; });
}

BinaryMask fragment_mask(const MultiLabelMask2D& mask, FragmentLabel label) {
  return mask_from_bits(mask, label_bit(encode_label(label)));
}

BinaryMask anatomy_mask(const LabelVolume& volume, Anatomy anatomy) {
  const int lo = kFragmentsPerBone * code(anatomy) + 1;
  const int hi = lo + kFragmentsPerBone - 1;
  return mask_from(volume, [lo, hi](std::uint8_t v) { return v >= lo && v <= hi; });
}

BinaryMask anatomy_mask(const MultiLabelMask2D& mask, Anatomy anatomy) {
  return mask_from_bits(mask, anatomy_bits(anatomy));
}

namespace {

std::vector<FragmentCount> to_list(const std::array<std::size_t, kMaxLabelId + 1>& counts) {
  std::vector<FragmentCount> out;
  for (int id = 1; id <= kMaxLabelId; ++id) {
    if (counts[id] > 0) out.push_back({decode_label(id), counts[id]});
  }
  return out;
}

}  // namespace

std::vector<FragmentCount> list_fragments(const LabelVolume& volume) {
  std::array<std::size_t, kMaxLabelId + 1> counts{};
  for (std::uint8_t v : volume.voxels) {
    if (v > kMaxLabelId) throw Error(ErrorCode::InvalidLabel, "voxel label above 30");
    ++counts[v];
  }
  return to_list(counts);
}

std::vector<FragmentCount> list_fragments(const MultiLabelMask2D& mask) {
  std::array<std::size_t, kMaxLabelId + 1> counts{};
  for (std::uint32_t w : mask.pixels) {
    for (std::uint32_t bits = w & kValidLabelBits; bits != 0; bits &= bits - 1) {
      ++counts[std::countr_zero(bits) + 1];
    }
  }
  return to_list(counts);
}

}  // namespace fracbench
