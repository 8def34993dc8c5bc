#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fracbench/grid.hpp"

namespace fracbench {

// The three pelvic bones. Integer codes are stable and used by the label
// encoding below.
enum class Anatomy : std::uint8_t { Sacrum = 0, LeftHip = 1, RightHip = 2 };

inline constexpr int kAnatomyCount = 3;
inline constexpr int kFragmentsPerBone = 10;
inline constexpr int kMaxLabelId = kAnatomyCount * kFragmentsPerBone;
inline constexpr Anatomy kAnatomies[kAnatomyCount] = {Anatomy::Sacrum, Anatomy::LeftHip,
                                                      Anatomy::RightHip};

constexpr int code(Anatomy a) { return static_cast<int>(a); }
const char* to_string(Anatomy a);

// Two-level fragment label: the bone of origin, then the fragment index within
// that bone (1 = largest fragment).
struct FragmentLabel {
  Anatomy anatomy = Anatomy::Sacrum;
  int index = 1;

  friend auto operator<=>(const FragmentLabel&, const FragmentLabel&) = default;
};

std::string to_string(const FragmentLabel& label);

// id = 10 * code(anatomy) + index. Throws InvalidLabel for index outside 1..10.
int encode_label(FragmentLabel label);
// Inverse of encode_label. Throws InvalidLabel for id outside 1..30.
FragmentLabel decode_label(int id);

constexpr bool is_valid_label_id(int id) { return id >= 1 && id <= kMaxLabelId; }

// Bit of a label inside a MultiLabelMask2D pixel word.
constexpr std::uint32_t label_bit(int id) { return std::uint32_t{1} << (id - 1); }
// All ten bits belonging to one bone.
constexpr std::uint32_t anatomy_bits(Anatomy a) {
  return ((std::uint32_t{1} << kFragmentsPerBone) - 1) << (kFragmentsPerBone * code(a));
}
inline constexpr std::uint32_t kValidLabelBits = (std::uint32_t{1} << kMaxLabelId) - 1;

// 2D pixel grid where each pixel is the set of labels present there.
// Bit (id - 1) set <=> label id present. Only bits 0..29 may be set.
struct MultiLabelMask2D {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> pixels;

  MultiLabelMask2D() = default;
  MultiLabelMask2D(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, 0) {}

  std::uint32_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint32_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }

  // Grid used for metric computation: unit pixel spacing, z extent of one.
  Grid3 grid() const { return Grid3{{width, height, 1}, {1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}}; }

  friend bool operator==(const MultiLabelMask2D&, const MultiLabelMask2D&) = default;
};

inline constexpr int kChallengeDetectorSize = 448;

// Occupancy mask on a 2D or 3D grid. Planar masks come from 2D images: they
// have a single slice and use 4-connectivity for surface extraction.
struct BinaryMask {
  Grid3 grid;
  bool planar = false;
  std::vector<std::uint8_t> cells;

  BinaryMask() = default;
  BinaryMask(Grid3 g, bool is_planar) : grid(g), planar(is_planar), cells(g.size(), 0) {}

  bool at(int i, int j, int k) const { return cells[grid.index(i, j, k)] != 0; }
  std::size_t count() const;
  bool empty() const { return count() == 0; }
};

struct FragmentCount {
  FragmentLabel label;
  std::size_t cells = 0;

  friend bool operator==(const FragmentCount&, const FragmentCount&) = default;
};

// Throws InvalidLabel if any voxel holds an id above 30.
void validate_labels(const LabelVolume& volume);
// Throws InvalidLabel if any pixel has bits above bit 29 set.
void validate_labels(const MultiLabelMask2D& mask);

BinaryMask fragment_mask(const LabelVolume& volume, FragmentLabel label);
BinaryMask fragment_mask(const MultiLabelMask2D& mask, FragmentLabel label);
BinaryMask anatomy_mask(const LabelVolume& volume, Anatomy anatomy);
BinaryMask anatomy_mask(const MultiLabelMask2D& mask, Anatomy anatomy);

// One entry per label with a nonzero cell count, ordered by encoded id.
std::vector<FragmentCount> list_fragments(const LabelVolume& volume);
std::vector<FragmentCount> list_fragments(const MultiLabelMask2D& mask);

}  // namespace fracbench
