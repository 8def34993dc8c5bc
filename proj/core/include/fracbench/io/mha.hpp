#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "fracbench/grid.hpp"
#include "fracbench/io/file.hpp"

namespace fracbench::io {

enum class MhaElementType { UChar, Short, UShort, Float };

const char* to_string(MhaElementType t);  // MET_UCHAR, ...
std::size_t element_size(MhaElementType t);

struct MhaHeader {
  Index3 dims{0, 0, 0};
  Vec3 spacing{1.0, 1.0, 1.0};
  Vec3 offset{0.0, 0.0, 0.0};
  std::array<double, 9> transform{1, 0, 0, 0, 1, 0, 0, 0, 1};
  MhaElementType element_type = MhaElementType::Float;
  bool compressed = false;
  // Keys this reader does not interpret, in file order. Written back verbatim
  // between DimSize and ElementType.
  std::vector<std::pair<std::string, std::string>> extra;

  Grid3 grid() const { return Grid3{dims, spacing, offset}; }
  bool identity_transform() const;

  friend bool operator==(const MhaHeader&, const MhaHeader&) = default;
};

using MhaVoxels =
    std::variant<std::vector<std::uint8_t>, std::vector<std::int16_t>, std::vector<std::uint16_t>, std::vector<float>>;

struct MhaImage {
  MhaHeader header;
  MhaVoxels voxels;  // alternative matches header.element_type

  friend bool operator==(const MhaImage&, const MhaImage&) = default;
};

struct MhaReadOptions {
  bool validate_labels = true;  // only used by read_mha_labels
  std::uint64_t max_payload_bytes = kDefaultMaxPayloadBytes;
};

// Parses a MetaImage file with LOCAL data, raw or zlib-compressed. NDims must
// be 3. Big-endian payloads are byte-swapped on load.
// Throws ParseError for malformed headers or truncated/oversized payloads,
// UnsupportedFormat for other element types, channels or external data files.
MhaImage read_mha_image(const std::filesystem::path& path, const MhaReadOptions& options = {});
MhaImage parse_mha(std::string_view bytes, const MhaReadOptions& options = {});

// Header fields in canonical order, little-endian payload, atomic write.
// The image's compressed flag is ignored in favour of `compress`.
void write_mha_image(const MhaImage& image, const std::filesystem::path& path, bool compress);
std::string serialize_mha(const MhaImage& image, bool compress);

// Typed helpers for the two volume kinds. Both require an identity
// TransformMatrix (UnsupportedFormat otherwise).
// Any element type converts to float HU.
IntensityVolume read_mha_intensity(const std::filesystem::path& path, const MhaReadOptions& options = {});
// Integer element types with values in 0..255 are accepted; ids above 30
// throw InvalidLabel when validate_labels is set.
LabelVolume read_mha_labels(const std::filesystem::path& path, const MhaReadOptions& options = {});

void write_mha(const IntensityVolume& volume, const std::filesystem::path& path, bool compress = false);
void write_mha(const LabelVolume& volume, const std::filesystem::path& path, bool compress = false);

}  // namespace fracbench::io
