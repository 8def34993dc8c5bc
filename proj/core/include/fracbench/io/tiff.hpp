#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "fracbench/drr.hpp"
#include "fracbench/io/file.hpp"
#include "fracbench/labels.hpp"

namespace fracbench::io {

// Baseline TIFF, single channel, uncompressed, one row per strip, written
// little-endian. Readers accept both byte orders and any strip layout.

// 32-bit unsigned samples holding the label bitmask of each pixel.
// Reading throws UnsupportedFormat for other bit depths, sample formats,
// channel counts or compression; InvalidLabel for bits above 29 when
// `validate` is set; ParseError for malformed files.
void write_mask_tiff(const MultiLabelMask2D& mask, const std::filesystem::path& path);
MultiLabelMask2D read_mask_tiff(const std::filesystem::path& path, bool validate = true,
                                std::uint64_t max_payload_bytes = kDefaultMaxPayloadBytes);
std::string encode_mask_tiff(const MultiLabelMask2D& mask);
MultiLabelMask2D decode_mask_tiff(std::string_view bytes, bool validate = true,
                                  std::uint64_t max_payload_bytes = kDefaultMaxPayloadBytes);

// 32-bit IEEE float samples; values are narrowed from double on write.
void write_image_tiff(const ProjectionImage& image, const std::filesystem::path& path);
ProjectionImage read_image_tiff(const std::filesystem::path& path,
                                std::uint64_t max_payload_bytes = kDefaultMaxPayloadBytes);
std::string encode_image_tiff(const ProjectionImage& image);
ProjectionImage decode_image_tiff(std::string_view bytes, std::uint64_t max_payload_bytes = kDefaultMaxPayloadBytes);

}  // namespace fracbench::io
