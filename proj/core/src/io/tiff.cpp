#include "fracbench/io/tiff.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <map>
#include <optional>
#include <vector>

#include "fracbench/error.hpp"

namespace fracbench::io {

namespace {

enum Tag : std::uint16_t {
  kImageWidth = 256,
  kImageLength = 257,
  kBitsPerSample = 258,
  kCompression = 259,
  kPhotometric = 262,
  kStripOffsets = 273,
  kSamplesPerPixel = 277,
  kRowsPerStrip = 278,
  kStripByteCounts = 279,
  kXResolution = 282,
  kYResolution = 283,
  kPlanarConfiguration = 284,
  kResolutionUnit = 296,
  kSampleFormat = 339,
};

enum FieldType : std::uint16_t { kByte = 1, kAscii = 2, kShort = 3, kLong = 4, kRational = 5 };

constexpr std::uint16_t kSampleUnsigned = 1;
constexpr std::uint16_t kSampleFloat = 3;

[[noreturn]] void parse_fail(const std::string& what) { throw Error(ErrorCode::ParseError, "TIFF: " + what); }

class LeWriter {
 public:
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void bytes(const void* data, std::size_t n) { out_.append(static_cast<const char*>(data), n); }
  std::size_t size() const { return out_.size(); }
  std::string take() { return std::move(out_); }

 private:
  void put(std::uint32_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::string out_;
};

struct Entry {
  std::uint16_t tag;
  std::uint16_t type;
  std::uint32_t count;
  std::uint32_t value;  // inline value or offset
};

// Layout: header, IFD, resolution rationals, strip tables, pixel rows.
std::string encode(int width, int height, std::uint16_t sample_format, const std::vector<std::uint32_t>& words) {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidArgument, "TIFF: image must be non-empty");
  const auto rows = static_cast<std::uint32_t>(height);
  const std::uint32_t row_bytes = static_cast<std::uint32_t>(width) * 4;
  constexpr std::uint32_t kEntries = 14;
  const std::uint32_t ifd_end = 8 + 2 + kEntries * 12 + 4;
  const std::uint32_t xres_at = ifd_end;
  const std::uint32_t yres_at = xres_at + 8;
  const bool inline_tables = rows == 1;
  const std::uint32_t offsets_at = yres_at + 8;
  const std::uint32_t counts_at = offsets_at + (inline_tables ? 0 : rows * 4);
  const std::uint32_t data_at = counts_at + (inline_tables ? 0 : rows * 4);
  if (static_cast<std::uint64_t>(data_at) + static_cast<std::uint64_t>(row_bytes) * rows > 0xFFFFFFFFull)
    throw Error(ErrorCode::InvalidArgument, "TIFF: image too large for classic TIFF");

  const Entry entries[kEntries] = {
      {kImageWidth, kLong, 1, static_cast<std::uint32_t>(width)},
      {kImageLength, kLong, 1, rows},
      {kBitsPerSample, kShort, 1, 32},
      {kCompression, kShort, 1, 1},
      {kPhotometric, kShort, 1, 1},
      {kStripOffsets, kLong, rows, inline_tables ? data_at : offsets_at},
      {kSamplesPerPixel, kShort, 1, 1},
      {kRowsPerStrip, kLong, 1, 1},
      {kStripByteCounts, kLong, rows, inline_tables ? row_bytes : counts_at},
      {kXResolution, kRational, 1, xres_at},
      {kYResolution, kRational, 1, yres_at},
      {kPlanarConfiguration, kShort, 1, 1},
      {kResolutionUnit, kShort, 1, 1},
      {kSampleFormat, kShort, 1, sample_format},
  };

  LeWriter w;
  w.bytes("II", 2);
  w.u16(42);
  w.u32(8);
  w.u16(kEntries);
  for (const Entry& e : entries) {
    w.u16(e.tag);
    w.u16(e.type);
    w.u32(e.count);
    if (e.type == kShort && e.count == 1) {
      w.u16(static_cast<std::uint16_t>(e.value));
      w.u16(0);
    } else {
      w.u32(e.value);
    }
  }
  w.u32(0);  // no further IFDs
  for (int r = 0; r < 2; ++r) {
    w.u32(1);
    w.u32(1);
  }
  if (!inline_tables) {
    for (std::uint32_t r = 0; r < rows; ++r) w.u32(data_at + r * row_bytes);
    for (std::uint32_t r = 0; r < rows; ++r) w.u32(row_bytes);
  }
  for (std::uint32_t v : words) w.u32(v);
  return w.take();
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {
    if (bytes.size() < 8) parse_fail("file too short");
    if (bytes.substr(0, 2) == "II") {
      big_ = false;
    } else if (bytes.substr(0, 2) == "MM") {
      big_ = true;
    } else {
      parse_fail("bad byte-order mark");
    }
    if (u16(2) != 42) {
      if (u16(2) == 43) throw Error(ErrorCode::UnsupportedFormat, "TIFF: BigTIFF is not supported");
      parse_fail("bad magic number");
    }
  }

  std::uint16_t u16(std::uint64_t at) const { return static_cast<std::uint16_t>(get(at, 2)); }
  std::uint32_t u32(std::uint64_t at) const { return static_cast<std::uint32_t>(get(at, 4)); }
  bool big_endian() const { return big_; }
  std::size_t size() const { return bytes_.size(); }
  const char* data() const { return bytes_.data(); }

 private:
  std::uint64_t get(std::uint64_t at, int n) const {
    if (at + static_cast<std::uint64_t>(n) > bytes_.size()) parse_fail("offset beyond end of file");
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      const auto b = static_cast<std::uint8_t>(bytes_[static_cast<std::size_t>(at) + static_cast<std::size_t>(i)]);
      v |= static_cast<std::uint64_t>(b) << (8 * (big_ ? n - 1 - i : i));
    }
    return v;
  }

  std::string_view bytes_;
  bool big_ = false;
};

struct Decoded {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> words;
};

Decoded decode(std::string_view bytes, std::uint16_t want_format, std::uint64_t max_payload_bytes) {
  const Reader r(bytes);
  const std::uint32_t ifd = r.u32(4);
  const std::uint16_t n = r.u16(ifd);

  std::map<std::uint16_t, std::vector<std::uint32_t>> tags;
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint64_t at = static_cast<std::uint64_t>(ifd) + 2 + 12ull * i;
    const std::uint16_t tag = r.u16(at);
    const std::uint16_t type = r.u16(at + 2);
    const std::uint32_t count = r.u32(at + 4);
    std::size_t width = 0;
    if (type == kShort) {
      width = 2;
    } else if (type == kLong) {
      width = 4;
    } else {
      continue;  // rationals, strings and the like carry nothing this reader needs
    }
    if (count == 0) parse_fail("empty tag " + std::to_string(tag));
    if (static_cast<std::uint64_t>(count) * width > r.size()) parse_fail("tag count exceeds file size");
    const std::uint64_t base = count * width <= 4 ? at + 8 : r.u32(at + 8);
    std::vector<std::uint32_t> values(count);
    for (std::uint32_t k = 0; k < count; ++k)
      values[k] = width == 2 ? r.u16(base + 2ull * k) : r.u32(base + 4ull * k);
    tags[tag] = std::move(values);
  }

  auto single = [&](std::uint16_t tag, std::optional<std::uint32_t> fallback) -> std::uint32_t {
    const auto it = tags.find(tag);
    if (it == tags.end()) {
      if (!fallback) parse_fail("missing required tag " + std::to_string(tag));
      return *fallback;
    }
    return it->second.front();
  };
  auto unsupported = [](const std::string& what) { throw Error(ErrorCode::UnsupportedFormat, "TIFF: " + what); };

  const std::uint32_t width = single(kImageWidth, std::nullopt);
  const std::uint32_t height = single(kImageLength, std::nullopt);
  if (width == 0 || height == 0) parse_fail("zero image size");
  const std::uint32_t spp = single(kSamplesPerPixel, 1);
  if (spp != 1) unsupported(std::to_string(spp) + " samples per pixel");
  const auto bps_it = tags.find(kBitsPerSample);
  const std::uint32_t bps = bps_it == tags.end() ? 1 : bps_it->second.front();
  if (bps != 32) unsupported(std::to_string(bps) + "-bit samples");
  if (single(kCompression, 1) != 1) unsupported("compressed data");
  const std::uint32_t format = single(kSampleFormat, kSampleUnsigned);
  if (format != want_format) unsupported("sample format " + std::to_string(format));

  const std::uint64_t row_bytes = static_cast<std::uint64_t>(width) * 4;
  if (row_bytes * height > max_payload_bytes) parse_fail("image exceeds the size cap");
  const std::uint32_t rows_per_strip = std::min(single(kRowsPerStrip, height), height);
  if (rows_per_strip == 0) parse_fail("RowsPerStrip is zero");
  const auto offsets_it = tags.find(kStripOffsets);
  const auto counts_it = tags.find(kStripByteCounts);
  if (offsets_it == tags.end() || counts_it == tags.end()) parse_fail("missing strip tables");
  const std::uint64_t strips = (height + rows_per_strip - 1) / rows_per_strip;
  if (offsets_it->second.size() < strips || counts_it->second.size() < strips) parse_fail("strip tables too short");

  Decoded out;
  out.width = static_cast<int>(width);
  out.height = static_cast<int>(height);
  out.words.resize(static_cast<std::size_t>(width) * height);
  auto* dst = reinterpret_cast<char*>(out.words.data());
  for (std::uint64_t s = 0; s < strips; ++s) {
    const std::uint64_t first_row = s * rows_per_strip;
    const std::uint64_t strip_rows = std::min<std::uint64_t>(rows_per_strip, height - first_row);
    const std::uint64_t need = strip_rows * row_bytes;
    const std::uint64_t offset = offsets_it->second[s];
    if (counts_it->second[s] < need || offset + need > r.size()) parse_fail("strip " + std::to_string(s) + " is truncated");
    std::memcpy(dst + first_row * row_bytes, r.data() + offset, need);
  }
  const bool swap = r.big_endian() != (std::endian::native == std::endian::big);
  if (swap) {
    for (std::uint32_t& w : out.words) w = ((w & 0xFFu) << 24) | ((w & 0xFF00u) << 8) | ((w >> 8) & 0xFF00u) | (w >> 24);
  }
  return out;
}

}  // namespace

std::string encode_mask_tiff(const MultiLabelMask2D& mask) {
  return encode(mask.width, mask.height, kSampleUnsigned, mask.pixels);
}

MultiLabelMask2D decode_mask_tiff(std::string_view bytes, bool validate, std::uint64_t max_payload_bytes) {
  Decoded d = decode(bytes, kSampleUnsigned, max_payload_bytes);
  MultiLabelMask2D mask;
  mask.width = d.width;
  mask.height = d.height;
  mask.pixels = std::move(d.words);
  if (validate) validate_labels(mask);
  return mask;
}

void write_mask_tiff(const MultiLabelMask2D& mask, const std::filesystem::path& path) {
  write_file_atomic(path, encode_mask_tiff(mask));
}

MultiLabelMask2D read_mask_tiff(const std::filesystem::path& path, bool validate, std::uint64_t max_payload_bytes) {
  return decode_mask_tiff(read_file(path), validate, max_payload_bytes);
}

std::string encode_image_tiff(const ProjectionImage& image) {
  std::vector<std::uint32_t> words(image.values.size());
  for (std::size_t i = 0; i < words.size(); ++i) words[i] = std::bit_cast<std::uint32_t>(static_cast<float>(image.values[i]));
  return encode(image.width, image.height, kSampleFloat, words);
}

ProjectionImage decode_image_tiff(std::string_view bytes, std::uint64_t max_payload_bytes) {
  const Decoded d = decode(bytes, kSampleFloat, max_payload_bytes);
  ProjectionImage image(d.width, d.height);
  for (std::size_t i = 0; i < d.words.size(); ++i) image.values[i] = std::bit_cast<float>(d.words[i]);
  return image;
}

void write_image_tiff(const ProjectionImage& image, const std::filesystem::path& path) {
  write_file_atomic(path, encode_image_tiff(image));
}

ProjectionImage read_image_tiff(const std::filesystem::path& path, std::uint64_t max_payload_bytes) {
  return decode_image_tiff(read_file(path), max_payload_bytes);
}

}  // namespace fracbench::io
