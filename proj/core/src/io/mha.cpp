#include "fracbench/io/mha.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <limits>
#include <optional>
#include <span>
#include <sstream>

#include "fracbench/error.hpp"
#include "fracbench/labels.hpp"

namespace fracbench::io {

const char* to_string(MhaElementType t) {
  switch (t) {
    case MhaElementType::UChar: return "MET_UCHAR";
    case MhaElementType::Short: return "MET_SHORT";
    case MhaElementType::UShort: return "MET_USHORT";
    case MhaElementType::Float: return "MET_FLOAT";
  }
  return "?";
}

std::size_t element_size(MhaElementType t) {
  switch (t) {
    case MhaElementType::UChar: return 1;
    case MhaElementType::Short:
    case MhaElementType::UShort: return 2;
    case MhaElementType::Float: return 4;
  }
  return 0;
}

bool MhaHeader::identity_transform() const {
  static constexpr std::array<double, 9> kIdentity{1, 0, 0, 0, 1, 0, 0, 0, 1};
  return transform == kIdentity;
}

namespace {

[[noreturn]] void parse_fail(const std::string& what) { throw Error(ErrorCode::ParseError, "MHA: " + what); }

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_words(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

template <typename T>
T parse_number(std::string_view word, std::string_view key) {
  T value{};
  const auto res = std::from_chars(word.data(), word.data() + word.size(), value);
  if (res.ec != std::errc{} || res.ptr != word.data() + word.size())
    parse_fail("bad number '" + std::string(word) + "' for " + std::string(key));
  return value;
}

template <typename T, std::size_t N>
std::array<T, N> parse_numbers(std::string_view value, std::string_view key) {
  const auto words = split_words(value);
  if (words.size() != N) parse_fail(std::string(key) + " needs " + std::to_string(N) + " values");
  std::array<T, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = parse_number<T>(words[i], key);
  return out;
}

bool parse_bool(std::string_view value, std::string_view key) {
  if (value == "True" || value == "true" || value == "1") return true;
  if (value == "False" || value == "false" || value == "0") return false;
  parse_fail("bad boolean for " + std::string(key));
}

MhaElementType parse_element_type(std::string_view value) {
  if (value == "MET_UCHAR") return MhaElementType::UChar;
  if (value == "MET_SHORT") return MhaElementType::Short;
  if (value == "MET_USHORT") return MhaElementType::UShort;
  if (value == "MET_FLOAT") return MhaElementType::Float;
  throw Error(ErrorCode::UnsupportedFormat, "MHA: unsupported ElementType " + std::string(value));
}

template <typename T>
std::vector<T> decode_payload(const std::uint8_t* bytes, std::size_t count, bool msb) {
  std::vector<T> out(count);
  std::memcpy(out.data(), bytes, count * sizeof(T));
  if constexpr (sizeof(T) > 1) {
    if (msb != (std::endian::native == std::endian::big)) {
      for (T& v : out) {
        std::array<unsigned char, sizeof(T)> raw;
        std::memcpy(raw.data(), &v, sizeof(T));
        std::reverse(raw.begin(), raw.end());
        std::memcpy(&v, raw.data(), sizeof(T));
      }
    }
  }
  return out;
}

std::string inflate_exact(std::string_view compressed, std::size_t expected) {
  std::string out(expected, '\0');
  z_stream zs{};
  if (inflateInit(&zs) != Z_OK) parse_fail("zlib init failed");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(compressed.data()));
  std::size_t in_left = compressed.size();
  std::size_t out_done = 0;
  int rc = Z_OK;
  constexpr std::size_t kChunk = std::size_t{1} << 30;
  while (true) {
    if (zs.avail_in == 0 && in_left > 0) {
      zs.avail_in = static_cast<uInt>(std::min(in_left, kChunk));
      in_left -= zs.avail_in;
    }
    if (zs.avail_out == 0 && out_done < expected) {
      zs.next_out = reinterpret_cast<Bytef*>(out.data() + out_done);
      zs.avail_out = static_cast<uInt>(std::min(expected - out_done, kChunk));
      out_done += zs.avail_out;
    }
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc == Z_OK) continue;
    const bool refillable = (zs.avail_in == 0 && in_left > 0) || (zs.avail_out == 0 && out_done < expected);
    if (rc == Z_BUF_ERROR && refillable) continue;
    break;
  }
  const bool complete = rc == Z_STREAM_END && zs.total_out == expected;
  inflateEnd(&zs);
  if (!complete) parse_fail("compressed payload does not inflate to the declared size");
  return out;
}

std::string deflate_all(std::string_view raw) {
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::string out(bound, '\0');
  const int rc = compress2(reinterpret_cast<Bytef*>(out.data()), &bound,
                           reinterpret_cast<const Bytef*>(raw.data()), static_cast<uLong>(raw.size()), 6);
  if (rc != Z_OK) throw Error(ErrorCode::IoError, "MHA: zlib compression failed");
  out.resize(bound);
  return out;
}

std::string join_numbers(std::span<const double> values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ' ';
    s += format_exact(values[i]);
  }
  return s;
}

}  // namespace

MhaImage parse_mha(std::string_view bytes, const MhaReadOptions& options) {
  MhaImage image;
  MhaHeader& h = image.header;
  bool have_ndims = false, have_dims = false, have_type = false, msb = false;
  std::optional<std::uint64_t> compressed_size;
  std::size_t pos = 0;
  bool found_data = false;
  while (pos < bytes.size()) {
    const std::size_t eol = bytes.find('\n', pos);
    if (eol == std::string_view::npos) parse_fail("header is not terminated by ElementDataFile");
    const std::string_view line = trim(bytes.substr(pos, eol - pos));
    pos = eol + 1;
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) parse_fail("header line without '=': " + std::string(line.substr(0, 64)));
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key.empty()) parse_fail("empty header key");

    if (key == "ObjectType") {
      if (value != "Image") throw Error(ErrorCode::UnsupportedFormat, "MHA: ObjectType " + std::string(value));
    } else if (key == "NDims") {
      if (parse_number<int>(value, key) != 3)
        throw Error(ErrorCode::UnsupportedFormat, "MHA: only 3-dimensional images are supported");
      have_ndims = true;
    } else if (key == "DimSize") {
      h.dims = parse_numbers<int, 3>(value, key);
      have_dims = true;
    } else if (key == "ElementSpacing" || key == "ElementSize") {
      const auto s = parse_numbers<double, 3>(value, key);
      h.spacing = {s[0], s[1], s[2]};
    } else if (key == "Offset" || key == "Origin" || key == "Position") {
      const auto s = parse_numbers<double, 3>(value, key);
      h.offset = {s[0], s[1], s[2]};
    } else if (key == "TransformMatrix" || key == "Rotation" || key == "Orientation") {
      h.transform = parse_numbers<double, 9>(value, key);
    } else if (key == "ElementType") {
      h.element_type = parse_element_type(value);
      have_type = true;
    } else if (key == "CompressedData") {
      h.compressed = parse_bool(value, key);
    } else if (key == "CompressedDataSize") {
      compressed_size = parse_number<std::uint64_t>(value, key);
    } else if (key == "BinaryDataByteOrderMSB" || key == "ElementByteOrderMSB") {
      msb = parse_bool(value, key);
    } else if (key == "BinaryData") {
      if (!parse_bool(value, key)) throw Error(ErrorCode::UnsupportedFormat, "MHA: ASCII data is not supported");
    } else if (key == "ElementNumberOfChannels") {
      if (parse_number<int>(value, key) != 1)
        throw Error(ErrorCode::UnsupportedFormat, "MHA: multi-channel images are not supported");
    } else if (key == "HeaderSize") {
      if (parse_number<long>(value, key) != 0)
        throw Error(ErrorCode::UnsupportedFormat, "MHA: HeaderSize is not supported");
    } else if (key == "ElementDataFile") {
      if (value != "LOCAL")
        throw Error(ErrorCode::UnsupportedFormat, "MHA: external data file " + std::string(value));
      found_data = true;
      break;
    } else {
      h.extra.emplace_back(std::string(key), std::string(value));
    }
  }
  if (!found_data) parse_fail("missing ElementDataFile");
  if (!have_ndims || !have_dims || !have_type) parse_fail("NDims, DimSize and ElementType are required");
  for (int a = 0; a < 3; ++a) {
    if (h.dims[a] <= 0) parse_fail("DimSize must be positive");
    if (!(h.spacing[a] > 0.0)) parse_fail("ElementSpacing must be positive");
  }

  const std::uint64_t count = static_cast<std::uint64_t>(h.dims[0]) * static_cast<std::uint64_t>(h.dims[1]) *
                              static_cast<std::uint64_t>(h.dims[2]);
  const std::uint64_t esz = element_size(h.element_type);
  if (count > options.max_payload_bytes / esz)
    parse_fail("payload of " + std::to_string(count) + " elements exceeds the size cap");
  const std::size_t payload = static_cast<std::size_t>(count * esz);

  std::string_view data = bytes.substr(pos);
  std::string inflated;
  if (h.compressed) {
    if (compressed_size) {
      if (*compressed_size > data.size()) parse_fail("compressed payload is truncated");
      data = data.substr(0, static_cast<std::size_t>(*compressed_size));
    }
    inflated = inflate_exact(data, payload);
    data = inflated;
  } else if (data.size() < payload) {
    parse_fail("payload is truncated");
  }

  const auto* raw = reinterpret_cast<const std::uint8_t*>(data.data());
  const auto n = static_cast<std::size_t>(count);
  switch (h.element_type) {
    case MhaElementType::UChar: image.voxels = decode_payload<std::uint8_t>(raw, n, msb); break;
    case MhaElementType::Short: image.voxels = decode_payload<std::int16_t>(raw, n, msb); break;
    case MhaElementType::UShort: image.voxels = decode_payload<std::uint16_t>(raw, n, msb); break;
    case MhaElementType::Float: image.voxels = decode_payload<float>(raw, n, msb); break;
  }
  return image;
}

MhaImage read_mha_image(const std::filesystem::path& path, const MhaReadOptions& options) {
  return parse_mha(read_file(path), options);
}

std::string serialize_mha(const MhaImage& image, bool compress) {
  const MhaHeader& h = image.header;
  std::string payload = std::visit(
      [](const auto& v) {
        using T = typename std::decay_t<decltype(v)>::value_type;
        std::string out(v.size() * sizeof(T), '\0');
        std::memcpy(out.data(), v.data(), out.size());
        if constexpr (sizeof(T) > 1 && std::endian::native == std::endian::big) {
          for (std::size_t i = 0; i < out.size(); i += sizeof(T)) std::reverse(out.begin() + i, out.begin() + i + sizeof(T));
        }
        return out;
      },
      image.voxels);
  if (payload.size() != h.grid().size() * element_size(h.element_type))
    throw Error(ErrorCode::InvalidArgument, "MHA: voxel count does not match DimSize");
  if (compress) payload = deflate_all(payload);

  std::ostringstream os;
  os << "ObjectType = Image\n";
  os << "NDims = 3\n";
  os << "BinaryData = True\n";
  os << "BinaryDataByteOrderMSB = False\n";
  os << "CompressedData = " << (compress ? "True" : "False") << '\n';
  if (compress) os << "CompressedDataSize = " << payload.size() << '\n';
  os << "TransformMatrix = " << join_numbers(h.transform) << '\n';
  const std::array<double, 3> offset{h.offset.x, h.offset.y, h.offset.z};
  const std::array<double, 3> spacing{h.spacing.x, h.spacing.y, h.spacing.z};
  os << "Offset = " << join_numbers(offset) << '\n';
  os << "ElementSpacing = " << join_numbers(spacing) << '\n';
  os << "DimSize = " << h.dims[0] << ' ' << h.dims[1] << ' ' << h.dims[2] << '\n';
  for (const auto& [key, value] : h.extra) os << key << " = " << value << '\n';
  os << "ElementType = " << to_string(h.element_type) << '\n';
  os << "ElementDataFile = LOCAL\n";
  std::string out = os.str();
  out += payload;
  return out;
}

void write_mha_image(const MhaImage& image, const std::filesystem::path& path, bool compress) {
  write_file_atomic(path, serialize_mha(image, compress));
}

namespace {

MhaImage checked_image(const std::filesystem::path& path, const MhaReadOptions& options) {
  MhaImage image = read_mha_image(path, options);
  if (!image.header.identity_transform())
    throw Error(ErrorCode::UnsupportedFormat, "MHA: non-identity TransformMatrix in " + path.string());
  return image;
}

MhaImage wrap(const Grid3& grid, MhaVoxels voxels, MhaElementType type) {
  MhaImage image;
  image.header.dims = grid.dims;
  image.header.spacing = grid.spacing;
  image.header.offset = grid.offset;
  image.header.element_type = type;
  image.voxels = std::move(voxels);
  return image;
}

}  // namespace

IntensityVolume read_mha_intensity(const std::filesystem::path& path, const MhaReadOptions& options) {
  MhaImage image = checked_image(path, options);
  IntensityVolume out;
  out.grid = image.header.grid();
  std::visit(
      [&](auto& v) {
        using T = typename std::decay_t<decltype(v)>::value_type;
        if constexpr (std::is_same_v<T, float>) {
          out.voxels = std::move(v);
        } else {
          out.voxels.assign(v.begin(), v.end());
        }
      },
      image.voxels);
  return out;
}

LabelVolume read_mha_labels(const std::filesystem::path& path, const MhaReadOptions& options) {
  MhaImage image = checked_image(path, options);
  LabelVolume out;
  out.grid = image.header.grid();
  std::visit(
      [&](auto& v) {
        using T = typename std::decay_t<decltype(v)>::value_type;
        if constexpr (std::is_same_v<T, float>) {
          throw Error(ErrorCode::UnsupportedFormat, "MHA: label volumes need an integer ElementType");
        } else if constexpr (std::is_same_v<T, std::uint8_t>) {
          out.voxels = std::move(v);
        } else {
          out.voxels.resize(v.size());
          for (std::size_t i = 0; i < v.size(); ++i) {
            if (v[i] < 0 || v[i] > 255) throw Error(ErrorCode::InvalidLabel, "MHA: label value out of range");
            out.voxels[i] = static_cast<std::uint8_t>(v[i]);
          }
        }
      },
      image.voxels);
  if (options.validate_labels) validate_labels(out);
  return out;
}

void write_mha(const IntensityVolume& volume, const std::filesystem::path& path, bool compress) {
  write_mha_image(wrap(volume.grid, volume.voxels, MhaElementType::Float), path, compress);
}

void write_mha(const LabelVolume& volume, const std::filesystem::path& path, bool compress) {
  write_mha_image(wrap(volume.grid, volume.voxels, MhaElementType::UChar), path, compress);
}

}  // namespace fracbench::io
