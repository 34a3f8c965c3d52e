#include "motionseg/io.hpp"

#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace motionseg {
namespace {

namespace fs = std::filesystem;

std::vector<unsigned char> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const fs::path& path, const std::vector<unsigned char>& bytes) {
  if (path.empty()) throw Error(ErrorCode::IoError, "empty output path");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::uint32_t load_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void store_u32_le(std::vector<unsigned char>& out, std::uint32_t value) {
  for (int shift = 0; shift < 32; shift += 8) {
    out.push_back(static_cast<unsigned char>((value >> shift) & 0xffu));
  }
}

float load_f32_le(const unsigned char* p) { return std::bit_cast<float>(load_u32_le(p)); }
void store_f32_le(std::vector<unsigned char>& out, float value) {
  store_u32_le(out, std::bit_cast<std::uint32_t>(value));
}

struct PgmHeader {
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::size_t data_offset = 0;
};

PgmHeader parse_pgm_header(const std::vector<unsigned char>& bytes, const fs::path& path) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw Error(ErrorCode::BadMagic, path.string() + " is not a binary PGM (P5)");
  }
  std::size_t pos = 2;
  auto next_int = [&]() -> long long {
    // Skip whitespace and '#' comments.
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) {
      throw Error(ErrorCode::TruncatedFile, "malformed PGM header in " + path.string());
    }
    long long value = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      value = value * 10 + (bytes[pos] - '0');
      if (value > (1LL << 31)) {
        throw Error(ErrorCode::TruncatedFile, "PGM header value overflow in " + path.string());
      }
      ++pos;
    }
    return value;
  };
  PgmHeader header;
  header.width = static_cast<int>(next_int());
  header.height = static_cast<int>(next_int());
  const long long maxval = next_int();
  if (maxval < 1 || maxval > 65535) {
    throw Error(ErrorCode::UnsupportedDepth, "PGM maxval out of range in " + path.string());
  }
  header.maxval = static_cast<int>(maxval);
  // Exactly one whitespace byte separates the header from the raster.
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw Error(ErrorCode::TruncatedFile, "missing raster in " + path.string());
  }
  header.data_offset = pos + 1;
  const std::size_t sample_bytes = header.maxval > 255 ? 2 : 1;
  const std::size_t need = static_cast<std::size_t>(header.width) *
                           static_cast<std::size_t>(header.height) * sample_bytes;
  if (bytes.size() - header.data_offset < need) {
    throw Error(ErrorCode::TruncatedFile, "PGM raster shorter than header in " + path.string());
  }
  return header;
}

Grid<std::uint32_t> read_pgm_samples(const fs::path& path) {
  const auto bytes = slurp(path);
  const auto header = parse_pgm_header(bytes, path);
  Grid<std::uint32_t> raw(header.width, header.height, 0);
  const unsigned char* p = bytes.data() + header.data_offset;
  if (header.maxval > 255) {
    for (std::size_t i = 0; i < raw.size(); ++i) {
      raw[i] = (static_cast<std::uint32_t>(p[2 * i]) << 8) | p[2 * i + 1];
    }
  } else {
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = p[i];
  }
  return raw;
}

std::vector<unsigned char> pgm_header_bytes(int width, int height, int maxval) {
  const std::string header =
      "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n" +
      std::to_string(maxval) + "\n";
  return {header.begin(), header.end()};
}

}  // namespace

FlowField read_flo(const fs::path& path) {
  const auto bytes = slurp(path);
  if (bytes.size() < 4) throw Error(ErrorCode::TruncatedFile, path.string() + ": no header");
  if (load_f32_le(bytes.data()) != kFloMagic) {
    throw Error(ErrorCode::BadMagic, path.string() + ": not a Middlebury .flo file");
  }
  if (bytes.size() < 12) throw Error(ErrorCode::TruncatedFile, path.string() + ": short header");
  const auto width = static_cast<std::int32_t>(load_u32_le(bytes.data() + 4));
  const auto height = static_cast<std::int32_t>(load_u32_le(bytes.data() + 8));
  if (width < 1 || height < 1 || width > (1 << 16) || height > (1 << 16)) {
    throw Error(ErrorCode::TruncatedFile, path.string() + ": implausible dimensions");
  }
  const std::size_t pixels = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() - 12 < pixels * 8) {
    throw Error(ErrorCode::TruncatedFile, path.string() + ": payload shorter than header");
  }
  FlowField field(width, height);
  const unsigned char* p = bytes.data() + 12;
  for (std::size_t i = 0; i < pixels; ++i) {
    field.u()[i] = load_f32_le(p + 8 * i);
    field.v()[i] = load_f32_le(p + 8 * i + 4);
  }
  if (!field.all_finite()) {
    throw Error(ErrorCode::NonFinite, path.string() + ": flow contains NaN or Inf");
  }
  return field;
}

void write_flo(const FlowField& field, const fs::path& path) {
  std::vector<unsigned char> bytes;
  bytes.reserve(12 + field.u().size() * 8);
  store_f32_le(bytes, kFloMagic);
  store_u32_le(bytes, static_cast<std::uint32_t>(field.width()));
  store_u32_le(bytes, static_cast<std::uint32_t>(field.height()));
  for (std::size_t i = 0; i < field.u().size(); ++i) {
    store_f32_le(bytes, field.u()[i]);
    store_f32_le(bytes, field.v()[i]);
  }
  dump(path, bytes);
}

LabelMap read_label_map(const fs::path& path) {
  return LabelMap::from_raw(read_pgm_samples(path));
}

void write_label_map(const LabelMap& map, const fs::path& path) {
  if (map.instance_count() > 65535) {
    throw Error(ErrorCode::TooManyInstances, "label map holds more than 65535 instances");
  }
  auto bytes = pgm_header_bytes(map.width(), map.height(), 65535);
  for (std::size_t i = 0; i < map.labels().size(); ++i) {
    const auto id = static_cast<std::uint32_t>(map[i]);
    bytes.push_back(static_cast<unsigned char>(id >> 8));
    bytes.push_back(static_cast<unsigned char>(id & 0xffu));
  }
  dump(path, bytes);
}

BinaryMask read_binary_mask(const fs::path& path) {
  const auto raw = read_pgm_samples(path);
  BinaryMask mask(raw.width(), raw.height(), 0);
  for (std::size_t i = 0; i < raw.size(); ++i) mask[i] = raw[i] != 0 ? 1 : 0;
  return mask;
}

void write_binary_mask(const BinaryMask& mask, const fs::path& path) {
  auto bytes = pgm_header_bytes(mask.width(), mask.height(), 255);
  for (auto b : mask.values()) bytes.push_back(b ? 255 : 0);
  dump(path, bytes);
}

}  // namespace motionseg
