#include <doctest.h>

#include <bit>
#include <cstring>
#include <fstream>

#include "motionseg/io.hpp"
#include "support.hpp"

using namespace motionseg;

namespace {

void write_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void append_f32(std::vector<unsigned char>& b, float f) {
  const auto u = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>(u >> (8 * i)));
}

void append_i32(std::vector<unsigned char>& b, std::int32_t v) {
  const auto u = static_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>(u >> (8 * i)));
}

std::vector<unsigned char> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("read_flo decodes a hand-built 2x1 file") {
  testing::TempDir dir("flo");
  std::vector<unsigned char> b;
  append_f32(b, 202021.25f);
  append_i32(b, 2);
  append_i32(b, 1);
  for (float f : {1.0f, 0.0f, 0.0f, 1.0f}) append_f32(b, f);
  write_bytes(dir / "a.flo", b);
  const auto f = read_flo(dir / "a.flo");
  CHECK(f.width() == 2);
  CHECK(f.height() == 1);
  CHECK(f.u()(0, 0) == 1.0f);
  CHECK(f.u()(1, 0) == 0.0f);
  CHECK(f.v()(0, 0) == 0.0f);
  CHECK(f.v()(1, 0) == 1.0f);
}

TEST_CASE("zero payload gives zero field") {
  testing::TempDir dir("flo");
  std::vector<unsigned char> b;
  append_f32(b, 202021.25f);
  append_i32(b, 3);
  append_i32(b, 2);
  for (int i = 0; i < 12; ++i) append_f32(b, 0.0f);
  write_bytes(dir / "z.flo", b);
  const auto f = read_flo(dir / "z.flo");
  for (float x : f.u().values()) CHECK(x == 0.0f);
  for (float x : f.v().values()) CHECK(x == 0.0f);
}

TEST_CASE("write_flo of a 1x1 field is 16 bytes") {
  testing::TempDir dir("flo");
  write_flo(testing::uniform_flow(1, 1, 3.5f, -2.0f), dir / "one.flo");
  std::vector<unsigned char> expect;
  append_f32(expect, 202021.25f);
  append_i32(expect, 1);
  append_i32(expect, 1);
  append_f32(expect, 3.5f);
  append_f32(expect, -2.0f);
  CHECK(read_bytes(dir / "one.flo") == expect);
}

TEST_CASE("flo round trip is bit-identical") {
  testing::TempDir dir("flo");
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const auto f = testing::random_flow(rng, 1 + t % 7, 1 + t % 5, 100.0);
    write_flo(f, dir / "r.flo");
    CHECK(read_flo(dir / "r.flo") == f);
  }
}

TEST_CASE("read_flo rejects bad files") {
  testing::TempDir dir("flo");
  std::vector<unsigned char> b;
  append_f32(b, 1.0f);
  append_i32(b, 1);
  append_i32(b, 1);
  append_f32(b, 0.0f);
  append_f32(b, 0.0f);
  write_bytes(dir / "magic.flo", b);
  CHECK_THROWS_WITH_AS(read_flo(dir / "magic.flo"), doctest::Contains("BadMagic"), Error);

  std::vector<unsigned char> t;
  append_f32(t, 202021.25f);
  append_i32(t, 4);
  append_i32(t, 4);
  append_f32(t, 1.0f);
  write_bytes(dir / "trunc.flo", t);
  try {
    read_flo(dir / "trunc.flo");
    FAIL("expected TruncatedFile");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TruncatedFile);
  }

  std::vector<unsigned char> n;
  append_f32(n, 202021.25f);
  append_i32(n, 1);
  append_i32(n, 1);
  append_f32(n, std::numeric_limits<float>::quiet_NaN());
  append_f32(n, 0.0f);
  write_bytes(dir / "nan.flo", n);
  try {
    read_flo(dir / "nan.flo");
    FAIL("expected NonFinite");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFinite);
  }
}

TEST_CASE("write_flo to an empty or unwritable path fails with IoError") {
  const auto f = testing::uniform_flow(2, 2, 0, 0);
  try {
    write_flo(f, "");
    FAIL("expected IoError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IoError);
  }
  try {
    write_flo(f, "/nonexistent_dir_for_tests/x.flo");
    FAIL("expected IoError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IoError);
  }
}

TEST_CASE("label maps relabel to a contiguous range") {
  const auto m = testing::labels(4, 1, {0, 7, 7, 42});
  CHECK(m.instance_count() == 2);
  CHECK(m[0] == 0);
  CHECK(m[1] == 1);
  CHECK(m[2] == 1);
  CHECK(m[3] == 2);
  CHECK(testing::labels(3, 3, std::vector<std::uint32_t>(9, 0)).instance_count() == 0);
}

TEST_CASE("label map PGM round trip") {
  testing::TempDir dir("pgm");
  std::mt19937_64 rng(11);
  for (int t = 0; t < 20; ++t) {
    const auto m = testing::random_labels(rng, 3 + t, 2 + t % 4, 10);
    write_label_map(m, dir / "m.pgm");
    CHECK(read_label_map(dir / "m.pgm") == m);
  }
}

TEST_CASE("label map PGM depth and size limits") {
  testing::TempDir dir("pgm");
  {
    std::ofstream out(dir / "bad.pgm", std::ios::binary);
    out << "P5\n2 1\n70000\n";
    out.write("\0\0\0\0\0\0", 6);
  }
  try {
    read_label_map(dir / "bad.pgm");
    FAIL("expected UnsupportedDepth");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnsupportedDepth);
  }
  Grid<std::uint32_t> raw(300, 300, 0);
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = static_cast<std::uint32_t>(i + 1);
  try {
    write_label_map(LabelMap::from_raw(raw), dir / "many.pgm");
    FAIL("expected TooManyInstances");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooManyInstances);
  }
}

TEST_CASE("binary mask round trip") {
  testing::TempDir dir("mask");
  const auto m = testing::mask(3, 2, {1, 0, 1, 0, 0, 1});
  write_binary_mask(m, dir / "m.pgm");
  CHECK(read_binary_mask(dir / "m.pgm") == m);
}

TEST_CASE("planar flow interface") {
  const std::vector<float> planar{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  const auto f = FlowField::from_planar(planar, 3, 2);
  CHECK(f.u()(2, 1) == 6.0f);
  CHECK(f.v()(0, 0) == 7.0f);
  CHECK(f.to_planar() == planar);
  std::vector<float> bad = planar;
  bad[4] = std::numeric_limits<float>::infinity();
  CHECK_THROWS_AS(FlowField::from_planar(bad, 3, 2), Error);
  CHECK_THROWS_AS(FlowField::from_planar(planar, 4, 2), Error);
}

TEST_CASE("from_masks rejects overlap") {
  std::vector<BinaryMask> masks{testing::mask(2, 1, {1, 1}), testing::mask(2, 1, {0, 1})};
  CHECK_THROWS_AS(LabelMap::from_masks(masks, 2, 1), Error);
}
