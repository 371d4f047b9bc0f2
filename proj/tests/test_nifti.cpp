#include <doctest.h>

#include <cstring>
#include <fstream>

#include "ctphase/errors.hpp"
#include "ctphase/nifti.hpp"
#include "ctphase/rng.hpp"
#include "test_util.hpp"

using namespace ctphase;
using ctphase::testing::TempDir;

namespace {

Volume3D make_volume(Dims dims, float fill) {
  Volume3D v;
  v.dims = dims;
  v.spacing = {1.0, 1.5, 2.0};
  v.values.assign(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], fill);
  return v;
}

// Hand-built single-file NIfTI-1 with int16 payload and a rescale.
void write_raw_int16(const std::string& path, int nx, int ny, int nz,
                     std::int16_t value, float slope, float inter,
                     bool big_endian = false) {
  std::vector<std::uint8_t> bytes(352 + static_cast<std::size_t>(nx) * ny * nz * 2, 0);
  auto put16 = [&](std::size_t off, std::int16_t v) {
    std::uint8_t lo = static_cast<std::uint8_t>(v & 0xff);
    std::uint8_t hi = static_cast<std::uint8_t>((v >> 8) & 0xff);
    if (big_endian) std::swap(lo, hi);
    bytes[off] = lo;
    bytes[off + 1] = hi;
  };
  auto put32 = [&](std::size_t off, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) {
      bytes[off + (big_endian ? 3 - b : b)] = static_cast<std::uint8_t>((v >> (8 * b)) & 0xff);
    }
  };
  auto putf = [&](std::size_t off, float f) {
    std::uint32_t raw;
    std::memcpy(&raw, &f, 4);
    put32(off, raw);
  };
  put32(0, 348);                       // sizeof_hdr
  put16(40, 3);                        // dim[0]
  put16(42, static_cast<std::int16_t>(nx));
  put16(44, static_cast<std::int16_t>(ny));
  put16(46, static_cast<std::int16_t>(nz));
  for (std::size_t d = 4; d < 8; ++d) put16(40 + 2 * d, 1);
  put16(70, 4);                        // datatype int16
  put16(72, 16);                       // bitpix
  putf(76, 1.0f);                      // pixdim[0]
  putf(80, 1.0f);
  putf(84, 1.0f);
  putf(88, 1.0f);
  putf(108, 352.0f);                   // vox_offset
  putf(112, slope);
  putf(116, inter);
  bytes[344] = 'n';
  bytes[345] = '+';
  bytes[346] = '1';
  for (std::size_t i = 0; i < static_cast<std::size_t>(nx) * ny * nz; ++i) {
    put16(352 + 2 * i, value);
  }
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("constant volume round-trips through plain and gzip files") {
  TempDir dir;
  const Volume3D v = make_volume({4, 4, 4}, -1000.0f);

  for (const char* name : {"vol.nii", "vol.nii.gz"}) {
    const std::string path = dir.file(name);
    save_volume(v, path);
    const Volume3D back = load_volume(path);
    CHECK(back.dims == v.dims);
    CHECK(back.spacing[0] == doctest::Approx(1.0));
    CHECK(back.spacing[1] == doctest::Approx(1.5));
    CHECK(back.spacing[2] == doctest::Approx(2.0));
    for (const float x : back.values) CHECK(x == -1000.0f);
  }
}

TEST_CASE("noisy volume round-trips bit-for-bit") {
  TempDir dir;
  Volume3D v = make_volume({5, 3, 2}, 0.0f);
  RandomStream stream(9);
  for (auto& x : v.values) x = static_cast<float>(stream.uniform(-1000.0, 2000.0));

  save_volume(v, dir.file("v.nii.gz"));
  const Volume3D back = load_volume(dir.file("v.nii.gz"));
  REQUIRE(back.values.size() == v.values.size());
  for (std::size_t i = 0; i < v.values.size(); ++i) {
    CHECK(std::memcmp(&back.values[i], &v.values[i], 4) == 0);
  }
}

TEST_CASE("slope and intercept rescale integer payloads into HU") {
  TempDir dir;
  write_raw_int16(dir.file("scaled.nii"), 2, 2, 2, 512, 2.0f, -1024.0f);
  const Volume3D v = load_volume(dir.file("scaled.nii"));
  for (const float x : v.values) CHECK(x == 0.0f);
}

TEST_CASE("slope zero means no rescale") {
  TempDir dir;
  write_raw_int16(dir.file("raw.nii"), 2, 2, 2, 37, 0.0f, 5.0f);
  const Volume3D v = load_volume(dir.file("raw.nii"));
  for (const float x : v.values) CHECK(x == 37.0f);
}

TEST_CASE("byte-swapped files are decoded via the header byte order") {
  TempDir dir;
  write_raw_int16(dir.file("be.nii"), 3, 2, 2, -64, 1.0f, 0.0f, /*big_endian=*/true);
  const Volume3D v = load_volume(dir.file("be.nii"));
  CHECK(v.dims == Dims{3, 2, 2});
  for (const float x : v.values) CHECK(x == -64.0f);
}

TEST_CASE("label map round-trips and rejects float payloads") {
  TempDir dir;
  LabelMap m;
  m.dims = {4, 4, 4};
  m.labels.assign(64, 0);
  m.labels[3] = 1;
  m.labels[40] = 5;
  save_labelmap(m, dir.file("m.nii.gz"));
  const LabelMap back = load_labelmap(dir.file("m.nii.gz"));
  CHECK(back.labels == m.labels);

  save_volume(make_volume({2, 2, 2}, 1.5f), dir.file("float.nii"));
  CHECK_THROWS_AS(load_labelmap(dir.file("float.nii")), DataError);
}

TEST_CASE("load rejects missing, truncated, and non-NIfTI files") {
  TempDir dir;
  CHECK_THROWS_AS(load_volume(dir.file("missing.nii")), DataError);

  std::ofstream(dir.file("junk.nii"), std::ios::binary) << "not a nifti at all";
  CHECK_THROWS_AS(load_volume(dir.file("junk.nii")), DataError);

  save_volume(make_volume({4, 4, 4}, 1.0f), dir.file("short.nii"));
  auto bytes = ctphase::testing::read_bytes(dir.file("short.nii"));
  bytes.resize(bytes.size() - 64);
  std::ofstream(dir.file("short.nii"), std::ios::binary)
      .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  CHECK_THROWS_AS(load_volume(dir.file("short.nii")), DataError);
}

TEST_CASE("load rejects non-3D images and unsupported datatypes") {
  TempDir dir;
  write_raw_int16(dir.file("2d.nii"), 4, 4, 1, 0, 1.0f, 0.0f);
  // Patch dim[0] to 2.
  auto bytes = ctphase::testing::read_bytes(dir.file("2d.nii"));
  bytes[40] = 2;
  std::ofstream(dir.file("2d.nii"), std::ios::binary)
      .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  CHECK_THROWS_AS(load_volume(dir.file("2d.nii")), DataError);

  write_raw_int16(dir.file("odd.nii"), 2, 2, 2, 0, 1.0f, 0.0f);
  bytes = ctphase::testing::read_bytes(dir.file("odd.nii"));
  bytes[70] = 32;  // DT_COMPLEX64
  std::ofstream(dir.file("odd.nii"), std::ios::binary)
      .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  CHECK_THROWS_AS(load_volume(dir.file("odd.nii")), DataError);
}

TEST_CASE("check_grid accepts equal dims and rejects mismatches") {
  const Volume3D v = make_volume({4, 4, 4}, 0.0f);
  LabelMap ok;
  ok.dims = {4, 4, 4};
  ok.labels.assign(64, 0);
  CHECK_NOTHROW(check_grid(v, ok));

  LabelMap bad;
  bad.dims = {4, 4, 5};
  bad.labels.assign(80, 0);
  CHECK_THROWS_AS(check_grid(v, bad), DataError);
}
