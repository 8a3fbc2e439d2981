#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "pnidiff/nifti.hpp"

using namespace pnidiff;
namespace fs = std::filesystem;

namespace {

fs::path tmpdir() {
  auto d = fs::temp_directory_path() / "pnidiff_nifti_tests";
  fs::create_directories(d);
  return d;
}

std::vector<uint8_t> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::vector<uint8_t>((std::istreambuf_iterator<char>(in)),
                              std::istreambuf_iterator<char>());
}

void spit(const fs::path& p, const std::vector<uint8_t>& b) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

Volume make_float_volume(Shape shp, uint64_t seed) {
  Rng r(seed);
  Volume v;
  v.grid = Grid(shp);
  // keep values float32-representable so round trips are bit-exact
  for (auto& x : v.grid.data) x = static_cast<double>(static_cast<float>(r.normal()));
  return v;
}

}  // namespace

TEST_CASE("round-trip: float32 volume is bit-exact") {
  auto path = (tmpdir() / "rt_f32.nii").string();
  Volume v = make_float_volume({4, 4, 4}, 21);
  v.spacing = {1.5, 1.5, 3.0};
  v.origin = {-10.0, 4.0, 2.5};
  write_volume(v, path);
  Volume back = read_volume(path);
  CHECK(bit_equal(back.grid, v.grid));
  CHECK(back.spacing == v.spacing);
  CHECK(back.origin[0] == doctest::Approx(-10.0));
}

TEST_CASE("round-trip: uint8 label map and int16 volume") {
  auto dir = tmpdir();
  LabelMap l;
  l.grid = Grid({3, 3, 2});
  Rng r(22);
  for (auto& x : l.grid.data) x = static_cast<double>(r.uniform_int(0, 2));
  write_labels(l, (dir / "rt_u8.nii").string());
  LabelMap lb = read_labels((dir / "rt_u8.nii").string());
  CHECK(bit_equal(lb.grid, l.grid));

  Volume v;
  v.grid = Grid({2, 3, 4});
  for (auto& x : v.grid.data) x = static_cast<double>(r.uniform_int(-500, 500));
  write_volume(v, (dir / "rt_i16.nii").string(), NiftiDatatype::Int16);
  Volume vb = read_volume((dir / "rt_i16.nii").string());
  CHECK(bit_equal(vb.grid, v.grid));
}

TEST_CASE("round-trip through gzip container") {
  auto path = (tmpdir() / "rt.nii.gz").string();
  Volume v = make_float_volume({5, 4, 3}, 23);
  write_volume(v, path);
  auto bytes = slurp(path);
  REQUIRE(bytes.size() >= 2);
  CHECK(bytes[0] == 0x1f);  // actually gzip on disk
  CHECK(bytes[1] == 0x8b);
  Volume back = read_volume(path);
  CHECK(bit_equal(back.grid, v.grid));
}

TEST_CASE("orientation fields pass through a read-write cycle") {
  auto dir = tmpdir();
  Volume v = make_float_volume({2, 2, 2}, 24);
  v.orient.qform_code = 1;
  v.orient.sform_code = 2;
  v.orient.quatern = {0.1f, 0.2f, 0.3f};
  for (int i = 0; i < 12; ++i) v.orient.srow[static_cast<size_t>(i)] = static_cast<float>(i) * 0.5f;
  write_volume(v, (dir / "orient.nii").string());
  Volume a = read_volume((dir / "orient.nii").string());
  write_volume(a, (dir / "orient2.nii").string());
  Volume b = read_volume((dir / "orient2.nii").string());
  CHECK(b.orient.qform_code == 1);
  CHECK(b.orient.sform_code == 2);
  CHECK(b.orient.quatern == v.orient.quatern);
  CHECK(b.orient.srow == v.orient.srow);
}

TEST_CASE("scl_slope/scl_inter honored; slope 0 means identity") {
  auto dir = tmpdir();
  Volume v;
  v.grid = Grid({2, 2, 2}, 3.0);
  write_volume(v, (dir / "scaled.nii").string(), NiftiDatatype::Int16);

  auto bytes = slurp(dir / "scaled.nii");
  float slope = 2.0f, inter = 1.0f;
  std::memcpy(&bytes[112], &slope, 4);
  std::memcpy(&bytes[116], &inter, 4);
  spit(dir / "scaled.nii", bytes);

  Volume scaled = read_volume((dir / "scaled.nii").string());
  for (double x : scaled.grid.data) CHECK(x == doctest::Approx(7.0));  // 3*2 + 1

  // slope exactly 0: stored values verbatim
  slope = 0.0f;
  inter = 99.0f;
  std::memcpy(&bytes[112], &slope, 4);
  std::memcpy(&bytes[116], &inter, 4);
  spit(dir / "scaled.nii", bytes);
  Volume verbatim = read_volume((dir / "scaled.nii").string());
  for (double x : verbatim.grid.data) CHECK(x == 3.0);
}

TEST_CASE("big-endian header accepted via dim[0] sanity check") {
  auto dir = tmpdir();
  Volume v;
  v.grid = Grid({2, 2, 2});
  for (int64_t i = 0; i < 8; ++i) v.grid[i] = static_cast<double>(i - 3);
  write_volume(v, (dir / "le.nii").string(), NiftiDatatype::Int16);
  auto bytes = slurp(dir / "le.nii");

  auto swap16 = [&](size_t off) { std::swap(bytes[off], bytes[off + 1]); };
  auto swap32 = [&](size_t off) {
    std::swap(bytes[off], bytes[off + 3]);
    std::swap(bytes[off + 1], bytes[off + 2]);
  };
  swap32(0);                                       // sizeof_hdr
  for (size_t i = 0; i < 8; ++i) swap16(40 + 2 * i);  // dim
  swap16(70);
  swap16(72);
  for (size_t i = 0; i < 8; ++i) swap32(76 + 4 * i);  // pixdim
  swap32(108);                                        // vox_offset
  swap32(112);
  swap32(116);
  swap16(252);
  swap16(254);
  for (size_t i = 0; i < 18; ++i) swap32(256 + 4 * i);  // quatern/qoffset/srow
  for (size_t i = 352; i + 1 < bytes.size(); i += 2) std::swap(bytes[i], bytes[i + 1]);
  spit(dir / "be.nii", bytes);

  Volume be = read_volume((dir / "be.nii").string());
  CHECK(bit_equal(be.grid, v.grid));
}

TEST_CASE("forced error paths report offsets and reasons") {
  auto dir = tmpdir();
  Volume v = make_float_volume({4, 4, 4}, 25);
  write_volume(v, (dir / "err.nii").string());
  auto bytes = slurp(dir / "err.nii");

  SUBCASE("file truncated at byte 200") {
    auto cut = bytes;
    cut.resize(200);
    spit(dir / "trunc.nii", cut);
    try {
      read_volume((dir / "trunc.nii").string());
      FAIL("expected NiftiError");
    } catch (const NiftiError& e) {
      CHECK(e.offset() == 200);
      CHECK(std::string(e.what()).find("200") != std::string::npos);
    }
  }

  SUBCASE("truncated voxel data reports file size") {
    auto cut = bytes;
    cut.resize(400);
    spit(dir / "trunc2.nii", cut);
    try {
      read_volume((dir / "trunc2.nii").string());
      FAIL("expected NiftiError");
    } catch (const NiftiError& e) {
      CHECK(e.offset() == 400);
    }
  }

  SUBCASE("bad magic") {
    auto bad = bytes;
    std::memcpy(&bad[344], "xxx", 4);
    spit(dir / "badmagic.nii", bad);
    CHECK_THROWS_WITH_AS(read_volume((dir / "badmagic.nii").string()),
                         doctest::Contains("magic"), NiftiError);
  }

  SUBCASE("unsupported datatype is an explicit unsupported-feature error") {
    auto bad = bytes;
    int16_t dt = 64;  // float64: unsupported
    std::memcpy(&bad[70], &dt, 2);
    spit(dir / "baddt.nii", bad);
    CHECK_THROWS_WITH_AS(read_volume((dir / "baddt.nii").string()),
                         doctest::Contains("unsupported datatype"), NiftiError);
  }

  SUBCASE("4-D files rejected") {
    auto bad = bytes;
    int16_t nd = 4;
    std::memcpy(&bad[40], &nd, 2);
    spit(dir / "4d.nii", bad);
    CHECK_THROWS_WITH_AS(read_volume((dir / "4d.nii").string()),
                         doctest::Contains("only 3-D"), NiftiError);
  }
}

TEST_CASE("normalize_intensity: tabulated cases and idempotence") {
  Volume v;
  v.grid = Grid({3, 1, 1});
  v.grid.data = {10, 20, 30};
  Volume n = normalize_intensity(v);
  CHECK(n.grid.data == std::vector<double>{0.0, 0.5, 1.0});

  Volume c;
  c.grid = Grid({2, 2, 2}, 7.0);
  Volume nc = normalize_intensity(c);
  for (double x : nc.grid.data) CHECK(x == 0.0);

  Rng r(26);
  Volume rnd;
  rnd.grid = Grid({4, 4, 4});
  for (auto& x : rnd.grid.data) x = r.uniform(-3.0, 9.0);
  Volume nr = normalize_intensity(rnd);
  CHECK(min_value(nr.grid) == 0.0);
  CHECK(max_value(nr.grid) == 1.0);

  // idempotent on an already-normalized non-constant volume
  Volume again = normalize_intensity(nr);
  CHECK(bit_equal(again.grid, nr.grid));
}

TEST_CASE("map_labels: identity, remap, and unmapped errors") {
  Grid raw({2, 1, 1});
  raw.data = {5, 6};
  Grid mapped = map_labels(raw, {{0, 0}, {5, 1}, {6, 2}});
  CHECK(mapped.data == std::vector<double>{1.0, 2.0});

  Grid id({3, 1, 1});
  id.data = {0, 1, 2};
  CHECK(bit_equal(map_labels(id, {{0, 0}, {1, 1}, {2, 2}}), id));

  Grid bad({1, 1, 1});
  bad.data = {9};
  CHECK_THROWS_WITH_AS(map_labels(bad, {{0, 0}, {1, 1}, {2, 2}}), doctest::Contains("9"),
                       std::invalid_argument);
}

TEST_CASE("fuzz: random byte strings error cleanly, never crash") {
  auto dir = tmpdir();
  Rng r(27);
  const auto path = (dir / "fuzz.nii").string();
  int errors = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const size_t len = static_cast<size_t>(r.bounded(1024));
    std::vector<uint8_t> junk(len);
    for (auto& b : junk) b = static_cast<uint8_t>(r.bounded(256));
    if (trial % 3 == 0 && len >= 2) {  // exercise the gzip sniffing path too
      junk[0] = 0x1f;
      junk[1] = 0x8b;
    }
    spit(path, junk);
    try {
      read_volume(path);
    } catch (const NiftiError&) {
      ++errors;
    } catch (const std::invalid_argument&) {
      ++errors;
    }
  }
  CHECK(errors == 500);
}
