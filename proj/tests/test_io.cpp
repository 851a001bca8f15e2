#include <doctest.h>

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "fgrasp/error.hpp"
#include "fgrasp/io.hpp"
#include "fgrasp/rng.hpp"
#include "helpers.hpp"

using namespace fgrasp;

namespace {

std::vector<std::uint8_t> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Scene random_scene(std::size_t n, std::uint64_t seed, bool normals, bool ids, bool graspness) {
  Rng rng(seed);
  Scene s;
  for (std::size_t i = 0; i < n; ++i) {
    s.points.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0, 2));
    if (normals) s.normals.push_back(testutil::random_unit(rng));
    if (ids) s.object_ids.push_back(static_cast<std::uint32_t>(rng.uniform_index(5)));
    if (graspness) s.graspness.push_back(rng.uniform());
  }
  return s;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("scene: empty scene round-trips") {
  testutil::TempDir tmp;
  Scene s;
  io::write_scene(s, tmp / "empty.fgpc");
  const Scene back = io::read_scene(tmp / "empty.fgpc");
  CHECK(back.size() == 0);
  CHECK_FALSE(back.has_normals());
  CHECK_FALSE(back.has_object_ids());
  CHECK(slurp(tmp / "empty.fgpc").size() == 13);  // magic + count + flags
}

TEST_CASE("scene: one point with normal and id is 13 + 28 bytes") {
  testutil::TempDir tmp;
  Scene s;
  s.points.emplace_back(0.25, -0.5, 1.0);
  s.normals.emplace_back(0.0, 0.0, 1.0);
  s.object_ids.push_back(3);
  io::write_scene(s, tmp / "one.fgpc");
  const auto bytes = slurp(tmp / "one.fgpc");
  CHECK(bytes.size() == 13 + 28);  // header + (12 xyz + 12 normal + 4 id)
  const Scene back = io::read_scene(tmp / "one.fgpc");
  REQUIRE(back.size() == 1);
  CHECK(back.points[0] == Eigen::Vector3d(0.25, -0.5, 1.0));  // exact in float32
  CHECK(back.normals[0] == Eigen::Vector3d(0.0, 0.0, 1.0));
  CHECK(back.object_ids[0] == 3);
}

TEST_CASE("scene: corrupt magic is a format error") {
  testutil::TempDir tmp;
  io::write_scene(Scene{}, tmp / "bad.fgpc");
  auto bytes = slurp(tmp / "bad.fgpc");
  bytes[4] = '2';  // FGPC1 -> FGPC2
  std::ofstream out(tmp / "bad.fgpc", std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  out.close();
  CHECK_THROWS_AS(io::read_scene(tmp / "bad.fgpc"), FormatError);
}

TEST_CASE("scene: truncated payload and trailing bytes are format errors") {
  testutil::TempDir tmp;
  io::write_scene(random_scene(3, 1, true, true, false), tmp / "s.fgpc");
  auto bytes = slurp(tmp / "s.fgpc");

  auto write_bytes = [&](const std::vector<std::uint8_t>& b) {
    std::ofstream out(tmp / "mut.fgpc", std::ios::binary);
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  };
  auto truncated = bytes;
  truncated.pop_back();
  write_bytes(truncated);
  CHECK_THROWS_AS(io::read_scene(tmp / "mut.fgpc"), FormatError);

  auto padded = bytes;
  padded.push_back(0);
  write_bytes(padded);
  CHECK_THROWS_AS(io::read_scene(tmp / "mut.fgpc"), FormatError);
}

TEST_CASE("scene: random scenes round-trip bit-exactly") {
  testutil::TempDir tmp;
  int case_id = 0;
  for (bool normals : {false, true}) {
    for (bool ids : {false, true}) {
      for (bool graspness : {false, true}) {
        const Scene s = random_scene(37, 40 + static_cast<std::uint64_t>(case_id), normals,
                                     ids, graspness);
        const auto path = tmp / ("rt" + std::to_string(case_id++) + ".fgpc");
        io::write_scene(s, path);
        const Scene back = io::read_scene(path);
        io::write_scene(back, tmp / "again.fgpc");
        CHECK(slurp(path) == slurp(tmp / "again.fgpc"));
        CHECK(back.size() == s.size());
        CHECK(back.has_normals() == normals);
        CHECK(back.has_object_ids() == ids);
        CHECK(back.has_graspness() == graspness);
        CHECK(io::encode_scene(back) == slurp(path));
      }
    }
  }
}

TEST_CASE("scene: missing file is an i/o error, non-finite input a validation error") {
  testutil::TempDir tmp;
  CHECK_THROWS_AS(io::read_scene(tmp / "absent.fgpc"), IoError);
  Scene s;
  s.points.emplace_back(0.0, 0.0, std::numeric_limits<double>::quiet_NaN());
  CHECK_THROWS_AS(io::write_scene(s, tmp / "nan.fgpc"), ValidationError);
}

TEST_CASE("depth: uniform raw 1000 at scale 0.001 reads as 1 m; raw 0 is invalid") {
  testutil::TempDir tmp;
  DepthImage d;
  d.width = 3;
  d.height = 2;
  d.intrinsics = {100.0, 100.0, 1.0, 0.5};
  d.depth_scale = 0.001;
  d.depth.assign(6, 1.0);
  d.at(0, 0) = 0.0;  // invalid pixel
  io::write_depth(d, tmp / "d.pgm", tmp / "d.json");
  const DepthImage back = io::read_depth(tmp / "d.pgm", tmp / "d.json");
  CHECK(back.width == 3);
  CHECK(back.height == 2);
  CHECK(back.at(0, 0) == 0.0);
  CHECK_FALSE(back.valid(0, 0));
  for (int v = 0; v < 2; ++v)
    for (int u = 0; u < 3; ++u)
      if (v != 0 || u != 0) {
        CHECK(back.at(v, u) == 1.0);
        CHECK(back.valid(v, u));
      }
  CHECK(back.intrinsics.fx == 100.0);
  CHECK(back.depth_scale == 0.001);
}

TEST_CASE("depth: 2x2 ramp round-trips bit-exactly") {
  testutil::TempDir tmp;
  DepthImage d;
  d.width = 2;
  d.height = 2;
  d.intrinsics = {50.0, 60.0, 0.5, 0.5};
  d.depth_scale = 0.0005;
  d.depth = {0.0005, 0.0010, 0.0015, 0.0020};
  io::write_depth(d, tmp / "ramp.pgm", tmp / "ramp.json");
  const DepthImage back = io::read_depth(tmp / "ramp.pgm", tmp / "ramp.json");
  io::write_depth(back, tmp / "ramp2.pgm", tmp / "ramp2.json");
  CHECK(slurp(tmp / "ramp.pgm") == slurp(tmp / "ramp2.pgm"));
  CHECK(slurp(tmp / "ramp.json") == slurp(tmp / "ramp2.json"));
  CHECK(back.depth == d.depth);
}

TEST_CASE("depth: ASCII P2 files are rejected") {
  testutil::TempDir tmp;
  spit(tmp / "p2.pgm", "P2\n2 2\n65535\n0 1\n2 3\n");
  spit(tmp / "p2.json", R"({"fx":1,"fy":1,"cx":0,"cy":0,"depth_scale":0.001})");
  CHECK_THROWS_AS(io::read_depth(tmp / "p2.pgm", tmp / "p2.json"), FormatError);
}

TEST_CASE("depth: missing meta key is rejected") {
  testutil::TempDir tmp;
  DepthImage d;
  d.width = 1;
  d.height = 1;
  d.intrinsics = {1.0, 1.0, 0.0, 0.0};
  d.depth = {0.5};
  io::write_depth(d, tmp / "d.pgm", tmp / "d.json");
  spit(tmp / "d.json", R"({"fx":1,"fy":1,"cx":0,"depth_scale":0.001})");  // no cy
  CHECK_THROWS_AS(io::read_depth(tmp / "d.pgm", tmp / "d.json"), FormatError);
}

TEST_CASE("depth: wrong maxval is rejected") {
  testutil::TempDir tmp;
  spit(tmp / "m.pgm", std::string("P5\n2 1\n255\n\0\0", 12));
  spit(tmp / "m.json", R"({"fx":1,"fy":1,"cx":0,"cy":0,"depth_scale":0.001})");
  CHECK_THROWS_AS(io::read_depth(tmp / "m.pgm", tmp / "m.json"), FormatError);
}

TEST_CASE("grasps: empty array round-trips") {
  testutil::TempDir tmp;
  io::write_grasps({}, tmp / "g.json");
  CHECK(io::read_grasps(tmp / "g.json").empty());
}

TEST_CASE("grasps: identity-rotation grasp round-trips") {
  testutil::TempDir tmp;
  GraspPose g;
  g.center = Eigen::Vector3d(0.1, -0.2, 0.3);
  g.width = 0.05;
  g.depth = 0.02;
  g.score = 0.75;
  g.object_id = 2;
  io::write_grasps({g}, tmp / "g.json");
  const auto back = io::read_grasps(tmp / "g.json");
  REQUIRE(back.size() == 1);
  CHECK(back[0].center == g.center);
  CHECK(back[0].rotation == g.rotation);
  CHECK(back[0].width == g.width);
  CHECK(back[0].depth == g.depth);
  CHECK(back[0].score == g.score);
  REQUIRE(back[0].object_id.has_value());
  CHECK(*back[0].object_id == 2);
}

TEST_CASE("grasps: 50 random grasps round-trip value-exactly") {
  testutil::TempDir tmp;
  const auto grasps = testutil::random_grasps(50, 9);
  io::write_grasps(grasps, tmp / "g.json");
  const auto back = io::read_grasps(tmp / "g.json");
  REQUIRE(back.size() == grasps.size());
  for (std::size_t i = 0; i < grasps.size(); ++i) {
    CHECK(back[i].center == grasps[i].center);
    CHECK(back[i].rotation == grasps[i].rotation);
    CHECK(back[i].width == grasps[i].width);
    CHECK(back[i].depth == grasps[i].depth);
    CHECK(back[i].score == grasps[i].score);
    CHECK(back[i].object_id == grasps[i].object_id);
  }
  // A second encode of the decoded list is byte-identical.
  CHECK(io::encode_grasps(back) == io::encode_grasps(grasps));
}

TEST_CASE("grasps: non-orthonormal rotation is rejected on read") {
  GraspPose g;
  g.rotation(0, 0) = 1.5;
  const std::string text = io::encode_grasps({g});
  CHECK_THROWS_AS(io::decode_grasps(text), FormatError);
}

TEST_CASE("mask: all-zero, all-255 and checkerboard") {
  testutil::TempDir tmp;
  Mask m;
  m.width = 2;
  m.height = 2;

  m.data = {0, 0, 0, 0};
  io::write_mask(m, tmp / "z.pgm");
  Mask back = io::read_mask(tmp / "z.pgm");
  int inside = 0;
  for (int v = 0; v < 2; ++v)
    for (int u = 0; u < 2; ++u) inside += back.inside(v, u);
  CHECK(inside == 0);

  m.data = {255, 255, 255, 255};
  io::write_mask(m, tmp / "f.pgm");
  back = io::read_mask(tmp / "f.pgm");
  inside = 0;
  for (int v = 0; v < 2; ++v)
    for (int u = 0; u < 2; ++u) inside += back.inside(v, u);
  CHECK(inside == 4);

  m.data = {255, 0, 0, 255};
  io::write_mask(m, tmp / "c.pgm");
  back = io::read_mask(tmp / "c.pgm");
  inside = 0;
  for (int v = 0; v < 2; ++v)
    for (int u = 0; u < 2; ++u) inside += back.inside(v, u);
  CHECK(inside == 2);
  CHECK(back.inside(0, 0));
  CHECK(back.inside(1, 1));
  CHECK_FALSE(back.inside(0, 1));
  CHECK_FALSE(back.inside(1, 0));
}

TEST_CASE("mask: round-trips bit-exactly") {
  testutil::TempDir tmp;
  Rng rng(13);
  Mask m;
  m.width = 9;
  m.height = 7;
  m.data.resize(63);
  for (auto& b : m.data) b = rng.uniform() < 0.5 ? 0 : 255;
  io::write_mask(m, tmp / "m.pgm");
  const Mask back = io::read_mask(tmp / "m.pgm");
  io::write_mask(back, tmp / "m2.pgm");
  CHECK(slurp(tmp / "m.pgm") == slurp(tmp / "m2.pgm"));
  CHECK(back.data == m.data);
}

}  // TEST_SUITE
