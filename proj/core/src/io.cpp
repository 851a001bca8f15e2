#include "fgrasp/io.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "fgrasp/error.hpp"
#include "fgrasp/geometry.hpp"

namespace fgrasp::io {
namespace {

using nlohmann::json;

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed on " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, const void* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) throw IoError("write failed on " + path.string());
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 24));
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
  put_u32(out, std::bit_cast<std::uint32_t>(v));
}

float to_f32_checked(double v, const char* what) {
  if (!std::isfinite(v)) throw ValidationError(std::string(what) + " is not finite");
  return static_cast<float>(v);
}

// %.17g: enough digits for an exact double round-trip, wanted over the
// shortest-representation default so the wire format is fully pinned.
std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::vector<std::uint8_t> encode_scene(const Scene& scene) {
  const std::size_t n = scene.size();
  if (scene.has_object_ids() && scene.object_ids.size() != n)
    throw ValidationError("scene object_ids length mismatch");
  if (scene.has_normals() && scene.normals.size() != n)
    throw ValidationError("scene normals length mismatch");
  if (scene.has_graspness() && scene.graspness.size() != n)
    throw ValidationError("scene graspness length mismatch");
  if (n > 0xffffffffull) throw ValidationError("scene too large for format");

  std::uint32_t flags = 0;
  if (scene.has_normals()) flags |= kFlagNormals;
  if (scene.has_object_ids()) flags |= kFlagObjectIds;
  if (scene.has_graspness()) flags |= kFlagGraspness;

  std::vector<std::uint8_t> out;
  out.reserve(13 + n * 32);
  out.insert(out.end(), kSceneMagic, kSceneMagic + 5);
  put_u32(out, static_cast<std::uint32_t>(n));
  put_u32(out, flags);
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) put_f32(out, to_f32_checked(scene.points[i][c], "point"));
    if (scene.has_normals()) {
      for (int c = 0; c < 3; ++c) put_f32(out, to_f32_checked(scene.normals[i][c], "normal"));
    }
    if (scene.has_object_ids()) put_u32(out, scene.object_ids[i]);
    if (scene.has_graspness()) put_f32(out, to_f32_checked(scene.graspness[i], "graspness"));
  }
  return out;
}

Scene decode_scene(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 13 || std::memcmp(bytes.data(), kSceneMagic, 5) != 0)
    throw FormatError("bad scene magic");
  Scene scene;
  const std::uint8_t* p = bytes.data() + 5;
  auto u32_at = [&](const std::uint8_t* q) {
    return static_cast<std::uint32_t>(q[0]) | (static_cast<std::uint32_t>(q[1]) << 8) |
           (static_cast<std::uint32_t>(q[2]) << 16) | (static_cast<std::uint32_t>(q[3]) << 24);
  };
  const std::uint32_t count = u32_at(p);
  const std::uint32_t flags = u32_at(p + 4);
  if (flags & ~(kFlagNormals | kFlagObjectIds | kFlagGraspness))
    throw FormatError("unknown scene flags");

  std::size_t record = 12;
  if (flags & kFlagNormals) record += 12;
  if (flags & kFlagObjectIds) record += 4;
  if (flags & kFlagGraspness) record += 4;
  const std::size_t expect = 13 + record * count;
  if (bytes.size() < expect) throw FormatError("scene payload truncated");
  if (bytes.size() > expect) throw FormatError("scene payload has trailing bytes");

  std::size_t pos = 13;
  auto take_f32 = [&]() {
    const float v = std::bit_cast<float>(u32_at(bytes.data() + pos));
    pos += 4;
    if (!std::isfinite(v)) throw FormatError("scene payload contains non-finite float");
    return static_cast<double>(v);
  };
  // take_f32 mutates pos, so the three reads per vector must be sequenced
  // explicitly; constructor arguments have unspecified evaluation order.
  auto take_vec3 = [&]() {
    const double x = take_f32();
    const double y = take_f32();
    const double z = take_f32();
    return Eigen::Vector3d(x, y, z);
  };
  auto take_u32 = [&]() {
    const std::uint32_t v = u32_at(bytes.data() + pos);
    pos += 4;
    return v;
  };

  scene.points.reserve(count);
  if (flags & kFlagNormals) scene.normals.reserve(count);
  if (flags & kFlagObjectIds) scene.object_ids.reserve(count);
  if (flags & kFlagGraspness) scene.graspness.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    scene.points.push_back(take_vec3());
    if (flags & kFlagNormals) scene.normals.push_back(take_vec3());
    if (flags & kFlagObjectIds) scene.object_ids.push_back(take_u32());
    if (flags & kFlagGraspness) scene.graspness.push_back(take_f32());
  }
  return scene;
}

Scene read_scene(const std::filesystem::path& path) { return decode_scene(read_file(path)); }

void write_scene(const Scene& scene, const std::filesystem::path& path) {
  const auto bytes = encode_scene(scene);
  write_file(path, bytes.data(), bytes.size());
}

// ---------------------------------------------------------------------------
// PGM

namespace {

struct PgmImage {
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::vector<std::uint8_t> raster;
};

PgmImage parse_pgm(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  if (bytes.size() < 2) throw FormatError(origin + ": not a PGM file");
  if (bytes[0] != 'P' || bytes[1] != '5') {
    if (bytes[0] == 'P' && bytes[1] == '2')
      throw FormatError(origin + ": ASCII (P2) PGM not supported, binary P5 required");
    throw FormatError(origin + ": not a binary P5 PGM");
  }
  std::size_t pos = 2;
  auto next_token = [&]() -> long {
    // skip whitespace and '#' comments
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size()) throw FormatError(origin + ": truncated PGM header");
    long value = 0;
    bool any = false;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      value = value * 10 + (bytes[pos] - '0');
      ++pos;
      any = true;
      if (value > 1 << 30) throw FormatError(origin + ": PGM header value out of range");
    }
    if (!any) throw FormatError(origin + ": malformed PGM header");
    return value;
  };
  PgmImage img;
  img.width = static_cast<int>(next_token());
  img.height = static_cast<int>(next_token());
  img.maxval = static_cast<int>(next_token());
  if (img.width <= 0 || img.height <= 0) throw FormatError(origin + ": bad PGM dimensions");
  if (pos >= bytes.size() || !std::isspace(bytes[pos]))
    throw FormatError(origin + ": malformed PGM header");
  ++pos;  // single whitespace before raster
  const std::size_t bytes_per_sample = img.maxval > 255 ? 2 : 1;
  const std::size_t need =
      static_cast<std::size_t>(img.width) * img.height * bytes_per_sample;
  if (bytes.size() - pos < need) throw FormatError(origin + ": truncated PGM raster");
  if (bytes.size() - pos > need) throw FormatError(origin + ": PGM raster has trailing bytes");
  img.raster.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  return img;
}

std::vector<std::uint8_t> build_pgm_header(int width, int height, int maxval) {
  char buf[64];
  const int len = std::snprintf(buf, sizeof(buf), "P5\n%d %d\n%d\n", width, height, maxval);
  return std::vector<std::uint8_t>(buf, buf + len);
}

json parse_json(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  json j = json::parse(bytes.begin(), bytes.end(), nullptr, false);
  if (j.is_discarded()) throw FormatError(origin + ": invalid JSON");
  return j;
}

double require_number(const json& j, const char* key, const std::string& origin) {
  if (!j.contains(key) || !j.at(key).is_number())
    throw FormatError(origin + ": missing numeric key '" + key + "'");
  const double v = j.at(key).get<double>();
  if (!std::isfinite(v)) throw FormatError(origin + ": key '" + key + "' not finite");
  return v;
}

}  // namespace

DepthImage read_depth(const std::filesystem::path& pgm_path,
                      const std::filesystem::path& meta_path) {
  const json meta = parse_json(read_file(meta_path), meta_path.string());
  DepthImage d;
  d.intrinsics.fx = require_number(meta, "fx", meta_path.string());
  d.intrinsics.fy = require_number(meta, "fy", meta_path.string());
  d.intrinsics.cx = require_number(meta, "cx", meta_path.string());
  d.intrinsics.cy = require_number(meta, "cy", meta_path.string());
  d.depth_scale = require_number(meta, "depth_scale", meta_path.string());
  if (d.intrinsics.fx <= 0 || d.intrinsics.fy <= 0 || d.intrinsics.cx <= 0 ||
      d.intrinsics.cy <= 0)
    throw FormatError(meta_path.string() + ": intrinsics must be positive");
  if (d.depth_scale <= 0) throw FormatError(meta_path.string() + ": depth_scale must be positive");

  const PgmImage img = parse_pgm(read_file(pgm_path), pgm_path.string());
  if (img.maxval != 65535)
    throw FormatError(pgm_path.string() + ": depth PGM must have maxval 65535");
  d.width = img.width;
  d.height = img.height;
  d.depth.resize(static_cast<std::size_t>(d.width) * d.height);
  for (std::size_t i = 0; i < d.depth.size(); ++i) {
    const std::uint32_t raw =
        (static_cast<std::uint32_t>(img.raster[2 * i]) << 8) | img.raster[2 * i + 1];
    d.depth[i] = raw * d.depth_scale;
  }
  return d;
}

void write_depth(const DepthImage& d, const std::filesystem::path& pgm_path,
                 const std::filesystem::path& meta_path) {
  if (d.width <= 0 || d.height <= 0 || d.depth.size() != static_cast<std::size_t>(d.width) * d.height)
    throw ValidationError("depth image dimensions inconsistent");
  if (d.depth_scale <= 0) throw ValidationError("depth_scale must be positive");
  std::vector<std::uint8_t> out = build_pgm_header(d.width, d.height, 65535);
  out.reserve(out.size() + d.depth.size() * 2);
  for (const double v : d.depth) {
    if (!std::isfinite(v) || v < 0) throw ValidationError("depth values must be finite and >= 0");
    const long long raw = std::llround(v / d.depth_scale);
    if (raw < 0 || raw > 65535)
      throw ValidationError("depth value exceeds 16-bit range at this depth_scale");
    out.push_back(static_cast<std::uint8_t>(raw >> 8));
    out.push_back(static_cast<std::uint8_t>(raw & 0xff));
  }
  write_file(pgm_path, out.data(), out.size());

  json meta;
  meta["fx"] = d.intrinsics.fx;
  meta["fy"] = d.intrinsics.fy;
  meta["cx"] = d.intrinsics.cx;
  meta["cy"] = d.intrinsics.cy;
  meta["depth_scale"] = d.depth_scale;
  const std::string text = meta.dump(2) + "\n";
  write_file(meta_path, text.data(), text.size());
}

// ---------------------------------------------------------------------------
// Grasp lists

std::string encode_grasps(const std::vector<GraspPose>& grasps) {
  std::string out = "[";
  for (std::size_t i = 0; i < grasps.size(); ++i) {
    const auto& g = grasps[i];
    if (!g.center.allFinite() || !g.rotation.allFinite() || !std::isfinite(g.width) ||
        !std::isfinite(g.depth) || !std::isfinite(g.score))
      throw ValidationError("grasp contains non-finite values");
    out += i ? ",\n " : "\n ";
    out += "{\"center\":[";
    for (int c = 0; c < 3; ++c) {
      if (c) out += ',';
      out += format_double(g.center[c]);
    }
    out += "],\"rotation\":[";
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        if (r || c) out += ',';
        out += format_double(g.rotation(r, c));
      }
    out += "],\"width\":" + format_double(g.width);
    out += ",\"depth\":" + format_double(g.depth);
    out += ",\"score\":" + format_double(g.score);
    out += ",\"object_id\":";
    out += g.object_id ? std::to_string(*g.object_id) : "null";
    out += "}";
  }
  out += "\n]\n";
  return out;
}

std::vector<GraspPose> decode_grasps(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw FormatError("grasp list: invalid JSON");
  if (!j.is_array()) throw FormatError("grasp list: top-level JSON array required");
  std::vector<GraspPose> grasps;
  grasps.reserve(j.size());
  for (const auto& item : j) {
    if (!item.is_object()) throw FormatError("grasp list: array entries must be objects");
    GraspPose g;
    const auto& center = item.at("center");
    const auto& rotation = item.at("rotation");
    if (!center.is_array() || center.size() != 3)
      throw FormatError("grasp list: center must be a 3-array");
    if (!rotation.is_array() || rotation.size() != 9)
      throw FormatError("grasp list: rotation must be a 9-array (row-major)");
    for (int c = 0; c < 3; ++c) g.center[c] = center[c].get<double>();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) g.rotation(r, c) = rotation[3 * r + c].get<double>();
    g.width = item.at("width").get<double>();
    g.depth = item.at("depth").get<double>();
    g.score = item.at("score").get<double>();
    if (!item.contains("object_id")) throw FormatError("grasp list: missing object_id");
    if (!item.at("object_id").is_null()) g.object_id = item.at("object_id").get<std::uint32_t>();
    if (!g.center.allFinite() || !g.rotation.allFinite() || !std::isfinite(g.width) ||
        !std::isfinite(g.depth) || !std::isfinite(g.score))
      throw FormatError("grasp list: non-finite values");
    if (!is_rotation_matrix(g.rotation, 1e-4))
      throw FormatError("grasp list: rotation not orthonormal within 1e-4");
    if (g.width < 0 || g.depth < 0)
      throw FormatError("grasp list: width and depth must be non-negative");
    grasps.push_back(g);
  }
  return grasps;
}

std::vector<GraspPose> read_grasps(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return decode_grasps(std::string(bytes.begin(), bytes.end()));
}

void write_grasps(const std::vector<GraspPose>& grasps, const std::filesystem::path& path) {
  const std::string text = encode_grasps(grasps);
  write_file(path, text.data(), text.size());
}

// ---------------------------------------------------------------------------
// Masks

Mask read_mask(const std::filesystem::path& pgm_path) {
  const PgmImage img = parse_pgm(read_file(pgm_path), pgm_path.string());
  if (img.maxval > 255)
    throw FormatError(pgm_path.string() + ": mask PGM must be 8-bit (maxval <= 255)");
  Mask m;
  m.width = img.width;
  m.height = img.height;
  m.data = img.raster;
  return m;
}

void write_mask(const Mask& mask, const std::filesystem::path& pgm_path) {
  if (mask.width <= 0 || mask.height <= 0 ||
      mask.data.size() != static_cast<std::size_t>(mask.width) * mask.height)
    throw ValidationError("mask dimensions inconsistent");
  std::vector<std::uint8_t> out = build_pgm_header(mask.width, mask.height, 255);
  out.insert(out.end(), mask.data.begin(), mask.data.end());
  write_file(pgm_path, out.data(), out.size());
}

}  // namespace fgrasp::io
