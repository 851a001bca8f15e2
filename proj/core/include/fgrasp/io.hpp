#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fgrasp/types.hpp"

namespace fgrasp::io {

// Binary scene container. Layout, all little-endian, no padding:
//   magic   5 bytes "FGPC1"
//   count   uint32
//   flags   uint32   bit0 normals, bit1 object_ids, bit2 graspness
//   per point: 3 x float32 xyz
//              3 x float32 normal      (if bit0)
//              uint32 object_id        (if bit1)
//              float32 graspness       (if bit2)
inline constexpr char kSceneMagic[5] = {'F', 'G', 'P', 'C', '1'};

inline constexpr std::uint32_t kFlagNormals = 1u << 0;
inline constexpr std::uint32_t kFlagObjectIds = 1u << 1;
inline constexpr std::uint32_t kFlagGraspness = 1u << 2;

Scene read_scene(const std::filesystem::path& path);
void write_scene(const Scene& scene, const std::filesystem::path& path);

// In-memory codec used by the file functions; exposed for byte-level tests.
std::vector<std::uint8_t> encode_scene(const Scene& scene);
Scene decode_scene(const std::vector<std::uint8_t>& bytes);

// Depth image: binary PGM (P5, maxval 65535, most significant byte first)
// plus a JSON metadata sidecar {fx, fy, cx, cy, depth_scale}. Stored
// value = round(depth / depth_scale); raw 0 marks an invalid pixel.
DepthImage read_depth(const std::filesystem::path& pgm_path,
                      const std::filesystem::path& meta_path);
void write_depth(const DepthImage& depth, const std::filesystem::path& pgm_path,
                 const std::filesystem::path& meta_path);

// Grasp lists as a JSON array of
//   {center:[3], rotation:[9 row-major], width, depth, score, object_id}
// Doubles are written with enough digits to round-trip value-exactly.
// Rotations farther than 1e-4 from orthonormal are rejected on read.
std::vector<GraspPose> read_grasps(const std::filesystem::path& path);
void write_grasps(const std::vector<GraspPose>& grasps, const std::filesystem::path& path);

std::string encode_grasps(const std::vector<GraspPose>& grasps);
std::vector<GraspPose> decode_grasps(const std::string& json_text);

// 8-bit binary PGM; nonzero = inside.
Mask read_mask(const std::filesystem::path& pgm_path);
void write_mask(const Mask& mask, const std::filesystem::path& pgm_path);

}  // namespace fgrasp::io
