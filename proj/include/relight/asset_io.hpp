#pragma once

// On-disk formats: avatar asset directories, OBJ meshes, and the JSON files
// for light rigs, per-light RGB weights and cameras.
//
// Asset directory layout:
//   meta.json        resolution, sh_order, mesh file, rig id, roughness
//                    clamp marker and the channel manifest
//   <channel>.f32    raw little-endian float32, texel-major (row, col, comp)
//   mesh.obj         v / vt / optional vn / f v/vt

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "relight/avatar_model.hpp"
#include "relight/envmap.hpp"
#include "relight/splat.hpp"

namespace relight {

struct AvatarMeta {
  int resolution = 0;
  ShOrder sh_order;
  std::string mesh_file = "mesh.obj";
  std::string rig_id;
  // When false, roughness planes must already satisfy exp(raw) in (0, 1).
  bool clamp_roughness = true;
  std::string preset;
  std::uint64_t seed = 0;
  std::vector<ChannelSpec> channels;
};

struct AvatarAsset {
  AvatarMeta meta;
  CoarseMesh mesh;
  ParamPlanes planes;

  MeshBinding bind() const;
  RelightableGaussianSet relightable() const;
  FullOnGaussianSet fullon() const;
};

std::string encode_obj(const CoarseMesh& mesh);
CoarseMesh decode_obj(const std::string& text);

std::vector<std::uint8_t> encode_plane(const Plane& plane);
std::vector<float> decode_plane(const std::vector<std::uint8_t>& bytes);

std::string encode_meta(const AvatarMeta& meta);
AvatarMeta decode_meta(const std::string& text);

void save_asset(const AvatarAsset& asset, const std::filesystem::path& dir);
// Throws InvalidAsset naming the file or channel that failed.
AvatarAsset load_asset(const std::filesystem::path& dir);

struct InvariantViolation {
  std::string invariant;  // e.g. "SpecularLobe.roughness"
  std::string message;
};

// Checks every type invariant of a loaded asset in a fixed order and
// returns the first violation.
std::optional<InvariantViolation> validate_asset(const AvatarAsset& asset);
// Loads and validates; load failures are reported as violations too.
std::optional<InvariantViolation> validate_asset_dir(const std::filesystem::path& dir);

// {"rig_id": "...", "directions": [[x, y, z], ...]}
std::string encode_rig(const LightRig& rig);
LightRig decode_rig(const std::string& text);

// [[r, g, b], ...]
std::string encode_weights(const std::vector<Rgb>& weights);
std::vector<Rgb> decode_weights(const std::string& text);

// Either explicit {"fx", "fy", "cx", "cy", "rotation": 3x3 rows,
// "translation", "width", "height"} or {"orbit": {"azimuth", "elevation",
// "distance", "target", "fov_y"}, "width", "height"}.
std::string encode_camera(const Camera& camera);
Camera decode_camera(const std::string& text);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace relight
