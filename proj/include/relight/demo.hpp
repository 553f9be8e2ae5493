#pragma once

// Deterministic procedural avatars standing in for trained assets.

#include <cstdint>
#include <string>

#include "relight/asset_io.hpp"

namespace relight {

enum class DemoPreset { kSphereHead, kEllipsoidTwoTone };
DemoPreset parse_demo_preset(const std::string& name);
std::string demo_preset_name(DemoPreset preset);

// Closed UV sphere scaled to `radii`, polar axis +z. Vertex (ring, seg) sits
// at theta = pi * ring / rings, phi = 2pi * seg / segments and carries UV
// (seg / segments, ring / rings); the seam duplicates UVs, not vertices.
CoarseMesh make_uv_sphere(int rings, int segments, const Vec3& radii);

struct DemoOptions {
  std::uint64_t seed = 0;
  DemoPreset preset = DemoPreset::kSphereHead;
  int resolution = 256;
  ShOrder sh_order;
  int rings = 32;
  int segments = 64;
};

// The face points toward +x. Transfer is the clamped cosine about the
// shading normal plus a small ambient term, chosen so the reconstructed
// transfer stays positive in every direction: shading never clamps.
AvatarAsset gen_demo_avatar(const DemoOptions& options = {});

// Smallest value over directions of the order-n SH reconstruction of
// max(0, cos) about a fixed axis.
double clamped_cosine_reconstruction_min(ShOrder order);

}  // namespace relight
