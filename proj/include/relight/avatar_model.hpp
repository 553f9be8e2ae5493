#pragma once

// Texture-space Gaussian avatars: a coarse mesh with a UV layout, one
// Gaussian candidate per UV texel, and parameter planes that are assembled
// into full-on or relightable Gaussian sets.

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "relight/common.hpp"
#include "relight/sh_basis.hpp"

namespace relight {

struct CoarseMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
  std::vector<Vec2> uvs;
  // Per-corner indices into `uvs`, parallel to `faces`.
  std::vector<std::array<int, 3>> uv_faces;

  // Index ranges and UV bounds. Throws InvalidAsset on the first violation.
  void validate() const;
  // Area-weighted average of incident face normals.
  std::vector<Vec3> vertex_normals() const;
  double median_edge_length() const;
};

struct TexelBinding {
  int texel;  // row * resolution + col
  int face;
  Vec3 barycentric;
  Vec3 surface_point;  // t-hat
  Vec3 normal_base;    // n-hat
};

struct MeshBinding {
  int resolution = 0;
  std::vector<TexelBinding> texels;  // ascending texel order
  std::vector<std::int32_t> texel_to_gaussian;  // -1 for uncovered texels

  std::size_t covered() const { return texels.size(); }
};

class OverlappingUvError : public InvalidAsset {
 public:
  OverlappingUvError(int texel, std::vector<int> faces);
  int texel() const { return texel_; }
  const std::vector<int>& faces() const { return faces_; }

 private:
  int texel_;
  std::vector<int> faces_;
};

// Texel (row, col) samples UV ((col + 0.5) / R, (row + 0.5) / R). Samples on
// shared edges belong to exactly one face (top-left rule).
MeshBinding bind_texels(const CoarseMesh& mesh, int resolution);

namespace channel {
inline constexpr const char* kOffset = "offset";
inline constexpr const char* kRotation = "rotation";
inline constexpr const char* kScale = "scale";
inline constexpr const char* kOpacity = "opacity";
inline constexpr const char* kColorFullOn = "color_fullon";
inline constexpr const char* kAlbedo = "albedo";
inline constexpr const char* kShTransfer = "sh_transfer";
inline constexpr const char* kRoughness = "roughness";
inline constexpr const char* kVisibility = "visibility";
inline constexpr const char* kNormalResidual = "normal_residual";
inline constexpr const char* kMask = "mask";
}  // namespace channel

struct ChannelSpec {
  std::string name;
  int components;
};

std::vector<ChannelSpec> geometry_channels();
std::vector<ChannelSpec> fullon_channels();
std::vector<ChannelSpec> relightable_channels(ShOrder order);
std::vector<ChannelSpec> all_channels(ShOrder order);

struct Plane {
  int components = 0;
  std::vector<float> data;  // texel-major: (row, col, component)
};

// Per-texel parameters. Scale, opacity, roughness and visibility are stored
// before activation.
class ParamPlanes {
 public:
  ParamPlanes() = default;
  ParamPlanes(int resolution, ShOrder order);

  int resolution() const { return resolution_; }
  ShOrder sh_order() const { return sh_order_; }
  std::size_t texel_count() const { return static_cast<std::size_t>(resolution_) * resolution_; }

  // Throws InvalidAsset when data.size() != R^2 * components.
  void set(const std::string& name, int components, std::vector<float> data);
  // Zero-filled plane.
  Plane& add(const std::string& name, int components);
  bool has(const std::string& name) const { return planes_.count(name) != 0; }
  // Throws InvalidAsset naming the channel when absent.
  const Plane& plane(const std::string& name) const;
  Plane& plane(const std::string& name);
  std::span<const float> texel(const std::string& name, int texel) const;
  const std::map<std::string, Plane>& planes() const { return planes_; }

 private:
  int resolution_ = 0;
  ShOrder sh_order_;
  std::map<std::string, Plane> planes_;
};

double softplus(double x);
double inverse_softplus(double y);
double sigmoid(double x);
double logit(double p);

inline constexpr double kRoughnessMin = 1e-4;
inline constexpr double kRoughnessMax = 1.0 - 1e-4;
double roughness_from_raw(double raw);  // exp, then clamp into the open range

struct GaussianGeometry {
  std::vector<Vec3> positions;
  std::vector<Vec4> rotations;  // unit quaternions (w, x, y, z)
  std::vector<Vec3> scales;
  std::vector<double> opacities;

  std::size_t size() const { return positions.size(); }
};

struct FullOnGaussianSet {
  GaussianGeometry geometry;
  std::vector<Rgb> colors;
  std::vector<int> texels;
  std::vector<Vec3> offsets;

  std::size_t size() const { return geometry.size(); }
};

// Shading inputs of one relightable Gaussian.
struct SurfaceSample {
  Rgb albedo;
  std::span<const Rgb> transfer;
  double roughness;
  double visibility;
  Vec3 normal;
};

struct RelightableGaussianSet {
  GaussianGeometry geometry;
  ShOrder sh_order;
  std::vector<Rgb> albedo;
  std::vector<Rgb> transfer;  // size() * sh_order.count(), Gaussian-major
  std::vector<double> roughness;
  std::vector<double> visibility;
  std::vector<Vec3> normal_base;
  std::vector<Vec3> normal_residual;
  std::vector<Vec3> normals;
  std::vector<Vec3> offsets;
  std::vector<int> texels;

  std::size_t size() const { return geometry.size(); }
  std::span<const Rgb> transfer_of(std::size_t k) const {
    return std::span<const Rgb>(transfer).subspan(k * sh_order.count(), sh_order.count());
  }
  SurfaceSample surface(std::size_t k) const {
    return {albedo[k], transfer_of(k), roughness[k], visibility[k], normals[k]};
  }
};

struct AssembleOptions {
  // When false, exp(raw) must already lie in (0, 1).
  bool clamp_roughness = true;
};

// (n-hat + dn) / ||n-hat + dn||; throws NumericError below 1e-8.
Vec3 compose_normal(const Vec3& base, const Vec3& residual);

FullOnGaussianSet assemble_fullon(const ParamPlanes& planes, const MeshBinding& binding);
RelightableGaussianSet assemble_relightable(const ParamPlanes& planes, const MeshBinding& binding,
                                            const AssembleOptions& options = {});

}  // namespace relight
