#pragma once

// Equirectangular environment maps and point-light rigs.
//
// Mapping: v = theta / pi with theta measured from +z (row 0 is the +z pole),
// u = phi / 2pi with phi = atan2(y, x) in [0, 2pi) (column 0 starts at +x).
// Texel (col, row) has its center at ((col + 0.5) / W, (row + 0.5) / H).

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "relight/common.hpp"
#include "relight/image_io.hpp"
#include "relight/sh_basis.hpp"

namespace relight {

Vec3 equirect_direction(double u, double v);
Vec2 equirect_coords(const Vec3& direction);

class EnvironmentMap {
 public:
  EnvironmentMap() = default;
  // Throws InvalidInput unless width = 2 * height, and every pixel is finite
  // and non-negative.
  EnvironmentMap(int width, int height, std::vector<Rgb> pixels);

  static EnvironmentMap constant(int height, const Rgb& value);
  static EnvironmentMap from_image(const FloatImage& image);
  FloatImage to_image() const;

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }
  std::span<const Rgb> pixels() const { return pixels_; }
  const Rgb& at(int col, int row) const { return pixels_[static_cast<std::size_t>(row) * width_ + col]; }

  Vec3 texel_direction(int col, int row) const;
  // Exact solid angle (2pi / W)(cos theta_top - cos theta_bottom).
  double texel_solid_angle(int row) const;
  // Sum over texels of value * solid angle.
  Rgb integrated_energy() const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<Rgb> pixels_;
};

// Bilinear lookup with azimuthal wraparound; rows clamp at the poles.
Rgb sample_env(const EnvironmentMap& map, const Vec3& direction);

ShCoefficients env_to_sh(const EnvironmentMap& map, ShOrder order);

// Area-overlap resampling to `height` rows (width 2 * height); preserves
// integrated energy.
EnvironmentMap downsample_env(const EnvironmentMap& map, int height);

// Rotation about +z by an integer number of texel columns.
EnvironmentMap rotate_env_columns(const EnvironmentMap& map, int columns);

const std::vector<double>& default_prefilter_ladder();

struct PrefilterLevel {
  double roughness;
  EnvironmentMap filtered;
};

struct PrefilterOptions {
  // Maps taller than this are downsampled before convolution.
  int max_height = 64;
  std::size_t threads = 0;
};

class PrefilteredEnvMap {
 public:
  PrefilteredEnvMap() = default;
  PrefilteredEnvMap(EnvironmentMap base, std::vector<PrefilterLevel> levels);

  const EnvironmentMap& base() const { return base_; }
  std::span<const PrefilterLevel> levels() const { return levels_; }
  double min_roughness() const { return levels_.front().roughness; }
  double max_roughness() const { return levels_.back().roughness; }

  // Integral of L(w) G(w; axis, sigma) dw from the stored levels. Levels are
  // normalised by their closed-form kernel mass, interpolated linearly in
  // log(sigma), and rescaled by the kernel mass at `roughness`. Roughness
  // outside the ladder is clamped to the nearest level and reported via
  // `clamped`.
  Rgb lookup(const Vec3& axis, double roughness, bool* clamped = nullptr) const;

 private:
  EnvironmentMap base_;
  std::vector<PrefilterLevel> levels_;
};

// Level l holds (L * G_sigma_l)(a) = integral of L(w) exp((a . w - 1) / sigma_l) dw
// at every texel direction a, by direct solid-angle-weighted convolution.
PrefilteredEnvMap prefilter_env(const EnvironmentMap& map, std::span<const double> sigmas,
                                const PrefilterOptions& options = {});

struct LightRig {
  std::string id;
  std::vector<Vec3> directions;

  void validate() const;
  std::size_t size() const { return directions.size(); }
};

// Deterministic, near-uniform rig; id "fibonacci-<count>".
LightRig fibonacci_rig(std::size_t count);

// Fixed-direction distant lights. Directions point from the subject toward
// the light.
struct PointLightSet {
  std::string rig_id;
  std::vector<Vec3> directions;
  std::vector<Rgb> intensities;

  static PointLightSet from_rig(const LightRig& rig, std::vector<Rgb> intensities);
  void validate() const;
  std::size_t size() const { return directions.size(); }
  Rgb total_intensity() const;
};

// Concatenates two light sets; the result carries `a`'s rig id when both
// share it and "combined" otherwise.
PointLightSet merge_lights(const PointLightSet& a, const PointLightSet& b);

// Each texel's energy (value * solid angle) goes to its nearest rig
// direction, lowest index first on ties.
PointLightSet env_to_point_lights(const EnvironmentMap& map, const LightRig& rig);

enum class EnvPreset { kSky, kStudio, kConstant, kZero };
EnvPreset parse_env_preset(const std::string& name);

// Smooth analytic maps used by demos and tests.
EnvironmentMap make_procedural_env(EnvPreset preset, int height);

}  // namespace relight
