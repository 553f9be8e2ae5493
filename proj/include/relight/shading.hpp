#pragma once

// Per-Gaussian color: diffuse SH transfer plus spherical-Gaussian specular,
// clamped to be non-negative once after the two terms are summed.

#include <span>
#include <variant>
#include <vector>

#include "relight/avatar_model.hpp"
#include "relight/envmap.hpp"
#include "relight/sh_basis.hpp"
#include "relight/spherical_gaussian.hpp"

namespace relight {

// rho * sum_i L_i * d_i. May be negative.
Rgb shade_diffuse(const SurfaceSample& g, const ShCoefficients& light_sh);

// v * sum_j I_j G(w_j; a, sigma) with a the view reflected about the normal.
Rgb shade_specular_point(const SurfaceSample& g, const PointLightSet& lights, const Vec3& view);

// v * prefiltered lookup at the reflected axis. Sets *clamped when the
// Gaussian's roughness lies outside the prefiltered ladder.
Rgb shade_specular_env(const SurfaceSample& g, const PrefilteredEnvMap& env, const Vec3& view,
                       bool* clamped = nullptr);

// SH projection of a set of Dirac lights: L_i = sum_j I_j Y_i(w_j).
ShCoefficients point_lights_to_sh(const PointLightSet& lights, ShOrder order);

struct PointLightCondition {
  PointLightSet lights;
  ShCoefficients sh;
};

struct EnvironmentCondition {
  ShCoefficients sh;
  PrefilteredEnvMap prefiltered;
};

using LightCondition = std::variant<PointLightCondition, EnvironmentCondition>;

LightCondition prepare_point_lights(PointLightSet lights, ShOrder order);
LightCondition prepare_environment(const EnvironmentMap& env, ShOrder order,
                                   std::span<const double> ladder = default_prefilter_ladder(),
                                   const PrefilterOptions& options = {});

struct ShadeTerms {
  Rgb diffuse;
  Rgb specular;
};

struct ShadeStats {
  std::size_t clamp_activations = 0;  // channels raised to zero by the clamp
  std::size_t roughness_clamped = 0;  // Gaussians outside the prefilter ladder
};

ShadeTerms shade_terms(const SurfaceSample& g, const LightCondition& condition, const Vec3& view,
                       ShadeStats* stats = nullptr);

// max(diffuse + specular, 0) per channel.
Rgb shade(const SurfaceSample& g, const LightCondition& condition, const Vec3& view, ShadeStats* stats = nullptr);

// Unit vector from a Gaussian toward the camera center.
Vec3 view_direction(const Vec3& position, const Vec3& camera_center);

// Shades every Gaussian of the set for a camera at `camera_center`.
std::vector<Rgb> shade_all(const RelightableGaussianSet& set, const LightCondition& condition,
                           const Vec3& camera_center, ShadeStats* stats = nullptr, std::size_t threads = 0);

// Unclamped diffuse terms of every Gaussian (operand of the negative-color
// penalty).
std::vector<Rgb> diffuse_all(const RelightableGaussianSet& set, const ShCoefficients& light_sh,
                             std::size_t threads = 0);

// Analytic partial derivatives of the unclamped terms.
//  d diffuse_c / d rho_c             = sum_i L_ic d_ic
//  d specular_c / d v                = sum_j I_jc G_j
//  d (diffuse + specular)_c / d I_jc = rho_c sum_i Y_i(w_j) d_ic + v G_j
Rgb diffuse_albedo_gradient(const SurfaceSample& g, const ShCoefficients& light_sh);
Rgb specular_visibility_gradient(const SurfaceSample& g, const PointLightSet& lights, const Vec3& view);
std::vector<Rgb> intensity_gradient(const SurfaceSample& g, const PointLightSet& lights, const Vec3& view);

// Response of one Gaussian to a unit white light from `light_dir`, before
// clamping; the column entry of an OLAT frame.
Rgb unit_light_response(const SurfaceSample& g, const Vec3& light_dir, const Vec3& view);

}  // namespace relight
