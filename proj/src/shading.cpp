#include "relight/shading.hpp"

#include <algorithm>

#include "relight/parallel.hpp"

namespace relight {

namespace {

// Transfer function reconstructed from d in direction w: sum_i Y_i(w) d_i.
Rgb transfer_at(const SurfaceSample& g, const Vec3& direction, std::span<double> basis, ShOrder order) {
  eval_sh_basis_unchecked(direction, order, basis);
  Rgb sum = Rgb::Zero();
  for (std::size_t i = 0; i < g.transfer.size(); ++i) sum += g.transfer[i] * basis[i];
  return sum;
}

ShOrder order_of(const SurfaceSample& g) {
  const int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(g.transfer.size())))) - 1;
  ShOrder order(n);
  if (order.count() != g.transfer.size()) throw InvalidInput("transfer length is not a square SH count");
  return order;
}

SpecularLobe lobe_for(const SurfaceSample& g, const Vec3& view) {
  require_unit(view, "view direction");
  Vec3 axis = reflect_lobe_axis(view, g.normal);
  // Mirroring preserves length to rounding; re-normalise to hold the lobe invariant.
  axis.normalize();
  return SpecularLobe(axis, g.roughness);
}

}  // namespace

Rgb shade_diffuse(const SurfaceSample& g, const ShCoefficients& light_sh) {
  if (light_sh.size() != g.transfer.size()) {
    throw InvalidInput("SH order mismatch between light and transfer");
  }
  return g.albedo * sh_dot(light_sh.coeffs(), g.transfer);
}

Rgb shade_specular_point(const SurfaceSample& g, const PointLightSet& lights, const Vec3& view) {
  const SpecularLobe lobe = lobe_for(g, view);
  Rgb sum = Rgb::Zero();
  for (std::size_t j = 0; j < lights.size(); ++j) {
    sum += sg_point_light_response(lobe, lights.directions[j], lights.intensities[j]);
  }
  return g.visibility * sum;
}

Rgb shade_specular_env(const SurfaceSample& g, const PrefilteredEnvMap& env, const Vec3& view, bool* clamped) {
  const SpecularLobe lobe = lobe_for(g, view);
  return g.visibility * env.lookup(lobe.axis(), lobe.roughness(), clamped);
}

ShCoefficients point_lights_to_sh(const PointLightSet& lights, ShOrder order) {
  lights.validate();
  ShCoefficients sh(order);
  std::vector<double> basis(order.count());
  for (std::size_t j = 0; j < lights.size(); ++j) {
    eval_sh_basis_unchecked(lights.directions[j], order, basis);
    for (std::size_t i = 0; i < basis.size(); ++i) sh[i] += lights.intensities[j] * basis[i];
  }
  return sh;
}

LightCondition prepare_point_lights(PointLightSet lights, ShOrder order) {
  ShCoefficients sh = point_lights_to_sh(lights, order);
  return PointLightCondition{std::move(lights), std::move(sh)};
}

LightCondition prepare_environment(const EnvironmentMap& env, ShOrder order, std::span<const double> ladder,
                                   const PrefilterOptions& options) {
  return EnvironmentCondition{env_to_sh(env, order), prefilter_env(env, ladder, options)};
}

ShadeTerms shade_terms(const SurfaceSample& g, const LightCondition& condition, const Vec3& view,
                       ShadeStats* stats) {
  if (const auto* point = std::get_if<PointLightCondition>(&condition)) {
    return {shade_diffuse(g, point->sh), shade_specular_point(g, point->lights, view)};
  }
  const auto& env = std::get<EnvironmentCondition>(condition);
  bool clamped = false;
  ShadeTerms terms{shade_diffuse(g, env.sh), shade_specular_env(g, env.prefiltered, view, &clamped)};
  if (clamped && stats) ++stats->roughness_clamped;
  return terms;
}

Rgb shade(const SurfaceSample& g, const LightCondition& condition, const Vec3& view, ShadeStats* stats) {
  const ShadeTerms terms = shade_terms(g, condition, view, stats);
  const Rgb sum = terms.diffuse + terms.specular;
  if (stats) stats->clamp_activations += static_cast<std::size_t>((sum < 0.0).count());
  return sum.max(0.0);
}

Vec3 view_direction(const Vec3& position, const Vec3& camera_center) {
  const Vec3 d = camera_center - position;
  const double len = d.norm();
  if (!(len > 0.0)) throw InvalidInput("Gaussian coincides with the camera center");
  return d / len;
}

std::vector<Rgb> shade_all(const RelightableGaussianSet& set, const LightCondition& condition,
                           const Vec3& camera_center, ShadeStats* stats, std::size_t threads) {
  std::vector<Rgb> colors(set.size());
  const std::size_t n = set.size();
  const std::size_t blocks = std::min<std::size_t>(n == 0 ? 1 : n, 64);
  std::vector<ShadeStats> block_stats(blocks);
  parallel_for(blocks, threads, [&](std::size_t b0, std::size_t b1) {
    for (std::size_t b = b0; b < b1; ++b) {
      const std::size_t begin = n * b / blocks;
      const std::size_t end = n * (b + 1) / blocks;
      for (std::size_t k = begin; k < end; ++k) {
        const Vec3 view = view_direction(set.geometry.positions[k], camera_center);
        colors[k] = shade(set.surface(k), condition, view, &block_stats[b]);
      }
    }
  });
  if (stats) {
    for (const auto& s : block_stats) {
      stats->clamp_activations += s.clamp_activations;
      stats->roughness_clamped += s.roughness_clamped;
    }
  }
  return colors;
}

std::vector<Rgb> diffuse_all(const RelightableGaussianSet& set, const ShCoefficients& light_sh,
                             std::size_t threads) {
  std::vector<Rgb> out(set.size());
  parallel_for(set.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) out[k] = shade_diffuse(set.surface(k), light_sh);
  });
  return out;
}

Rgb diffuse_albedo_gradient(const SurfaceSample& g, const ShCoefficients& light_sh) {
  if (light_sh.size() != g.transfer.size()) throw InvalidInput("SH order mismatch between light and transfer");
  return sh_dot(light_sh.coeffs(), g.transfer);
}

Rgb specular_visibility_gradient(const SurfaceSample& g, const PointLightSet& lights, const Vec3& view) {
  const SpecularLobe lobe = lobe_for(g, view);
  Rgb sum = Rgb::Zero();
  for (std::size_t j = 0; j < lights.size(); ++j) {
    sum += sg_point_light_response(lobe, lights.directions[j], lights.intensities[j]);
  }
  return sum;
}

std::vector<Rgb> intensity_gradient(const SurfaceSample& g, const PointLightSet& lights, const Vec3& view) {
  std::vector<Rgb> grads;
  grads.reserve(lights.size());
  for (const auto& dir : lights.directions) grads.push_back(unit_light_response(g, dir, view));
  return grads;
}

Rgb unit_light_response(const SurfaceSample& g, const Vec3& light_dir, const Vec3& view) {
  const ShOrder order = order_of(g);
  std::vector<double> basis(order.count());
  const Rgb diffuse = g.albedo * transfer_at(g, light_dir, basis, order);
  const SpecularLobe lobe = lobe_for(g, view);
  return diffuse + g.visibility * sg_eval(lobe, light_dir);
}

}  // namespace relight
