#include "relight/spherical_gaussian.hpp"

namespace relight {

SpecularLobe::SpecularLobe(const Vec3& axis, double roughness)
    : axis_(axis), roughness_(roughness) {
  require_unit(axis, "specular lobe axis");
  if (!(roughness > 0.0 && roughness < 1.0)) {
    throw InvalidInput("specular roughness must lie in (0, 1), got " + std::to_string(roughness));
  }
}

double sg_eval(const SpecularLobe& lobe, const Vec3& direction) {
  require_unit(direction, "SG evaluation direction");
  return std::exp((lobe.axis().dot(direction) - 1.0) / lobe.roughness());
}

double sg_sphere_integral(double roughness) {
  if (!(roughness > 0.0) || !std::isfinite(roughness)) {
    throw InvalidInput("SG roughness must be positive");
  }
  return 2.0 * kPi * roughness * -std::expm1(-2.0 / roughness);
}

double sg_sphere_integral(const SpecularLobe& lobe) { return sg_sphere_integral(lobe.roughness()); }

Vec3 reflect_lobe_axis(const Vec3& view, const Vec3& normal) {
  require_unit(view, "view direction");
  require_unit(normal, "normal");
  return 2.0 * view.dot(normal) * normal - view;
}

Rgb sg_point_light_response(const SpecularLobe& lobe, const Vec3& light_dir,
                            const Rgb& intensity) {
  if (!intensity.allFinite() || (intensity < 0.0).any()) {
    throw InvalidInput("point light intensity must be finite and non-negative");
  }
  return intensity * sg_eval(lobe, light_dir);
}

}  // namespace relight
