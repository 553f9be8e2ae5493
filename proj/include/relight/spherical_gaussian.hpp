#pragma once

// Spherical-Gaussian specular lobes G(w; a, sigma) = exp((a . w - 1) / sigma).
// Sharpness is 1/sigma; the lobe carries no amplitude of its own.

#include "relight/common.hpp"

namespace relight {

class SpecularLobe {
 public:
  // Throws InvalidInput unless ||axis|| = 1 and 0 < roughness < 1.
  SpecularLobe(const Vec3& axis, double roughness);

  const Vec3& axis() const { return axis_; }
  double roughness() const { return roughness_; }
  double sharpness() const { return 1.0 / roughness_; }

 private:
  Vec3 axis_;
  double roughness_;
};

double sg_eval(const SpecularLobe& lobe, const Vec3& direction);

// Closed-form sphere integral 2 pi sigma (1 - exp(-2 / sigma)). The scalar
// overload accepts any sigma > 0 so the boundary sigma = 1 can be probed.
double sg_sphere_integral(double roughness);
double sg_sphere_integral(const SpecularLobe& lobe);

// Mirror of the view direction about the normal: 2 (w_o . n) n - w_o.
Vec3 reflect_lobe_axis(const Vec3& view, const Vec3& normal);

// Dirac light response intensity * G(light_dir). Throws on negative intensity.
Rgb sg_point_light_response(const SpecularLobe& lobe, const Vec3& light_dir,
                            const Rgb& intensity);

}  // namespace relight
