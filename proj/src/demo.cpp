#include "relight/demo.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <random>

#include "relight/spherical_gaussian.hpp"

namespace relight {

DemoPreset parse_demo_preset(const std::string& name) {
  if (name == "sphere-head") return DemoPreset::kSphereHead;
  if (name == "ellipsoid-two-tone") return DemoPreset::kEllipsoidTwoTone;
  throw InvalidInput("unknown demo preset '" + name + "' (expected sphere-head or ellipsoid-two-tone)");
}

std::string demo_preset_name(DemoPreset preset) {
  return preset == DemoPreset::kSphereHead ? "sphere-head" : "ellipsoid-two-tone";
}

CoarseMesh make_uv_sphere(int rings, int segments, const Vec3& radii) {
  if (rings < 2 || segments < 3) throw InvalidInput("UV sphere needs at least 2 rings and 3 segments");
  CoarseMesh mesh;
  // Vertex 0 is the +z pole, then rings 1..rings-1 with `segments` vertices
  // each, then the -z pole.
  mesh.vertices.push_back(Vec3(0.0, 0.0, radii.z()));
  for (int r = 1; r < rings; ++r) {
    const double theta = kPi * r / rings;
    for (int s = 0; s < segments; ++s) {
      const double phi = 2.0 * kPi * s / segments;
      mesh.vertices.push_back(Vec3(radii.x() * std::sin(theta) * std::cos(phi),
                                   radii.y() * std::sin(theta) * std::sin(phi), radii.z() * std::cos(theta)));
    }
  }
  const int south = static_cast<int>(mesh.vertices.size());
  mesh.vertices.push_back(Vec3(0.0, 0.0, -radii.z()));

  auto vid = [&](int r, int s) {
    if (r == 0) return 0;
    if (r == rings) return south;
    return 1 + (r - 1) * segments + (s % segments);
  };
  // UV grid (segments + 1) x (rings + 1); the pole rows get one UV per
  // segment at the segment center.
  auto uid = [&](int r, int s) { return r * (segments + 1) + s; };
  for (int r = 0; r <= rings; ++r) {
    for (int s = 0; s <= segments; ++s) {
      double u = static_cast<double>(s) / segments;
      if ((r == 0 || r == rings) && s < segments) u = (s + 0.5) / segments;
      mesh.uvs.push_back(Vec2(u, static_cast<double>(r) / rings));
    }
  }
  for (int r = 0; r < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      // Outward winding: (r, s) -> (r + 1, s) -> (r + 1, s + 1).
      if (r != rings - 1) {
        mesh.faces.push_back({vid(r, s), vid(r + 1, s), vid(r + 1, s + 1)});
        mesh.uv_faces.push_back({uid(r, s), uid(r + 1, s), uid(r + 1, s + 1)});
      }
      if (r != 0) {
        mesh.faces.push_back({vid(r, s), vid(r + 1, s + 1), vid(r, s + 1)});
        mesh.uv_faces.push_back({uid(r, s), r + 1 == rings ? uid(r + 1, s) : uid(r + 1, s + 1), uid(r, s + 1)});
      }
    }
  }
  return mesh;
}

double clamped_cosine_reconstruction_min(ShOrder order) {
  double lowest = std::numeric_limits<double>::infinity();
  constexpr int kSamples = 20001;
  for (int i = 0; i < kSamples; ++i) {
    const double x = -1.0 + 2.0 * i / (kSamples - 1);
    double p_prev = 1.0, p = x, f = clamped_cosine_band(0) / (4.0 * kPi);
    for (int l = 1; l <= order.n(); ++l) {
      f += clamped_cosine_band(l) * (2 * l + 1) / (4.0 * kPi) * p;
      const double next = ((2 * l + 1) * x * p - l * p_prev) / (l + 1);
      p_prev = p;
      p = next;
    }
    lowest = std::min(lowest, f);
  }
  return lowest;
}

namespace {

// Uniform [0, 1) from the top 53 bits; std distributions are not portable.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double smoothstep(double e0, double e1, double x) {
  const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

}  // namespace

AvatarAsset gen_demo_avatar(const DemoOptions& options) {
  const bool two_tone = options.preset == DemoPreset::kEllipsoidTwoTone;
  const Vec3 radii = two_tone ? Vec3(0.092, 0.085, 0.112) : Vec3(0.1, 0.1, 0.1);
  const int res = options.resolution;
  const ShOrder order = options.sh_order;
  const std::size_t nc = order.count();

  AvatarAsset asset;
  asset.mesh = make_uv_sphere(options.rings, options.segments, radii);
  asset.meta.resolution = res;
  asset.meta.sh_order = order;
  asset.meta.rig_id = "fibonacci-32";
  asset.meta.clamp_roughness = true;
  asset.meta.preset = demo_preset_name(options.preset);
  asset.meta.seed = options.seed;
  asset.planes = ParamPlanes(res, order);
  for (const auto& spec : all_channels(order)) asset.planes.add(spec.name, spec.components);

  std::mt19937_64 rng(options.seed ^ 0x5eed5eedULL);
  double phase[8];
  for (double& p : phase) p = 2.0 * kPi * uniform01(rng);

  const MeshBinding binding = bind_texels(asset.mesh, res);
  // Ambient floor keeping the truncated clamped cosine positive everywhere.
  const double ambient = std::max(0.0, 0.02 - clamped_cosine_reconstruction_min(order));
  const double y00 = 0.5 / std::sqrt(kPi);
  const double opacity_raw = logit(0.92);

  auto put = [&](const char* name, int texel, std::initializer_list<double> values) {
    Plane& p = asset.planes.plane(name);
    std::size_t i = static_cast<std::size_t>(texel) * p.components;
    for (double v : values) p.data[i++] = static_cast<float>(v);
  };

  for (int t = 0; t < res * res; ++t) put(channel::kRotation, t, {1.0, 0.0, 0.0, 0.0});

  for (const TexelBinding& b : binding.texels) {
    const int row = b.texel / res, col = b.texel % res;
    const double u = (col + 0.5) / res, v = (row + 0.5) / res;
    const double theta = kPi * v, phi = 2.0 * kPi * u;
    const double st = std::sin(theta), ct = std::cos(theta), sp = std::sin(phi), cp = std::cos(phi);
    const Vec3 unit(st * cp, st * sp, ct);

    // Tangent frame from the parameterization.
    const Vec3 dphi = 2.0 * kPi * Vec3(-radii.x() * st * sp, radii.y() * st * cp, 0.0);
    const Vec3 dtheta = kPi * Vec3(radii.x() * ct * cp, radii.y() * ct * sp, -radii.z() * st);
    const Vec3 n0 = b.normal_base;
    Vec3 tangent = Vec3(-sp, cp, 0.0);
    tangent = (tangent - tangent.dot(n0) * n0).normalized();
    const Vec3 bitangent = n0.cross(tangent);
    Mat3 frame;
    frame.col(0) = tangent;
    frame.col(1) = bitangent;
    frame.col(2) = n0;
    const Eigen::Quaterniond q(frame);
    put(channel::kRotation, b.texel, {q.w(), q.x(), q.y(), q.z()});

    const double s_b = 0.6 * dtheta.norm() / res;
    const double s_t = std::max(0.6 * dphi.norm() / res, 0.15 * s_b);
    const double s_n = 0.3 * std::min(s_t, s_b);
    put(channel::kScale, b.texel, {inverse_softplus(s_t), inverse_softplus(s_b), inverse_softplus(s_n)});
    put(channel::kOpacity, b.texel, {opacity_raw});
    put(channel::kMask, b.texel, {1.0});

    Vec3 dn = Vec3::Zero();
    if (two_tone) {
      dn = 0.06 * (std::sin(6.0 * phi + phase[6]) * tangent + std::cos(5.0 * theta + phase[7]) * bitangent);
    }
    put(channel::kNormalResidual, b.texel, {dn.x(), dn.y(), dn.z()});
    // The stored residual is float; shade against exactly what will be assembled.
    auto dnf = asset.planes.texel(channel::kNormalResidual, b.texel);
    const Vec3 normal = compose_normal(n0, Vec3(dnf[0], dnf[1], dnf[2]));

    const double wave = std::sin(3.0 * phi + phase[0]) * std::sin(2.0 * theta + phase[1]);
    Rgb albedo(0.78, 0.57, 0.47);
    albedo *= 1.0 + 0.12 * wave;
    albedo[0] += 0.06 * std::sin(4.0 * theta + phase[2]);
    double sigma = 0.08 + 0.2 * (0.5 + 0.5 * std::sin(2.0 * phi + phase[3]) * std::cos(3.0 * theta + phase[4]));
    double vis = 0.2 + 0.3 * (0.5 + 0.5 * std::sin(phi + theta + phase[5]));
    if (two_tone) {
      const double hair = std::max(smoothstep(0.35, 0.5, unit.z()),
                                   smoothstep(0.0, 0.2, -unit.x()) * smoothstep(-0.45, -0.3, unit.z()));
      albedo = (1.0 - hair) * albedo + hair * Rgb(0.16, 0.10, 0.07) * (1.0 + 0.1 * wave);
      sigma = (1.0 - hair) * sigma + hair * (0.22 + 0.06 * wave);
      vis = (1.0 - hair) * vis + hair * 0.3;
    }
    albedo = albedo.max(0.01).min(0.99);
    put(channel::kAlbedo, b.texel, {albedo[0], albedo[1], albedo[2]});
    put(channel::kRoughness, b.texel, {std::log(sigma)});
    put(channel::kVisibility, b.texel, {logit(vis)});

    // Lambertian transfer with a soft ambient-occlusion factor toward -z.
    const double ao = 0.7 + 0.3 * (0.5 + 0.5 * unit.z());
    std::vector<double> c = clamped_cosine_sh(normal, order);
    c[0] += ambient / y00;
    Plane& tp = asset.planes.plane(channel::kShTransfer);
    for (std::size_t i = 0; i < nc; ++i) {
      const float d = static_cast<float>(ao * c[i] / kPi);
      for (int ch = 0; ch < 3; ++ch) tp.data[static_cast<std::size_t>(b.texel) * nc * 3 + 3 * i + ch] = d;
    }

    // Full-on color: unit white constant environment, diffuse plus specular.
    const double d0 = tp.data[static_cast<std::size_t>(b.texel) * nc * 3];
    const Rgb fullon = albedo * (d0 / y00) + vis * sg_sphere_integral(sigma);
    put(channel::kColorFullOn, b.texel, {fullon[0], fullon[1], fullon[2]});
  }
  for (const auto& [name, plane] : asset.planes.planes()) asset.meta.channels.push_back({name, plane.components});
  return asset;
}

}  // namespace relight
