#include "relight/avatar_model.hpp"

#include <algorithm>
#include <cmath>

namespace relight {

void CoarseMesh::validate() const {
  if (faces.size() != uv_faces.size()) {
    throw InvalidAsset("face count " + std::to_string(faces.size()) + " != uv face count " +
                       std::to_string(uv_faces.size()), "mesh");
  }
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (int c = 0; c < 3; ++c) {
      if (faces[f][c] < 0 || static_cast<std::size_t>(faces[f][c]) >= vertices.size()) {
        throw InvalidAsset("face " + std::to_string(f) + " references missing vertex", "mesh");
      }
      if (uv_faces[f][c] < 0 || static_cast<std::size_t>(uv_faces[f][c]) >= uvs.size()) {
        throw InvalidAsset("face " + std::to_string(f) + " references missing uv", "mesh");
      }
    }
  }
  for (std::size_t i = 0; i < uvs.size(); ++i) {
    const Vec2& uv = uvs[i];
    if (!uv.allFinite() || uv.x() < 0.0 || uv.x() > 1.0 || uv.y() < 0.0 || uv.y() > 1.0) {
      throw InvalidAsset("uv " + std::to_string(i) + " outside [0,1]^2", "mesh");
    }
  }
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    if (!vertices[i].allFinite()) throw InvalidAsset("vertex " + std::to_string(i) + " is not finite", "mesh");
  }
}

std::vector<Vec3> CoarseMesh::vertex_normals() const {
  std::vector<Vec3> normals(vertices.size(), Vec3::Zero());
  for (const auto& f : faces) {
    // Unnormalised cross product = 2 * area * face normal.
    const Vec3 n = (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]);
    for (int c = 0; c < 3; ++c) normals[f[c]] += n;
  }
  for (auto& n : normals) {
    const double len = n.norm();
    if (len > 0.0) n /= len;
  }
  return normals;
}

double CoarseMesh::median_edge_length() const {
  std::vector<double> lengths;
  lengths.reserve(faces.size() * 3);
  for (const auto& f : faces) {
    for (int c = 0; c < 3; ++c) lengths.push_back((vertices[f[c]] - vertices[f[(c + 1) % 3]]).norm());
  }
  if (lengths.empty()) return 0.0;
  auto mid = lengths.begin() + static_cast<std::ptrdiff_t>(lengths.size() / 2);
  std::nth_element(lengths.begin(), mid, lengths.end());
  return *mid;
}

namespace {

std::string join_faces(const std::vector<int>& faces) {
  std::string s;
  for (std::size_t i = 0; i < faces.size(); ++i) s += (i ? ", " : "") + std::to_string(faces[i]);
  return s;
}

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Edge function of the directed edge a->b at p, evaluated with the endpoints
// in a canonical order so that the reversed edge yields the exact negation.
double edge_function(const Vec2& a, const Vec2& b, const Vec2& p) {
  const bool ordered = a.x() < b.x() || (a.x() == b.x() && a.y() <= b.y());
  const Vec2& lo = ordered ? a : b;
  const Vec2& hi = ordered ? b : a;
  const double e = cross2(hi - lo, p - lo);
  return ordered ? e : -e;
}

// Inclusion of a sample lying exactly on edge a->b of a counter-clockwise
// triangle: decided by nudging the sample by (+eps, +eps^2).
bool owns_edge(const Vec2& a, const Vec2& b) {
  const double dy = b.y() - a.y();
  if (dy != 0.0) return dy < 0.0;
  return b.x() - a.x() > 0.0;
}

struct UvTriangle {
  Vec2 p[3];      // texel-space corners, counter-clockwise
  int corner[3];  // original corner index of p[i]
  double area2;
};

bool make_triangle(const CoarseMesh& mesh, int face, int resolution, UvTriangle& tri) {
  for (int c = 0; c < 3; ++c) {
    tri.p[c] = mesh.uvs[mesh.uv_faces[face][c]] * resolution;
    tri.corner[c] = c;
  }
  tri.area2 = cross2(tri.p[1] - tri.p[0], tri.p[2] - tri.p[0]);
  if (tri.area2 == 0.0) return false;
  if (tri.area2 < 0.0) {
    std::swap(tri.p[1], tri.p[2]);
    std::swap(tri.corner[1], tri.corner[2]);
    tri.area2 = -tri.area2;
  }
  return true;
}

bool covers(const UvTriangle& tri, const Vec2& s, Vec3& weights) {
  double e[3];
  for (int i = 0; i < 3; ++i) {
    const Vec2& a = tri.p[(i + 1) % 3];
    const Vec2& b = tri.p[(i + 2) % 3];
    e[i] = edge_function(a, b, s);
    if (e[i] < 0.0 || (e[i] == 0.0 && !owns_edge(a, b))) return false;
  }
  for (int i = 0; i < 3; ++i) weights[tri.corner[i]] = e[i] / tri.area2;
  return true;
}

}  // namespace

OverlappingUvError::OverlappingUvError(int texel, std::vector<int> faces)
    : InvalidAsset("texel " + std::to_string(texel) + " covered by overlapping UV faces " + join_faces(faces),
                   "mesh"),
      texel_(texel),
      faces_(std::move(faces)) {}

MeshBinding bind_texels(const CoarseMesh& mesh, int resolution) {
  mesh.validate();
  if (resolution <= 0) throw InvalidInput("binding resolution must be positive");
  const std::vector<Vec3> vnormals = mesh.vertex_normals();
  const std::size_t texel_count = static_cast<std::size_t>(resolution) * resolution;
  std::vector<std::int32_t> owner(texel_count, -1);
  std::vector<Vec3> weights(texel_count, Vec3::Zero());

  for (int f = 0; f < static_cast<int>(mesh.faces.size()); ++f) {
    UvTriangle tri;
    if (!make_triangle(mesh, f, resolution, tri)) continue;
    const double min_x = std::min({tri.p[0].x(), tri.p[1].x(), tri.p[2].x()});
    const double max_x = std::max({tri.p[0].x(), tri.p[1].x(), tri.p[2].x()});
    const double min_y = std::min({tri.p[0].y(), tri.p[1].y(), tri.p[2].y()});
    const double max_y = std::max({tri.p[0].y(), tri.p[1].y(), tri.p[2].y()});
    const int c0 = std::max(0, static_cast<int>(std::floor(min_x - 0.5)));
    const int c1 = std::min(resolution - 1, static_cast<int>(std::ceil(max_x - 0.5)));
    const int r0 = std::max(0, static_cast<int>(std::floor(min_y - 0.5)));
    const int r1 = std::min(resolution - 1, static_cast<int>(std::ceil(max_y - 0.5)));
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        Vec3 w;
        if (!covers(tri, Vec2(c + 0.5, r + 0.5), w)) continue;
        const std::size_t t = static_cast<std::size_t>(r) * resolution + c;
        if (owner[t] >= 0) {
          std::vector<int> offenders;
          Vec3 unused;
          for (int g = 0; g < static_cast<int>(mesh.faces.size()); ++g) {
            UvTriangle other;
            if (make_triangle(mesh, g, resolution, other) && covers(other, Vec2(c + 0.5, r + 0.5), unused)) {
              offenders.push_back(g);
            }
          }
          throw OverlappingUvError(static_cast<int>(t), offenders);
        }
        owner[t] = f;
        weights[t] = w;
      }
    }
  }

  MeshBinding binding;
  binding.resolution = resolution;
  binding.texel_to_gaussian.assign(texel_count, -1);
  for (std::size_t t = 0; t < texel_count; ++t) {
    if (owner[t] < 0) continue;
    const auto& face = mesh.faces[owner[t]];
    const Vec3& w = weights[t];
    TexelBinding b;
    b.texel = static_cast<int>(t);
    b.face = owner[t];
    b.barycentric = w;
    b.surface_point = w[0] * mesh.vertices[face[0]] + w[1] * mesh.vertices[face[1]] + w[2] * mesh.vertices[face[2]];
    const Vec3 n = w[0] * vnormals[face[0]] + w[1] * vnormals[face[1]] + w[2] * vnormals[face[2]];
    const double len = n.norm();
    if (!(len > 1e-12)) {
      throw NumericError("texel " + std::to_string(t) + " has a degenerate interpolated mesh normal");
    }
    b.normal_base = n / len;
    binding.texel_to_gaussian[t] = static_cast<std::int32_t>(binding.texels.size());
    binding.texels.push_back(b);
  }
  return binding;
}

std::vector<ChannelSpec> geometry_channels() {
  return {{channel::kOffset, 3}, {channel::kRotation, 4}, {channel::kScale, 3}, {channel::kOpacity, 1}};
}

std::vector<ChannelSpec> fullon_channels() {
  auto c = geometry_channels();
  c.push_back({channel::kColorFullOn, 3});
  return c;
}

std::vector<ChannelSpec> relightable_channels(ShOrder order) {
  auto c = geometry_channels();
  c.push_back({channel::kAlbedo, 3});
  c.push_back({channel::kShTransfer, static_cast<int>(order.count()) * 3});
  c.push_back({channel::kRoughness, 1});
  c.push_back({channel::kVisibility, 1});
  c.push_back({channel::kNormalResidual, 3});
  return c;
}

std::vector<ChannelSpec> all_channels(ShOrder order) {
  auto c = relightable_channels(order);
  c.insert(c.begin() + 4, ChannelSpec{channel::kColorFullOn, 3});
  c.push_back({channel::kMask, 1});
  return c;
}

ParamPlanes::ParamPlanes(int resolution, ShOrder order) : resolution_(resolution), sh_order_(order) {
  if (resolution <= 0) throw InvalidInput("plane resolution must be positive");
}

void ParamPlanes::set(const std::string& name, int components, std::vector<float> data) {
  if (components <= 0 || data.size() != texel_count() * static_cast<std::size_t>(components)) {
    throw InvalidAsset("plane holds " + std::to_string(data.size()) + " floats, expected " +
                       std::to_string(texel_count()) + " x " + std::to_string(components), name);
  }
  planes_[name] = Plane{components, std::move(data)};
}

Plane& ParamPlanes::add(const std::string& name, int components) {
  set(name, components, std::vector<float>(texel_count() * static_cast<std::size_t>(components), 0.0f));
  return planes_[name];
}

const Plane& ParamPlanes::plane(const std::string& name) const {
  auto it = planes_.find(name);
  if (it == planes_.end()) throw InvalidAsset("missing plane", name);
  return it->second;
}

Plane& ParamPlanes::plane(const std::string& name) {
  auto it = planes_.find(name);
  if (it == planes_.end()) throw InvalidAsset("missing plane", name);
  return it->second;
}

std::span<const float> ParamPlanes::texel(const std::string& name, int texel) const {
  const Plane& p = plane(name);
  return std::span<const float>(p.data).subspan(static_cast<std::size_t>(texel) * p.components, p.components);
}

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double inverse_softplus(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }
double roughness_from_raw(double raw) { return std::clamp(std::exp(raw), kRoughnessMin, kRoughnessMax); }

Vec3 compose_normal(const Vec3& base, const Vec3& residual) {
  const Vec3 n = base + residual;
  const double len = n.norm();
  if (!(len >= 1e-8)) throw NumericError("degenerate normal: ||n-hat + dn|| < 1e-8");
  return n / len;
}

namespace {

void require_components(const ParamPlanes& planes, const std::string& name, int components) {
  const Plane& p = planes.plane(name);
  if (p.components != components) {
    throw InvalidAsset("expected " + std::to_string(components) + " components, found " +
                       std::to_string(p.components), name);
  }
}

Vec3 read3(const ParamPlanes& planes, const char* name, int texel) {
  auto v = planes.texel(name, texel);
  return {v[0], v[1], v[2]};
}

void check_binding(const ParamPlanes& planes, const MeshBinding& binding) {
  if (binding.resolution != planes.resolution()) {
    throw InvalidAsset("binding resolution " + std::to_string(binding.resolution) +
                       " differs from plane resolution " + std::to_string(planes.resolution()));
  }
}

// Covered texels whose mask is nonzero; every covered texel without a mask.
std::vector<const TexelBinding*> kept_texels(const ParamPlanes& planes, const MeshBinding& binding) {
  std::vector<const TexelBinding*> kept;
  kept.reserve(binding.covered());
  const Plane* mask = planes.has(channel::kMask) ? &planes.plane(channel::kMask) : nullptr;
  if (mask && mask->components != 1) throw InvalidAsset("mask must have one component", channel::kMask);
  for (const TexelBinding& b : binding.texels) {
    if (!mask || mask->data[static_cast<std::size_t>(b.texel)] != 0.0f) kept.push_back(&b);
  }
  return kept;
}

GaussianGeometry assemble_geometry(const ParamPlanes& planes, const std::vector<const TexelBinding*>& kept,
                                   std::vector<Vec3>& offsets) {
  for (const auto& spec : geometry_channels()) require_components(planes, spec.name, spec.components);
  GaussianGeometry g;
  const std::size_t n = kept.size();
  g.positions.resize(n);
  g.rotations.resize(n);
  g.scales.resize(n);
  g.opacities.resize(n);
  offsets.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const TexelBinding& b = *kept[k];
    offsets[k] = read3(planes, channel::kOffset, b.texel);
    g.positions[k] = b.surface_point + offsets[k];

    auto q = planes.texel(channel::kRotation, b.texel);
    Vec4 quat(q[0], q[1], q[2], q[3]);
    const double len = quat.norm();
    if (!(len > 0.0) || !std::isfinite(len)) {
      throw InvalidAsset("texel " + std::to_string(b.texel) + " has a zero or non-finite quaternion",
                         channel::kRotation);
    }
    g.rotations[k] = quat / len;

    const Vec3 raw_scale = read3(planes, channel::kScale, b.texel);
    g.scales[k] = Vec3(softplus(raw_scale.x()), softplus(raw_scale.y()), softplus(raw_scale.z()));
    g.opacities[k] = sigmoid(planes.texel(channel::kOpacity, b.texel)[0]);
  }
  return g;
}

}  // namespace

FullOnGaussianSet assemble_fullon(const ParamPlanes& planes, const MeshBinding& binding) {
  check_binding(planes, binding);
  require_components(planes, channel::kColorFullOn, 3);
  const auto kept = kept_texels(planes, binding);
  FullOnGaussianSet set;
  set.geometry = assemble_geometry(planes, kept, set.offsets);
  set.colors.resize(kept.size());
  set.texels.resize(kept.size());
  for (std::size_t k = 0; k < kept.size(); ++k) {
    const int t = kept[k]->texel;
    set.colors[k] = read3(planes, channel::kColorFullOn, t).array();
    set.texels[k] = t;
  }
  return set;
}

RelightableGaussianSet assemble_relightable(const ParamPlanes& planes, const MeshBinding& binding,
                                            const AssembleOptions& options) {
  check_binding(planes, binding);
  const ShOrder order = planes.sh_order();
  for (const auto& spec : relightable_channels(order)) require_components(planes, spec.name, spec.components);

  RelightableGaussianSet set;
  set.sh_order = order;
  const auto kept = kept_texels(planes, binding);
  set.geometry = assemble_geometry(planes, kept, set.offsets);
  const std::size_t n = kept.size();
  const std::size_t nc = order.count();
  set.albedo.resize(n);
  set.transfer.resize(n * nc);
  set.roughness.resize(n);
  set.visibility.resize(n);
  set.normal_base.resize(n);
  set.normal_residual.resize(n);
  set.normals.resize(n);
  set.texels.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const TexelBinding& b = *kept[k];
    set.texels[k] = b.texel;
    set.albedo[k] = read3(planes, channel::kAlbedo, b.texel).array();
    auto d = planes.texel(channel::kShTransfer, b.texel);
    for (std::size_t i = 0; i < nc; ++i) set.transfer[k * nc + i] = Rgb(d[3 * i], d[3 * i + 1], d[3 * i + 2]);

    const double raw_sigma = planes.texel(channel::kRoughness, b.texel)[0];
    if (options.clamp_roughness) {
      set.roughness[k] = roughness_from_raw(raw_sigma);
    } else {
      const double sigma = std::exp(raw_sigma);
      if (!(sigma > 0.0 && sigma < 1.0)) {
        throw InvalidAsset("texel " + std::to_string(b.texel) + " roughness " + std::to_string(sigma) +
                           " violates SpecularLobe.roughness in (0,1)", channel::kRoughness);
      }
      set.roughness[k] = sigma;
    }
    set.visibility[k] = sigmoid(planes.texel(channel::kVisibility, b.texel)[0]);
    set.normal_base[k] = b.normal_base;
    set.normal_residual[k] = read3(planes, channel::kNormalResidual, b.texel);
    try {
      set.normals[k] = compose_normal(b.normal_base, set.normal_residual[k]);
    } catch (const NumericError&) {
      throw NumericError("Gaussian " + std::to_string(k) + " (texel " + std::to_string(b.texel) +
                         "): degenerate normal, ||n-hat + dn|| < 1e-8");
    }
  }
  return set;
}

}  // namespace relight
