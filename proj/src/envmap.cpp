#include "relight/envmap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "relight/parallel.hpp"
#include "relight/spherical_gaussian.hpp"

namespace relight {

Vec3 equirect_direction(double u, double v) {
  const double theta = v * kPi;
  const double phi = u * 2.0 * kPi;
  const double s = std::sin(theta);
  return {s * std::cos(phi), s * std::sin(phi), std::cos(theta)};
}

Vec2 equirect_coords(const Vec3& d) {
  double phi = std::atan2(d.y(), d.x());
  if (phi < 0.0) phi += 2.0 * kPi;
  const double theta = std::acos(std::clamp(d.z(), -1.0, 1.0));
  return {phi / (2.0 * kPi), theta / kPi};
}

EnvironmentMap::EnvironmentMap(int width, int height, std::vector<Rgb> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (height <= 0 || width != 2 * height) {
    throw InvalidInput("environment map must satisfy width = 2 * height > 0, got " +
                       std::to_string(width) + "x" + std::to_string(height));
  }
  if (pixels_.size() != static_cast<std::size_t>(width) * height) {
    throw InvalidInput("environment map pixel count does not match its size");
  }
  for (const auto& p : pixels_) {
    if (!p.allFinite() || (p < 0.0).any()) {
      throw InvalidInput("environment map pixels must be finite and non-negative");
    }
  }
}

EnvironmentMap EnvironmentMap::constant(int height, const Rgb& value) {
  return {2 * height, height, std::vector<Rgb>(static_cast<std::size_t>(2 * height) * height, value)};
}

EnvironmentMap EnvironmentMap::from_image(const FloatImage& image) {
  std::vector<Rgb> pixels(static_cast<std::size_t>(image.width) * image.height);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    pixels[i] = Rgb(image.rgb[3 * i], image.rgb[3 * i + 1], image.rgb[3 * i + 2]);
  }
  return {image.width, image.height, std::move(pixels)};
}

FloatImage EnvironmentMap::to_image() const {
  FloatImage image(width_, height_);
  for (std::size_t i = 0; i < pixels_.size(); ++i) {
    for (int c = 0; c < 3; ++c) image.rgb[3 * i + c] = static_cast<float>(pixels_[i][c]);
  }
  return image;
}

Vec3 EnvironmentMap::texel_direction(int col, int row) const {
  return equirect_direction((col + 0.5) / width_, (row + 0.5) / height_);
}

double EnvironmentMap::texel_solid_angle(int row) const {
  const double top = kPi * row / height_, bottom = kPi * (row + 1) / height_;
  return (2.0 * kPi / width_) * (std::cos(top) - std::cos(bottom));
}

Rgb EnvironmentMap::integrated_energy() const {
  Rgb total = Rgb::Zero();
  for (int row = 0; row < height_; ++row) {
    Rgb row_sum = Rgb::Zero();
    for (int col = 0; col < width_; ++col) row_sum += at(col, row);
    total += row_sum * texel_solid_angle(row);
  }
  return total;
}

Rgb sample_env(const EnvironmentMap& map, const Vec3& direction) {
  if (map.empty()) throw InvalidInput("cannot sample an empty environment map");
  const Vec2 uv = equirect_coords(direction);
  const double x = uv.x() * map.width() - 0.5;
  const double y = uv.y() * map.height() - 0.5;
  const double x0f = std::floor(x);
  const double y0f = std::floor(y);
  const double fx = x - x0f;
  const double fy = y - y0f;
  const int w = map.width();
  auto wrap = [w](int c) { return ((c % w) + w) % w; };
  auto clamp_row = [&map](int r) { return std::clamp(r, 0, map.height() - 1); };
  const int x0 = wrap(static_cast<int>(x0f));
  const int x1 = wrap(static_cast<int>(x0f) + 1);
  const int y0 = clamp_row(static_cast<int>(y0f));
  const int y1 = clamp_row(static_cast<int>(y0f) + 1);
  const Rgb top = map.at(x0, y0) * (1.0 - fx) + map.at(x1, y0) * fx;
  const Rgb bottom = map.at(x0, y1) * (1.0 - fx) + map.at(x1, y1) * fx;
  return top * (1.0 - fy) + bottom * fy;
}

ShCoefficients env_to_sh(const EnvironmentMap& map, ShOrder order) {
  if (map.empty() || map.width() * map.height() == 0) {
    throw InvalidInput("cannot project a zero-area environment map");
  }
  ShCoefficients result(order);
  std::vector<double> basis(order.count());
  for (int row = 0; row < map.height(); ++row) {
    const double solid_angle = map.texel_solid_angle(row);
    for (int col = 0; col < map.width(); ++col) {
      const Rgb value = map.at(col, row) * solid_angle;
      eval_sh_basis_unchecked(map.texel_direction(col, row), order, basis);
      for (std::size_t i = 0; i < basis.size(); ++i) result[i] += value * basis[i];
    }
  }
  return result;
}

namespace {

// Overlap of source cells [i, i + 1) / n with target cells [j, j + 1) / m on
// the unit interval, as (source, target, length) triples.
struct Overlap {
  int src, dst;
  double length;
};

std::vector<Overlap> interval_overlaps(int n, int m) {
  std::vector<Overlap> out;
  int i = 0, j = 0;
  double pos = 0.0;
  while (i < n && j < m) {
    const double a_end = static_cast<double>(i + 1) / n, b_end = static_cast<double>(j + 1) / m;
    const double end = std::min(a_end, b_end);
    if (end > pos) out.push_back({i, j, end - pos});
    pos = end;
    if (a_end <= end) ++i;
    if (b_end <= end) ++j;
  }
  return out;
}

// Gauss-Legendre rule on [-1, 1].
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5)), dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int l = 2; l <= n; ++l) {
        const double p2 = ((2.0 * l - 1.0) * z * p1 - (l - 1.0) * p0) / l;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

}  // namespace

EnvironmentMap downsample_env(const EnvironmentMap& map, int height) {
  if (map.empty()) throw InvalidInput("cannot resample an empty environment map");
  if (height <= 0) throw InvalidInput("target height must be positive");
  const int width = 2 * height;
  // Exact area-overlap resampling: each target texel averages the source
  // over its footprint, weighted by the solid angle of each overlap, so the
  // integrated energy is preserved.
  std::vector<Overlap> rows = interval_overlaps(map.height(), height);
  for (auto& r : rows) {
    // Solid-angle measure of the overlapping polar band.
    const double top = kPi * std::max(static_cast<double>(r.src) / map.height(), static_cast<double>(r.dst) / height);
    r.length = std::cos(top) - std::cos(top + kPi * r.length);
  }
  const std::vector<Overlap> cols = interval_overlaps(map.width(), width);
  std::vector<Rgb> sums(static_cast<std::size_t>(width) * height, Rgb::Zero());
  std::vector<double> weights(sums.size(), 0.0);
  for (const auto& r : rows) {
    for (const auto& c : cols) {
      const double w = r.length * c.length;
      const std::size_t o = static_cast<std::size_t>(r.dst) * width + c.dst;
      sums[o] += map.at(c.src, r.src) * w;
      weights[o] += w;
    }
  }
  std::vector<Rgb> pixels(sums.size());
  for (std::size_t o = 0; o < sums.size(); ++o) pixels[o] = weights[o] > 0.0 ? Rgb(sums[o] / weights[o]) : Rgb::Zero();
  return {width, height, std::move(pixels)};
}

EnvironmentMap rotate_env_columns(const EnvironmentMap& map, int columns) {
  std::vector<Rgb> pixels(map.pixels().size());
  const int w = map.width();
  for (int row = 0; row < map.height(); ++row) {
    for (int col = 0; col < w; ++col) {
      const int dst = (((col + columns) % w) + w) % w;
      pixels[static_cast<std::size_t>(row) * w + dst] = map.at(col, row);
    }
  }
  return {w, map.height(), std::move(pixels)};
}

const std::vector<double>& default_prefilter_ladder() {
  static const std::vector<double> ladder{0.02, 0.05, 0.1, 0.2, 0.4, 0.8};
  return ladder;
}

PrefilteredEnvMap::PrefilteredEnvMap(EnvironmentMap base, std::vector<PrefilterLevel> levels)
    : base_(std::move(base)), levels_(std::move(levels)) {
  if (levels_.empty()) throw InvalidInput("prefiltered map needs at least one level");
  for (std::size_t i = 1; i < levels_.size(); ++i) {
    if (!(levels_[i - 1].roughness < levels_[i].roughness)) {
      throw InvalidInput("prefilter levels must be sorted by roughness");
    }
  }
}

Rgb PrefilteredEnvMap::lookup(const Vec3& axis, double roughness, bool* clamped) const {
  bool out_of_range = false;
  double sigma = roughness;
  if (sigma < min_roughness()) {
    sigma = min_roughness();
    out_of_range = true;
  } else if (sigma > max_roughness()) {
    sigma = max_roughness();
    out_of_range = true;
  }
  if (clamped) *clamped = out_of_range;

  auto normalized = [&](const PrefilterLevel& level) -> Rgb {
    return sample_env(level.filtered, axis) / sg_sphere_integral(level.roughness);
  };
  std::size_t hi = 0;
  while (hi < levels_.size() && levels_[hi].roughness < sigma) ++hi;
  Rgb radiance;
  if (hi == 0) {
    radiance = normalized(levels_.front());
  } else if (hi == levels_.size()) {
    radiance = normalized(levels_.back());
  } else {
    const auto& a = levels_[hi - 1];
    const auto& b = levels_[hi];
    const double t = (std::log(sigma) - std::log(a.roughness)) / (std::log(b.roughness) - std::log(a.roughness));
    radiance = normalized(a) * (1.0 - t) + normalized(b) * t;
  }
  return radiance * sg_sphere_integral(sigma);
}

PrefilteredEnvMap prefilter_env(const EnvironmentMap& map, std::span<const double> sigmas,
                                const PrefilterOptions& options) {
  if (map.empty()) throw InvalidInput("cannot prefilter an empty environment map");
  if (sigmas.empty()) throw InvalidInput("prefilter needs at least one roughness");
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    if (!(sigmas[i] > 0.0 && sigmas[i] < 1.0)) {
      throw InvalidInput("prefilter roughness must lie in (0, 1)");
    }
    if (i > 0 && !(sigmas[i - 1] < sigmas[i])) {
      throw InvalidInput("prefilter roughness ladder must be strictly ascending");
    }
  }
  const EnvironmentMap source =
      map.height() > options.max_height ? downsample_env(map, options.max_height) : map;
  const int w = source.width();
  const int h = source.height();

  std::vector<double> sin_theta(h), cos_theta(h);
  for (int r = 0; r < h; ++r) {
    const double theta = (r + 0.5) * kPi / h;
    sin_theta[r] = std::sin(theta);
    cos_theta[r] = std::cos(theta);
  }

  std::vector<PrefilterLevel> levels;
  levels.reserve(sigmas.size());
  for (const double sigma : sigmas) {
    // Source texels are constant over their footprint. The kernel is
    // integrated over each footprint with a Gauss-Legendre rule in
    // (cos theta, phi), enough nodes to resolve a lobe of width sqrt(sigma).
    const int nodes = std::min(16, 2 + static_cast<int>(std::ceil(2.0 * (kPi / h) / std::sqrt(sigma))));
    std::vector<double> gx, gw;
    gauss_legendre(nodes, gx, gw);
    const double half_dphi = kPi / w;
    std::vector<double> node_cos_dphi(static_cast<std::size_t>(w) * nodes);
    for (int k = 0; k < w; ++k) {
      for (int j = 0; j < nodes; ++j) node_cos_dphi[k * nodes + j] = std::cos(2.0 * kPi * k / w + half_dphi * gx[j]);
    }

    std::vector<Rgb> out(static_cast<std::size_t>(w) * h, Rgb::Zero());
    // The kernel between two texels depends only on their rows and the
    // column difference, so each output row is a sum of circular
    // convolutions against a per-row-pair kernel.
    parallel_for(static_cast<std::size_t>(h), options.threads, [&](std::size_t begin, std::size_t end) {
      std::vector<double> kernel(w), mu(nodes), sin_mu(nodes), mu_w(nodes);
      std::vector<Rgb> row_out(w);
      for (std::size_t ra = begin; ra < end; ++ra) {
        std::fill(row_out.begin(), row_out.end(), Rgb::Zero());
        for (int rw = 0; rw < h; ++rw) {
          const double mu_hi = std::cos(kPi * rw / h), mu_lo = std::cos(kPi * (rw + 1) / h);
          for (int i = 0; i < nodes; ++i) {
            mu[i] = 0.5 * (mu_hi + mu_lo) + 0.5 * (mu_hi - mu_lo) * gx[i];
            sin_mu[i] = std::sqrt(std::max(0.0, 1.0 - mu[i] * mu[i]));
            mu_w[i] = 0.5 * (mu_hi - mu_lo) * gw[i] * half_dphi;
          }
          for (int k = 0; k < w; ++k) {
            double acc = 0.0;
            for (int i = 0; i < nodes; ++i) {
              const double ss = sin_theta[ra] * sin_mu[i];
              const double cc = cos_theta[ra] * mu[i] - 1.0;
              double ring = 0.0;
              for (int j = 0; j < nodes; ++j) ring += gw[j] * std::exp((ss * node_cos_dphi[k * nodes + j] + cc) / sigma);
              acc += mu_w[i] * ring;
            }
            kernel[k] = acc;
          }
          const Rgb* src = &source.pixels()[static_cast<std::size_t>(rw) * w];
          for (int ca = 0; ca < w; ++ca) {
            Rgb acc = Rgb::Zero();
            for (int cw = 0; cw < w; ++cw) {
              int k = cw - ca;
              if (k < 0) k += w;
              acc += src[cw] * kernel[k];
            }
            row_out[ca] += acc;
          }
        }
        std::copy(row_out.begin(), row_out.end(), out.begin() + static_cast<std::ptrdiff_t>(ra) * w);
      }
    });
    levels.push_back({sigma, EnvironmentMap(w, h, std::move(out))});
  }
  return {source, std::move(levels)};
}

void LightRig::validate() const {
  if (directions.empty()) throw InvalidInput("light rig '" + id + "' has no directions");
  for (std::size_t i = 0; i < directions.size(); ++i) {
    if (!is_unit(directions[i])) {
      throw InvalidInput("light rig '" + id + "' direction " + std::to_string(i) + " is not unit");
    }
  }
}

LightRig fibonacci_rig(std::size_t count) {
  if (count == 0) throw InvalidInput("rig needs at least one light");
  LightRig rig{"fibonacci-" + std::to_string(count), {}};
  QuadratureSpec spec;
  spec.nodes = count;
  for (const auto& node : sphere_quadrature(spec)) rig.directions.push_back(node.direction.normalized());
  return rig;
}

PointLightSet PointLightSet::from_rig(const LightRig& rig, std::vector<Rgb> intensities) {
  rig.validate();
  PointLightSet set{rig.id, rig.directions, std::move(intensities)};
  set.validate();
  return set;
}

void PointLightSet::validate() const {
  if (directions.empty()) throw InvalidInput("point light set is empty");
  if (directions.size() != intensities.size()) {
    throw InvalidInput("point light set has " + std::to_string(directions.size()) + " directions but " +
                       std::to_string(intensities.size()) + " intensities");
  }
  for (std::size_t i = 0; i < directions.size(); ++i) {
    if (!is_unit(directions[i])) throw InvalidInput("point light " + std::to_string(i) + " direction is not unit");
    if (!intensities[i].allFinite() || (intensities[i] < 0.0).any()) {
      throw InvalidInput("point light " + std::to_string(i) + " intensity must be finite and non-negative");
    }
  }
}

Rgb PointLightSet::total_intensity() const {
  Rgb total = Rgb::Zero();
  for (const auto& i : intensities) total += i;
  return total;
}

PointLightSet merge_lights(const PointLightSet& a, const PointLightSet& b) {
  PointLightSet merged{a.rig_id == b.rig_id ? a.rig_id : std::string("combined"), a.directions, a.intensities};
  merged.directions.insert(merged.directions.end(), b.directions.begin(), b.directions.end());
  merged.intensities.insert(merged.intensities.end(), b.intensities.begin(), b.intensities.end());
  return merged;
}

PointLightSet env_to_point_lights(const EnvironmentMap& map, const LightRig& rig) {
  rig.validate();
  if (map.empty()) throw InvalidInput("cannot discretise an empty environment map");
  PointLightSet lights{rig.id, rig.directions, std::vector<Rgb>(rig.size(), Rgb::Zero())};
  for (int row = 0; row < map.height(); ++row) {
    const double solid_angle = map.texel_solid_angle(row);
    for (int col = 0; col < map.width(); ++col) {
      const Vec3 dir = map.texel_direction(col, row);
      std::size_t best = 0;
      double best_dot = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < rig.size(); ++j) {
        const double d = rig.directions[j].dot(dir);
        if (d > best_dot) {
          best_dot = d;
          best = j;
        }
      }
      lights.intensities[best] += map.at(col, row) * solid_angle;
    }
  }
  return lights;
}

EnvPreset parse_env_preset(const std::string& name) {
  if (name == "sky") return EnvPreset::kSky;
  if (name == "studio") return EnvPreset::kStudio;
  if (name == "constant") return EnvPreset::kConstant;
  if (name == "zero") return EnvPreset::kZero;
  throw InvalidInput("unknown environment preset '" + name + "' (sky, studio, constant, zero)");
}

EnvironmentMap make_procedural_env(EnvPreset preset, int height) {
  const int width = 2 * height;
  std::vector<Rgb> pixels(static_cast<std::size_t>(width) * height);
  EnvironmentMap shape = EnvironmentMap::constant(height, Rgb::Zero());
  const Vec3 sun = Vec3(0.6, -0.3, 0.74).normalized();
  const Vec3 key = Vec3(0.8, 0.5, 0.33).normalized();
  const Vec3 fill = Vec3(-0.7, 0.6, 0.1).normalized();
  for (int row = 0; row < height; ++row) {
    for (int col = 0; col < width; ++col) {
      const Vec3 d = shape.texel_direction(col, row);
      Rgb value = Rgb::Zero();
      switch (preset) {
        case EnvPreset::kSky: {
          const double up = 0.5 * (d.z() + 1.0);
          const Rgb zenith(0.35, 0.45, 0.75);
          const Rgb ground(0.18, 0.14, 0.10);
          value = ground * (1.0 - up) + zenith * up;
          value += Rgb(1.6, 1.3, 0.9) * std::exp((sun.dot(d) - 1.0) / 0.25);
          break;
        }
        case EnvPreset::kStudio:
          value = Rgb(0.05, 0.05, 0.05);
          value += Rgb(1.2, 1.1, 1.0) * std::exp((key.dot(d) - 1.0) / 0.3);
          value += Rgb(0.3, 0.4, 0.6) * std::exp((fill.dot(d) - 1.0) / 0.4);
          break;
        case EnvPreset::kConstant:
          value = Rgb(1.0, 1.0, 1.0);
          break;
        case EnvPreset::kZero:
          break;
      }
      pixels[static_cast<std::size_t>(row) * width + col] = value;
    }
  }
  return {width, height, std::move(pixels)};
}

}  // namespace relight
