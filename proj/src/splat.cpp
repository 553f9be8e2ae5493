#include "relight/splat.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "relight/parallel.hpp"

namespace relight {

void Camera::validate() const {
  if (!(fx > 0.0 && fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy)) {
    throw InvalidInput("camera focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) throw InvalidInput("camera image size must be positive");
  if (!rotation.allFinite() || !translation.allFinite() || !std::isfinite(cx) || !std::isfinite(cy)) {
    throw InvalidInput("camera parameters must be finite");
  }
  const double err = (rotation * rotation.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (err > 1e-6) throw InvalidInput("camera rotation is not orthonormal");
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fov_y_deg, int width,
                       int height) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-9) throw InvalidInput("look_at: up vector parallel to the view direction");
  right.normalize();
  const Vec3 down = forward.cross(right);
  Camera cam;
  cam.rotation.row(0) = right.transpose();
  cam.rotation.row(1) = down.transpose();
  cam.rotation.row(2) = forward.transpose();
  cam.translation = -cam.rotation * eye;
  cam.width = width;
  cam.height = height;
  const double f = 0.5 * height / std::tan(0.5 * fov_y_deg * kPi / 180.0);
  cam.fx = cam.fy = f;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  cam.validate();
  return cam;
}

Camera Camera::orbit(double azimuth_deg, double elevation_deg, double distance, const Vec3& target,
                     double fov_y_deg, int width, int height) {
  const double az = azimuth_deg * kPi / 180.0;
  const double el = elevation_deg * kPi / 180.0;
  const Vec3 eye = target + distance * Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
  return look_at(eye, target, Vec3::UnitZ(), fov_y_deg, width, height);
}

Mat3 quaternion_to_matrix(const Vec4& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

std::optional<ProjectedGaussian> project_gaussian(const Vec3& position, const Vec4& rotation, const Vec3& scale,
                                                  const Camera& camera) {
  const Vec3 p = camera.to_camera(position);
  if (!(p.z() > kNearPlane)) return std::nullopt;
  const Mat3 r = quaternion_to_matrix(rotation);
  const Mat3 cov_world = r * scale.cwiseAbs2().asDiagonal() * r.transpose();
  const Mat3 cov_cam = camera.rotation * cov_world * camera.rotation.transpose();

  // Clamp the lateral slope used by the Jacobian, as off-screen Gaussians
  // otherwise produce unbounded footprints.
  const double lim_x = 1.3 * (0.5 * camera.width / camera.fx);
  const double lim_y = 1.3 * (0.5 * camera.height / camera.fy);
  const double z = p.z();
  const double tx = std::clamp(p.x() / z, -lim_x - camera.cx / camera.fx, lim_x + camera.cx / camera.fx) * z;
  const double ty = std::clamp(p.y() / z, -lim_y - camera.cy / camera.fy, lim_y + camera.cy / camera.fy) * z;
  Eigen::Matrix<double, 2, 3> j;
  j << camera.fx / z, 0.0, -camera.fx * tx / (z * z),
       0.0, camera.fy / z, -camera.fy * ty / (z * z);
  ProjectedGaussian out;
  out.cov = j * cov_cam * j.transpose();
  out.cov(0, 0) += kCovarianceRegularization;
  out.cov(1, 1) += kCovarianceRegularization;
  out.cov(0, 1) = out.cov(1, 0) = 0.5 * (out.cov(0, 1) + out.cov(1, 0));
  out.mean = Vec2(camera.fx * p.x() / z + camera.cx, camera.fy * p.y() / z + camera.cy);
  out.depth = z;
  return out;
}

RenderTarget::RenderTarget(int w, int h)
    : width(w), height(h),
      rgb(static_cast<std::size_t>(w) * h * 3, 0.0f),
      alpha(static_cast<std::size_t>(w) * h, 0.0f),
      transmittance(static_cast<std::size_t>(w) * h, 1.0f) {}

Rgb RenderTarget::pixel(int x, int y) const {
  const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
  return {rgb[i], rgb[i + 1], rgb[i + 2]};
}

FloatImage RenderTarget::to_image() const {
  FloatImage image(width, height);
  image.rgb = rgb;
  return image;
}

RenderTarget RenderTarget::from_image(const FloatImage& image) {
  RenderTarget target(image.width, image.height);
  target.rgb = image.rgb;
  std::fill(target.alpha.begin(), target.alpha.end(), 1.0f);
  std::fill(target.transmittance.begin(), target.transmittance.end(), 0.0f);
  return target;
}

double splat_alpha(const Vec2& mean, const Eigen::Matrix2d& conic, double opacity, double px, double py) {
  const double dx = px - mean.x();
  const double dy = py - mean.y();
  const double q = conic(0, 0) * dx * dx + 2.0 * conic(0, 1) * dx * dy + conic(1, 1) * dy * dy;
  if (!(q <= kMaxMahalanobis)) return 0.0;
  return opacity * std::exp(-0.5 * q);
}

namespace {

struct TileEntry {
  std::uint32_t pixel;  // index within the image
  std::uint32_t id;
  double weight;
};

bool finite_gaussian(const GaussianGeometry& g, std::size_t k) {
  return g.positions[k].allFinite() && g.rotations[k].allFinite() && g.scales[k].allFinite() &&
         std::isfinite(g.opacities[k]);
}

}  // namespace

SplatPlan::SplatPlan(const GaussianGeometry& geometry, const Camera& camera, std::size_t threads)
    : width_(camera.width), height_(camera.height), gaussian_count_(geometry.size()) {
  camera.validate();
  const std::size_t n = geometry.size();
  if (geometry.rotations.size() != n || geometry.scales.size() != n || geometry.opacities.size() != n) {
    throw InvalidInput("Gaussian geometry arrays have inconsistent lengths");
  }
  stats_.gaussians = n;
  projected_.resize(n);
  conics_.resize(n);
  visible_.assign(n, 0);

  const int tiles_x = (width_ + kTileSize - 1) / kTileSize;
  const int tiles_y = (height_ + kTileSize - 1) / kTileSize;
  std::vector<std::array<int, 4>> tile_rect(n);  // tx0, tx1, ty0, ty1 inclusive

  std::vector<std::uint8_t> nonfinite(n, 0);
  parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      if (!finite_gaussian(geometry, k)) {
        nonfinite[k] = 1;
        continue;
      }
      auto proj = project_gaussian(geometry.positions[k], geometry.rotations[k], geometry.scales[k], camera);
      if (!proj || !proj->mean.allFinite() || !proj->cov.allFinite()) continue;
      const double det = proj->cov.determinant();
      if (!(det > 0.0)) continue;
      // Exact 3-sigma ellipse extents plus one pixel of slack so that binning
      // is a superset of the per-pixel test.
      const double rx = 3.0 * std::sqrt(proj->cov(0, 0)) + 1.0;
      const double ry = 3.0 * std::sqrt(proj->cov(1, 1)) + 1.0;
      const double x0 = std::floor(proj->mean.x() - rx - 0.5);
      const double x1 = std::ceil(proj->mean.x() + rx - 0.5);
      const double y0 = std::floor(proj->mean.y() - ry - 0.5);
      const double y1 = std::ceil(proj->mean.y() + ry - 0.5);
      if (x1 < 0.0 || y1 < 0.0 || x0 > width_ - 1 || y0 > height_ - 1) continue;
      const int px0 = static_cast<int>(std::max(0.0, x0));
      const int px1 = static_cast<int>(std::min<double>(width_ - 1, x1));
      const int py0 = static_cast<int>(std::max(0.0, y0));
      const int py1 = static_cast<int>(std::min<double>(height_ - 1, y1));
      tile_rect[k] = {px0 / kTileSize, px1 / kTileSize, py0 / kTileSize, py1 / kTileSize};
      projected_[k] = *proj;
      conics_[k] = proj->cov.inverse();
      visible_[k] = 1;
    }
  });
  for (std::size_t k = 0; k < n; ++k) {
    if (nonfinite[k]) {
      ++stats_.skipped_nonfinite;
    } else if (visible_[k]) {
      ++stats_.drawn;
    } else {
      ++stats_.culled;
    }
  }

  for (std::size_t k = 0; k < n; ++k) {
    if (visible_[k]) order_.push_back(static_cast<std::uint32_t>(k));
  }
  std::sort(order_.begin(), order_.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (projected_[a].depth != projected_[b].depth) return projected_[a].depth < projected_[b].depth;
    return a < b;
  });

  std::vector<std::vector<std::uint32_t>> bins(static_cast<std::size_t>(tiles_x) * tiles_y);
  for (const std::uint32_t k : order_) {
    const auto& r = tile_rect[k];
    for (int ty = r[2]; ty <= r[3]; ++ty) {
      for (int tx = r[0]; tx <= r[1]; ++tx) bins[static_cast<std::size_t>(ty) * tiles_x + tx].push_back(k);
    }
  }

  // Composite each tile independently; per-tile results are stitched in
  // pixel order afterwards so the layout is independent of thread count.
  const std::size_t tile_count = bins.size();
  std::vector<std::vector<TileEntry>> tile_entries(tile_count);
  transmittance_.assign(static_cast<std::size_t>(width_) * height_, 1.0);
  std::vector<std::uint32_t> pixel_counts(transmittance_.size(), 0);
  parallel_for(tile_count, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      const int tx = static_cast<int>(t % tiles_x);
      const int ty = static_cast<int>(t / tiles_x);
      const auto& bin = bins[t];
      auto& entries = tile_entries[t];
      for (int y = ty * kTileSize; y < std::min(height_, (ty + 1) * kTileSize); ++y) {
        for (int x = tx * kTileSize; x < std::min(width_, (tx + 1) * kTileSize); ++x) {
          const std::uint32_t p = static_cast<std::uint32_t>(y) * width_ + x;
          double transmittance = 1.0;
          for (const std::uint32_t k : bin) {
            const double a = splat_alpha(projected_[k].mean, conics_[k], geometry.opacities[k], x + 0.5, y + 0.5);
            if (a <= 0.0) continue;
            entries.push_back({p, k, a * transmittance});
            ++pixel_counts[p];
            transmittance *= 1.0 - a;
            if (transmittance < kTransmittanceCutoff) break;
          }
          transmittance_[p] = transmittance;
        }
      }
    }
  });

  offsets_.assign(transmittance_.size() + 1, 0);
  for (std::size_t p = 0; p < pixel_counts.size(); ++p) offsets_[p + 1] = offsets_[p] + pixel_counts[p];
  ids_.resize(offsets_.back());
  weights_.resize(offsets_.back());
  for (const auto& entries : tile_entries) {
    // Entries of one pixel are contiguous and ordered within its tile.
    std::uint64_t cursor = 0;
    std::uint32_t current = UINT32_MAX;
    for (const auto& e : entries) {
      if (e.pixel != current) {
        current = e.pixel;
        cursor = offsets_[e.pixel];
      }
      ids_[cursor] = e.id;
      weights_[cursor] = e.weight;
      ++cursor;
    }
  }
  stats_.contributions = ids_.size();
}

RenderTarget SplatPlan::render(std::span<const Rgb> colors, const Rgb& background, std::size_t threads,
                               std::size_t* nonfinite_colors) const {
  if (colors.size() != gaussian_count_) {
    throw InvalidInput("render: " + std::to_string(colors.size()) + " colors for " +
                       std::to_string(gaussian_count_) + " Gaussians");
  }
  std::vector<std::uint8_t> bad(colors.size(), 0);
  std::size_t bad_count = 0;
  for (std::size_t k = 0; k < colors.size(); ++k) {
    if (!colors[k].allFinite()) {
      bad[k] = 1;
      ++bad_count;
    }
  }
  if (nonfinite_colors) *nonfinite_colors = bad_count;

  RenderTarget target(width_, height_);
  parallel_for(transmittance_.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      Rgb c = Rgb::Zero();
      for (std::uint64_t e = offsets_[p]; e < offsets_[p + 1]; ++e) {
        const std::uint32_t k = ids_[e];
        if (bad[k]) continue;
        c += colors[k] * weights_[e];
      }
      const double t = transmittance_[p];
      c += background * t;
      for (int ch = 0; ch < 3; ++ch) target.rgb[3 * p + ch] = static_cast<float>(c[ch]);
      target.alpha[p] = static_cast<float>(1.0 - t);
      target.transmittance[p] = static_cast<float>(t);
    }
  });
  return target;
}

RenderTarget render(const GaussianGeometry& geometry, std::span<const Rgb> colors, const Camera& camera,
                    const RenderOptions& options, RenderStats* stats) {
  SplatPlan plan(geometry, camera, options.threads);
  std::size_t bad = 0;
  RenderTarget target = plan.render(colors, options.background, options.threads, &bad);
  if (stats) {
    *stats = plan.stats();
    stats->skipped_nonfinite += bad;
  }
  return target;
}

}  // namespace relight
