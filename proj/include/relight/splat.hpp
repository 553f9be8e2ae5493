#pragma once

// CPU tile-based Gaussian splatting.
//
// Compositing per pixel is front to back over Gaussians sorted by camera
// depth (ties by index): w_k = alpha_k T_k, T_{k+1} = T_k (1 - alpha_k),
// alpha_k = o_k exp(-q/2) with q the Mahalanobis distance of the pixel
// center under the regularised 2D covariance. Gaussians with q > 9 (outside
// their 3-sigma ellipse) are skipped and a pixel stops once T < 1e-4.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "relight/avatar_model.hpp"
#include "relight/common.hpp"
#include "relight/image_io.hpp"

namespace relight {

// Pinhole camera, OpenCV axes (x right, y down, z forward).
struct Camera {
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  Mat3 rotation = Mat3::Identity();  // world -> camera
  Vec3 translation = Vec3::Zero();
  int width = 0, height = 0;

  void validate() const;
  Vec3 to_camera(const Vec3& world) const { return rotation * world + translation; }
  Vec3 center() const { return -rotation.transpose() * translation; }

  static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fov_y_deg, int width,
                        int height);
  // Orbit about `target` in a +z-up world; azimuth 0 looks from +x.
  static Camera orbit(double azimuth_deg, double elevation_deg, double distance, const Vec3& target,
                      double fov_y_deg, int width, int height);
};

inline constexpr double kCovarianceRegularization = 0.3;  // px^2
inline constexpr double kNearPlane = 1e-3;
inline constexpr double kTransmittanceCutoff = 1e-4;
inline constexpr double kMaxMahalanobis = 9.0;  // 3 sigma
inline constexpr int kTileSize = 16;

struct ProjectedGaussian {
  Vec2 mean;
  Eigen::Matrix2d cov;  // includes the +0.3 px^2 regularisation
  double depth;
};

Mat3 quaternion_to_matrix(const Vec4& q);

// nullopt when the Gaussian is behind the near plane (culled, not an error).
std::optional<ProjectedGaussian> project_gaussian(const Vec3& position, const Vec4& rotation, const Vec3& scale,
                                                  const Camera& camera);

struct RenderTarget {
  int width = 0;
  int height = 0;
  std::vector<float> rgb;            // interleaved, row 0 at the top
  std::vector<float> alpha;          // 1 - transmittance
  std::vector<float> transmittance;

  RenderTarget() = default;
  RenderTarget(int w, int h);

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  Rgb pixel(int x, int y) const;
  FloatImage to_image() const;
  // Alpha and transmittance are unknown for loaded images; alpha is set to 1.
  static RenderTarget from_image(const FloatImage& image);
};

struct RenderStats {
  std::size_t gaussians = 0;
  std::size_t drawn = 0;
  std::size_t culled = 0;
  std::size_t skipped_nonfinite = 0;
  std::size_t contributions = 0;
  std::size_t clamp_activations = 0;  // filled in by shading
  std::size_t roughness_clamped = 0;  // filled in by shading
};

struct RenderOptions {
  Rgb background = Rgb::Zero();
  std::size_t threads = 0;
};

// Projection, depth sort, tile binning and per-pixel compositing weights of
// one geometry/camera pair. Rendering any number of color assignments
// against a plan is a sparse weighted sum, which is what makes OLAT stacks
// and lighting inversion cheap.
class SplatPlan {
 public:
  SplatPlan(const GaussianGeometry& geometry, const Camera& camera, std::size_t threads = 0);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t gaussian_count() const { return gaussian_count_; }
  const RenderStats& stats() const { return stats_; }

  // Non-finite colors drop their contribution and are counted in
  // `nonfinite_colors` when provided.
  RenderTarget render(std::span<const Rgb> colors, const Rgb& background, std::size_t threads = 0,
                      std::size_t* nonfinite_colors = nullptr) const;

  // Compositing weights in CSR layout: pixel p owns entries
  // [offsets[p], offsets[p + 1]) in front-to-back order.
  std::span<const std::uint64_t> offsets() const { return offsets_; }
  std::span<const std::uint32_t> ids() const { return ids_; }
  std::span<const double> weights() const { return weights_; }
  std::span<const double> transmittance() const { return transmittance_; }

  // Gaussian indices in compositing order (depth, then index).
  std::span<const std::uint32_t> depth_order() const { return order_; }
  std::span<const ProjectedGaussian> projected() const { return projected_; }
  bool visible(std::size_t k) const { return visible_[k] != 0; }

 private:
  int width_, height_;
  std::size_t gaussian_count_;
  RenderStats stats_;
  std::vector<ProjectedGaussian> projected_;
  std::vector<Eigen::Matrix2d> conics_;
  std::vector<std::uint8_t> visible_;
  std::vector<std::uint32_t> order_;
  std::vector<std::uint64_t> offsets_;
  std::vector<std::uint32_t> ids_;
  std::vector<double> weights_;
  std::vector<double> transmittance_;
};

RenderTarget render(const GaussianGeometry& geometry, std::span<const Rgb> colors, const Camera& camera,
                    const RenderOptions& options = {}, RenderStats* stats = nullptr);

// Per-pixel opacity term shared by every compositing path: returns
// o * exp(-q/2), or 0 when the pixel lies outside the 3-sigma ellipse.
double splat_alpha(const Vec2& mean, const Eigen::Matrix2d& conic, double opacity, double px, double py);

}  // namespace relight
