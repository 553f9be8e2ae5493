#pragma once

// OLAT simulation, image-based relighting and point-light inversion.
//
// Every frame here is rendered against a single SplatPlan per camera, so
// all frames of a stack share their compositing weights and differ only in
// per-Gaussian colors.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "relight/avatar_model.hpp"
#include "relight/envmap.hpp"
#include "relight/shading.hpp"
#include "relight/splat.hpp"

namespace relight {

// Per-camera OLAT colorizer: evaluates the response of every Gaussian to a
// unit white light from one direction with the same arithmetic as
// shade_all under a one-light PointLightSet.
class OlatRenderer {
 public:
  OlatRenderer(const RelightableGaussianSet& avatar, const Camera& camera, std::size_t threads = 0);

  const SplatPlan& plan() const { return plan_; }
  const RelightableGaussianSet& avatar() const { return avatar_; }

  // Shaded (clamped) colors for a unit white light from `direction`.
  void colors(const Vec3& direction, std::vector<Rgb>& out, ShadeStats* stats = nullptr) const;
  // OLAT frame including background * transmittance.
  RenderTarget frame(const Vec3& direction, const Rgb& background) const;
  // Background-free frame in double precision, interleaved RGB.
  void frame_linear(const Vec3& direction, std::vector<double>& out) const;

 private:
  const RelightableGaussianSet& avatar_;
  SplatPlan plan_;
  std::size_t threads_;
  std::vector<Vec3> lobe_axes_;
};

std::vector<RenderTarget> render_olat_stack(const RelightableGaussianSet& avatar, std::span<const Vec3> directions,
                                            const Camera& camera, const Rgb& background = Rgb::Zero(),
                                            std::size_t threads = 0);

// frame - background * transmittance, per pixel.
RenderTarget subtract_background(const RenderTarget& frame, const Rgb& background);

// Pixel-wise sum_j weights_j * frame_j. Frames must be background-free (or
// rendered on a zero background). Alpha and transmittance are copied from
// the first frame.
RenderTarget ibr_relight(std::span<const RenderTarget> stack, std::span<const Rgb> weights);

// Same superposition without holding the stack: each OLAT frame is rendered,
// rounded to float exactly as render_olat_stack would store it, and
// accumulated. Background * transmittance is added at the end.
RenderTarget ibr_relight_streamed(const OlatRenderer& renderer, const PointLightSet& weights,
                                  const Rgb& background = Rgb::Zero());

struct Observation {
  RenderTarget image;
  Camera camera;
};

struct InversionOptions {
  Rgb background = Rgb::Zero();
  // Outer active-set iterations; the method stops earlier once the KKT
  // conditions hold.
  int max_iterations = 500;
  // Eigenvalues of A^T A below this fraction of the largest count as null.
  double rank_tolerance = 1e-12;
  std::size_t threads = 0;
};

struct InversionResult {
  PointLightSet lights;
  bool degenerate = false;
  // Largest null-space dimension over the three channels.
  int null_space_dim = 0;
  std::vector<int> iterations;  // per channel
  std::vector<double> objective;  // final ||A x - b||^2 per channel
  std::vector<std::string> warnings;
};

// Non-negative least squares on the normal equations: minimises
// x^T G x - 2 h^T x subject to x >= 0 with an active-set method. When G is
// rank deficient (eigenvalues at or below rank_tolerance times the largest)
// the minimum-norm optimal x >= 0 is returned.
struct NnlsResult {
  Eigen::VectorXd x;
  int iterations = 0;
  bool converged = false;
  int null_space_dim = 0;
};
NnlsResult nnls_gram(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs, int max_iterations = 500,
                     double rank_tolerance = 1e-12);

InversionResult invert_lighting(std::span<const Observation> observations, const RelightableGaussianSet& avatar,
                                const LightRig& rig, const InversionOptions& options = {});

// Render under `lights` through the regular shading path, then add i.i.d.
// Gaussian pixel noise of standard deviation `noise_sigma` (Box-Muller over a
// seeded 64-bit Mersenne Twister, so runs are reproducible across platforms).
RenderTarget synthesize_observation(const RelightableGaussianSet& avatar, const PointLightSet& lights,
                                    const Camera& camera, const Rgb& background = Rgb::Zero(),
                                    double noise_sigma = 0.0, std::uint64_t seed = 0, std::size_t threads = 0);

// Per-channel intensities uniform in [lo, hi), reproducible across platforms.
std::vector<Rgb> random_intensities(std::size_t count, std::uint64_t seed, double lo = 0.2, double hi = 1.0);

// Relative intensity error ||x - x*|| / ||x*|| over all channels.
double relative_intensity_error(std::span<const Rgb> x, std::span<const Rgb> reference);

enum class RelightMode { kDirect, kIbr };
RelightMode parse_relight_mode(const std::string& name);

struct RelightOptions {
  // Rig used by the IBR mode; defaults to the 331-light Fibonacci rig.
  std::optional<LightRig> rig;
  // The IBR mode discretizes the map to (2 * ibr_height) x ibr_height first.
  int ibr_height = 10;
  std::vector<double> ladder = default_prefilter_ladder();
  PrefilterOptions prefilter;
  Rgb background = Rgb::Zero();
  std::size_t threads = 0;
};

RenderTarget relight_under_env(const RelightableGaussianSet& avatar, const EnvironmentMap& env,
                               const Camera& camera, RelightMode mode, const RelightOptions& options = {},
                               RenderStats* stats = nullptr);

// Relative RMS: sqrt(mean (a - b)^2) / sqrt(mean b^2) over all channels.
double relative_rms(std::span<const float> a, std::span<const float> b);
double rms_difference(std::span<const float> a, std::span<const float> b);

}  // namespace relight
