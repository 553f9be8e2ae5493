#pragma once

// Training-objective terms as pure functions. Reductions use a fixed
// pairwise summation tree so results do not depend on threading.

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "relight/avatar_model.hpp"
#include "relight/common.hpp"
#include "relight/splat.hpp"

namespace relight {

// Pairwise (cascade) sum of term(0) + ... + term(n - 1).
double pairwise_sum(std::size_t n, const std::function<double(std::size_t)>& term);

// Mean absolute per-channel difference over pixels where mask != 0 (all
// pixels when no mask is given).
double l1_loss(const RenderTarget& a, const RenderTarget& b, std::span<const float> mask = {});

struct SsimOptions {
  int window = 11;
  double gaussian_sigma = 1.5;
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;
};

// Mean SSIM over channels and all valid (fully inside) window positions of
// the inputs clamped to [0, 1].
double ssim_index(const RenderTarget& a, const RenderTarget& b, const SsimOptions& options = {});
double ssim_loss(const RenderTarget& a, const RenderTarget& b, const SsimOptions& options = {});

// Mean over all components of (ln(s / s0))^2; throws on s <= 0.
double reg_scale(std::span<const Vec3> scales, double reference_scale);
// Median mesh edge length / 4.
double default_reference_scale(const CoarseMesh& mesh);

double reg_offset(std::span<const Vec3> offsets);
double reg_normal(std::span<const Vec3> residuals);

// Masked mean squared difference between albedo and mean texture, averaged
// over channels. Planes are texel-major RGB; mask has one float per texel.
double reg_albedo(std::span<const float> albedo, std::span<const float> mean_texture,
                  std::span<const float> mask = {});

// Mean over Gaussians and SH coefficients of the per-coefficient RGB
// variance (1/3) sum_c (d_c - mean(d))^2.
double reg_monochrome(std::span<const Rgb> transfer);

// Mean of min(c, 0)^2 over every channel of the unclamped diffuse colors.
double penalty_negative_diffuse(std::span<const Rgb> diffuse);

// Mean squared vertex distance on a shared topology.
double geometry_loss(std::span<const Vec3> predicted, std::span<const Vec3> target);

// Linear ramp from `start` at iteration 0 to `end` at `end_iteration`, then
// constant.
struct LinearSchedule {
  double start;
  double end;
  int end_iteration;
  double at(int iteration) const;
};

struct LossWeights {
  double l1 = 10.0;
  double ssim = 0.2;
  double geo = 0.4;
  double scale = 0.01;
  double negative_color = 0.01;
  double mono = 0.01;
  double id = 0.01;
  LinearSchedule offset{1.0, 0.001, 20000};
  LinearSchedule normal{1.0, 0.0, 5000};
  LinearSchedule albedo{10.0, 0.01, 10000};
};

// Missing components contribute nothing.
struct LossComponents {
  std::optional<double> l1, ssim, geo, scale, offset, negative_color, normal, albedo, mono, id_norm2;
};

// Stage 1: l1, ssim, geo, s, t.   Stage 2: l1, ssim, c-, n, rho, mono.
// Inversion: l1, ssim, geo, id * ||z||^2.
enum class Objective { kStage1, kStage2, kInversion };

double stage_losses(const LossWeights& weights, const LossComponents& components, Objective objective,
                    int iteration = 0);

// Every term present in `components`, weighted by its active weight.
std::map<std::string, double> weighted_terms(const LossWeights& weights, const LossComponents& components,
                                             Objective objective, int iteration = 0);

// "name=value" lines and a JSON object over the same entries.
std::string format_loss_report_text(const std::map<std::string, double>& values);
std::string format_loss_report_json(const std::map<std::string, double>& values);

}  // namespace relight
