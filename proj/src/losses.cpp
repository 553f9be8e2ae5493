#include "relight/losses.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace relight {

namespace {

double pairwise_range(std::size_t begin, std::size_t end, const std::function<double(std::size_t)>& term) {
  if (end - begin <= 8) {
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += term(i);
    return s;
  }
  const std::size_t mid = begin + (end - begin) / 2;
  return pairwise_range(begin, mid, term) + pairwise_range(mid, end, term);
}

void require_same_size(const RenderTarget& a, const RenderTarget& b) {
  if (a.width != b.width || a.height != b.height) {
    throw InvalidInput("image size mismatch: " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                       " vs " + std::to_string(b.width) + "x" + std::to_string(b.height));
  }
}

}  // namespace

double pairwise_sum(std::size_t n, const std::function<double(std::size_t)>& term) {
  return n == 0 ? 0.0 : pairwise_range(0, n, term);
}

double l1_loss(const RenderTarget& a, const RenderTarget& b, std::span<const float> mask) {
  require_same_size(a, b);
  const std::size_t pixels = a.pixel_count();
  if (!mask.empty() && mask.size() != pixels) throw InvalidInput("l1 mask size does not match the image");
  auto included = [&](std::size_t p) { return mask.empty() || mask[p] != 0.0f; };
  const double count = pairwise_sum(pixels, [&](std::size_t p) { return included(p) ? 1.0 : 0.0; });
  if (count == 0.0) return 0.0;
  const double total = pairwise_sum(pixels, [&](std::size_t p) {
    if (!included(p)) return 0.0;
    double s = 0.0;
    for (int c = 0; c < 3; ++c) s += std::abs(static_cast<double>(a.rgb[3 * p + c]) - b.rgb[3 * p + c]);
    return s;
  });
  return total / (3.0 * count);
}

double ssim_index(const RenderTarget& a, const RenderTarget& b, const SsimOptions& options) {
  require_same_size(a, b);
  const int win = options.window;
  if (win <= 0 || a.width < win || a.height < win) {
    throw InvalidInput("image smaller than the " + std::to_string(win) + "-pixel SSIM window");
  }
  std::vector<double> kernel(win);
  double ksum = 0.0;
  for (int i = 0; i < win; ++i) {
    const double x = i - (win - 1) / 2.0;
    kernel[i] = std::exp(-x * x / (2.0 * options.gaussian_sigma * options.gaussian_sigma));
    ksum += kernel[i];
  }
  for (auto& k : kernel) k /= ksum;

  const int w = a.width, h = a.height;
  const int ow = w - win + 1, oh = h - win + 1;
  // Separable valid-mode filtering of one plane.
  auto filter = [&](const std::vector<double>& plane) {
    std::vector<double> rows(static_cast<std::size_t>(ow) * h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < ow; ++x) {
        double s = 0.0;
        for (int i = 0; i < win; ++i) s += kernel[i] * plane[static_cast<std::size_t>(y) * w + x + i];
        rows[static_cast<std::size_t>(y) * ow + x] = s;
      }
    }
    std::vector<double> out(static_cast<std::size_t>(ow) * oh);
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        double s = 0.0;
        for (int i = 0; i < win; ++i) s += kernel[i] * rows[static_cast<std::size_t>(y + i) * ow + x];
        out[static_cast<std::size_t>(y) * ow + x] = s;
      }
    }
    return out;
  };

  const std::size_t n = a.pixel_count();
  std::vector<double> ssim_values;
  ssim_values.reserve(static_cast<std::size_t>(ow) * oh * 3);
  for (int c = 0; c < 3; ++c) {
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t p = 0; p < n; ++p) {
      x[p] = std::clamp(static_cast<double>(a.rgb[3 * p + c]), 0.0, 1.0);
      y[p] = std::clamp(static_cast<double>(b.rgb[3 * p + c]), 0.0, 1.0);
      xx[p] = x[p] * x[p];
      yy[p] = y[p] * y[p];
      xy[p] = x[p] * y[p];
    }
    const auto mx = filter(x), my = filter(y), mxx = filter(xx), myy = filter(yy), mxy = filter(xy);
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = mxx[i] - mx[i] * mx[i];
      const double vy = myy[i] - my[i] * my[i];
      const double cxy = mxy[i] - mx[i] * my[i];
      const double num = (2.0 * mx[i] * my[i] + options.c1) * (2.0 * cxy + options.c2);
      const double den = (mx[i] * mx[i] + my[i] * my[i] + options.c1) * (vx + vy + options.c2);
      ssim_values.push_back(num / den);
    }
  }
  return pairwise_sum(ssim_values.size(), [&](std::size_t i) { return ssim_values[i]; }) /
         static_cast<double>(ssim_values.size());
}

double ssim_loss(const RenderTarget& a, const RenderTarget& b, const SsimOptions& options) {
  return 1.0 - ssim_index(a, b, options);
}

double reg_scale(std::span<const Vec3> scales, double reference_scale) {
  if (!(reference_scale > 0.0)) throw InvalidInput("reference scale must be positive");
  for (const auto& s : scales) {
    if (!(s.minCoeff() > 0.0)) throw InvalidInput("scale regulariser requires strictly positive scales");
  }
  if (scales.empty()) return 0.0;
  const double total = pairwise_sum(scales.size(), [&](std::size_t k) {
    double s = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double r = std::log(scales[k][c] / reference_scale);
      s += r * r;
    }
    return s;
  });
  return total / (3.0 * static_cast<double>(scales.size()));
}

double default_reference_scale(const CoarseMesh& mesh) { return mesh.median_edge_length() / 4.0; }

namespace {
double mean_squared_norm(std::span<const Vec3> v) {
  if (v.empty()) return 0.0;
  return pairwise_sum(v.size(), [&](std::size_t k) { return v[k].squaredNorm(); }) / static_cast<double>(v.size());
}
}  // namespace

double reg_offset(std::span<const Vec3> offsets) { return mean_squared_norm(offsets); }
double reg_normal(std::span<const Vec3> residuals) { return mean_squared_norm(residuals); }

double reg_albedo(std::span<const float> albedo, std::span<const float> mean_texture, std::span<const float> mask) {
  if (albedo.size() != mean_texture.size() || albedo.size() % 3 != 0) {
    throw InvalidInput("albedo and mean texture planes must be equal-sized RGB planes");
  }
  const std::size_t texels = albedo.size() / 3;
  if (!mask.empty() && mask.size() != texels) throw InvalidInput("albedo mask size does not match the plane");
  auto included = [&](std::size_t t) { return mask.empty() || mask[t] != 0.0f; };
  const double count = pairwise_sum(texels, [&](std::size_t t) { return included(t) ? 1.0 : 0.0; });
  if (count == 0.0) return 0.0;
  const double total = pairwise_sum(texels, [&](std::size_t t) {
    if (!included(t)) return 0.0;
    double s = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double d = static_cast<double>(albedo[3 * t + c]) - mean_texture[3 * t + c];
      s += d * d;
    }
    return s;
  });
  return total / (3.0 * count);
}

double reg_monochrome(std::span<const Rgb> transfer) {
  if (transfer.empty()) return 0.0;
  const double total = pairwise_sum(transfer.size(), [&](std::size_t i) {
    // (1/3) sum (d_c - mean)^2 written via pairwise differences, so equal
    // channels give exactly zero.
    const Rgb& d = transfer[i];
    const double rg = d[0] - d[1], gb = d[1] - d[2], br = d[2] - d[0];
    return (rg * rg + gb * gb + br * br) / 9.0;
  });
  return total / static_cast<double>(transfer.size());
}

double penalty_negative_diffuse(std::span<const Rgb> diffuse) {
  if (diffuse.empty()) return 0.0;
  const double total = pairwise_sum(diffuse.size(), [&](std::size_t k) { return diffuse[k].min(0.0).square().sum(); });
  return total / (3.0 * static_cast<double>(diffuse.size()));
}

double geometry_loss(std::span<const Vec3> predicted, std::span<const Vec3> target) {
  if (predicted.size() != target.size()) {
    throw InvalidInput("geometry loss needs meshes with the same vertex count");
  }
  if (predicted.empty()) return 0.0;
  return pairwise_sum(predicted.size(), [&](std::size_t k) { return (predicted[k] - target[k]).squaredNorm(); }) /
         static_cast<double>(predicted.size());
}

double LinearSchedule::at(int iteration) const {
  if (iteration <= 0 || end_iteration <= 0) return iteration <= 0 ? start : end;
  if (iteration >= end_iteration) return end;
  const double t = static_cast<double>(iteration) / end_iteration;
  return start + (end - start) * t;
}

std::map<std::string, double> weighted_terms(const LossWeights& w, const LossComponents& c, Objective objective,
                                             int iteration) {
  std::map<std::string, double> terms;
  auto add = [&](const char* name, double weight, const std::optional<double>& value) {
    if (value) terms[name] = weight * *value;
  };
  add("l1", w.l1, c.l1);
  add("ssim", w.ssim, c.ssim);
  switch (objective) {
    case Objective::kStage1:
      add("geo", w.geo, c.geo);
      add("scale", w.scale, c.scale);
      add("offset", w.offset.at(iteration), c.offset);
      break;
    case Objective::kStage2:
      add("negative_color", w.negative_color, c.negative_color);
      add("normal", w.normal.at(iteration), c.normal);
      add("albedo", w.albedo.at(iteration), c.albedo);
      add("mono", w.mono, c.mono);
      break;
    case Objective::kInversion:
      add("geo", w.geo, c.geo);
      add("id", w.id, c.id_norm2);
      break;
  }
  return terms;
}

double stage_losses(const LossWeights& weights, const LossComponents& components, Objective objective,
                    int iteration) {
  const auto terms = weighted_terms(weights, components, objective, iteration);
  std::vector<double> values;
  for (const auto& [name, value] : terms) values.push_back(value);
  return pairwise_sum(values.size(), [&](std::size_t i) { return values[i]; });
}

std::string format_loss_report_text(const std::map<std::string, double>& values) {
  std::ostringstream out;
  out << std::setprecision(17);
  for (const auto& [name, value] : values) out << name << '=' << value << '\n';
  return out.str();
}

std::string format_loss_report_json(const std::map<std::string, double>& values) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, value] : values) j[name] = value;
  return j.dump();
}

}  // namespace relight
