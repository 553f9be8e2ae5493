#include "relight/relight_solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "relight/parallel.hpp"

namespace relight {

OlatRenderer::OlatRenderer(const RelightableGaussianSet& avatar, const Camera& camera, std::size_t threads)
    : avatar_(avatar), plan_(avatar.geometry, camera, threads), threads_(threads) {
  const Vec3 center = camera.center();
  lobe_axes_.resize(avatar.size());
  parallel_for(avatar.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const Vec3 view = view_direction(avatar.geometry.positions[k], center);
      Vec3 axis = reflect_lobe_axis(view, avatar.normals[k]);
      axis.normalize();
      // Validates the lobe exactly as shading would.
      lobe_axes_[k] = SpecularLobe(axis, avatar.roughness[k]).axis();
    }
  });
}

void OlatRenderer::colors(const Vec3& direction, std::vector<Rgb>& out, ShadeStats* stats) const {
  require_unit(direction, "light direction");
  const ShOrder order = avatar_.sh_order;
  const std::size_t nc = order.count();
  std::vector<double> basis(nc);
  eval_sh_basis_unchecked(direction, order, basis);
  out.resize(avatar_.size());
  const std::size_t n = avatar_.size();
  const std::size_t blocks = std::min<std::size_t>(n == 0 ? 1 : n, 64);
  std::vector<std::size_t> clamps(blocks, 0);
  parallel_for(blocks, threads_, [&](std::size_t b0, std::size_t b1) {
    for (std::size_t b = b0; b < b1; ++b) {
      for (std::size_t k = n * b / blocks; k < n * (b + 1) / blocks; ++k) {
        Rgb t = Rgb::Zero();
        const Rgb* d = avatar_.transfer.data() + k * nc;
        for (std::size_t i = 0; i < nc; ++i) t += Rgb::Constant(basis[i]) * d[i];
        const Rgb diffuse = avatar_.albedo[k] * t;
        const double g = std::exp((lobe_axes_[k].dot(direction) - 1.0) / avatar_.roughness[k]);
        const Rgb specular = avatar_.visibility[k] * Rgb::Constant(g);
        const Rgb sum = diffuse + specular;
        clamps[b] += static_cast<std::size_t>((sum < 0.0).count());
        out[k] = sum.max(0.0);
      }
    }
  });
  if (stats) {
    for (auto c : clamps) stats->clamp_activations += c;
  }
}

RenderTarget OlatRenderer::frame(const Vec3& direction, const Rgb& background) const {
  std::vector<Rgb> c;
  colors(direction, c);
  return plan_.render(c, background, threads_);
}

void OlatRenderer::frame_linear(const Vec3& direction, std::vector<double>& out) const {
  std::vector<Rgb> c;
  colors(direction, c);
  const auto offsets = plan_.offsets();
  const auto ids = plan_.ids();
  const auto weights = plan_.weights();
  const std::size_t pixels = plan_.transmittance().size();
  out.assign(3 * pixels, 0.0);
  parallel_for(pixels, threads_, [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      Rgb sum = Rgb::Zero();
      for (std::uint64_t e = offsets[p]; e < offsets[p + 1]; ++e) sum += c[ids[e]] * weights[e];
      for (int ch = 0; ch < 3; ++ch) out[3 * p + ch] = sum[ch];
    }
  });
}

std::vector<RenderTarget> render_olat_stack(const RelightableGaussianSet& avatar, std::span<const Vec3> directions,
                                            const Camera& camera, const Rgb& background, std::size_t threads) {
  if (directions.empty()) throw InvalidInput("OLAT rig must contain at least one light");
  const OlatRenderer renderer(avatar, camera, threads);
  std::vector<RenderTarget> stack;
  stack.reserve(directions.size());
  for (const auto& dir : directions) stack.push_back(renderer.frame(dir, background));
  return stack;
}

RenderTarget subtract_background(const RenderTarget& frame, const Rgb& background) {
  RenderTarget out = frame;
  for (std::size_t p = 0; p < frame.pixel_count(); ++p) {
    const double t = frame.transmittance[p];
    for (int c = 0; c < 3; ++c) {
      out.rgb[3 * p + c] = static_cast<float>(frame.rgb[3 * p + c] - background[c] * t);
    }
  }
  return out;
}

RenderTarget ibr_relight(std::span<const RenderTarget> stack, std::span<const Rgb> weights) {
  if (stack.size() != weights.size()) {
    throw InvalidInput("ibr_relight: " + std::to_string(stack.size()) + " frames but " +
                       std::to_string(weights.size()) + " weights");
  }
  if (stack.empty()) throw InvalidInput("ibr_relight: empty OLAT stack");
  const int w = stack.front().width, h = stack.front().height;
  for (const auto& f : stack) {
    if (f.width != w || f.height != h) throw InvalidInput("ibr_relight: OLAT frames differ in size");
  }
  RenderTarget out(w, h);
  out.alpha = stack.front().alpha;
  out.transmittance = stack.front().transmittance;
  const std::size_t values = out.rgb.size();
  for (std::size_t i = 0; i < values; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < stack.size(); ++j) sum += weights[j][i % 3] * stack[j].rgb[i];
    out.rgb[i] = static_cast<float>(sum);
  }
  return out;
}

RenderTarget ibr_relight_streamed(const OlatRenderer& renderer, const PointLightSet& weights,
                                  const Rgb& background) {
  weights.validate();
  const SplatPlan& plan = renderer.plan();
  const std::size_t pixels = plan.transmittance().size();
  std::vector<double> acc(3 * pixels, 0.0);
  for (std::size_t j = 0; j < weights.size(); ++j) {
    // Same float rounding as a stored background-free OLAT frame.
    const RenderTarget frame = renderer.frame(weights.directions[j], Rgb::Zero());
    const Rgb& wj = weights.intensities[j];
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += wj[i % 3] * frame.rgb[i];
  }
  RenderTarget out(plan.width(), plan.height());
  for (std::size_t p = 0; p < pixels; ++p) {
    const double t = plan.transmittance()[p];
    for (int c = 0; c < 3; ++c) out.rgb[3 * p + c] = static_cast<float>(acc[3 * p + c] + background[c] * t);
    out.alpha[p] = static_cast<float>(1.0 - t);
    out.transmittance[p] = static_cast<float>(t);
  }
  return out;
}

NnlsResult nnls_gram(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs, int max_iterations,
                     double rank_tolerance) {
  const Eigen::Index n = rhs.size();
  if (gram.rows() != n || gram.cols() != n) throw InvalidInput("nnls: Gram matrix and rhs disagree in size");
  NnlsResult result;
  result.x = Eigen::VectorXd::Zero(n);
  if (n == 0) {
    result.converged = true;
    return result;
  }
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  const double tol = 10.0 * std::numeric_limits<double>::epsilon() * gram.cwiseAbs().maxCoeff() * n;

  auto solve_passive = [&](Eigen::VectorXd& s) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (passive[i]) idx.push_back(i);
    }
    s = Eigen::VectorXd::Zero(n);
    if (idx.empty()) return;
    const Eigen::Index m = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd g(m, m);
    Eigen::VectorXd r(m);
    for (Eigen::Index a = 0; a < m; ++a) {
      r[a] = rhs[idx[a]];
      for (Eigen::Index b = 0; b < m; ++b) g(a, b) = gram(idx[a], idx[b]);
    }
    const Eigen::VectorXd z = g.completeOrthogonalDecomposition().solve(r);
    for (Eigen::Index a = 0; a < m; ++a) s[idx[a]] = z[a];
  };

  Eigen::VectorXd x = result.x;
  Eigen::VectorXd w = rhs - gram * x;
  while (result.iterations < max_iterations) {
    Eigen::Index best = -1;
    double best_w = tol;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!passive[i] && w[i] > best_w) {
        best_w = w[i];
        best = i;
      }
    }
    if (best < 0) {
      result.converged = true;
      break;
    }
    ++result.iterations;
    passive[best] = true;
    Eigen::VectorXd s;
    solve_passive(s);
    if (s[best] <= 0.0) {
      // Rounding made the entering variable useless; nothing left to gain.
      passive[best] = false;
      result.converged = true;
      break;
    }
    for (int inner = 0; inner < 10 * n; ++inner) {
      double alpha = 1.0;
      bool infeasible = false;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (passive[i] && s[i] <= 0.0) {
          infeasible = true;
          alpha = std::min(alpha, x[i] / (x[i] - s[i]));
        }
      }
      if (!infeasible) break;
      x += alpha * (s - x);
      for (Eigen::Index i = 0; i < n; ++i) {
        if (passive[i] && x[i] <= tol) passive[i] = false;
        if (!passive[i]) x[i] = 0.0;
      }
      solve_passive(s);
    }
    x = s;
    for (Eigen::Index i = 0; i < n; ++i) x[i] = std::max(x[i], 0.0);
    w = rhs - gram * x;
  }

  // Every x >= 0 with G x = G x* is optimal too. With a null space, return
  // the one of least norm: the projection of the origin onto that set, by
  // Dykstra's alternating projections onto the orthant and the affine set.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const double top = eig.eigenvalues().maxCoeff();
  std::vector<Eigen::Index> null_cols;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(eig.eigenvalues()[i] > rank_tolerance * top)) null_cols.push_back(i);
  }
  result.null_space_dim = static_cast<int>(null_cols.size());
  if (!null_cols.empty() && top > 0.0) {
    Eigen::MatrixXd basis(n, static_cast<Eigen::Index>(null_cols.size()));
    for (std::size_t k = 0; k < null_cols.size(); ++k) basis.col(static_cast<Eigen::Index>(k)) = eig.eigenvectors().col(null_cols[k]);
    auto to_affine = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd {
      return x + basis * (basis.transpose() * (y - x));
    };
    Eigen::VectorXd y = to_affine(Eigen::VectorXd::Zero(n));
    if (y.minCoeff() < 0.0) {
      const double scale = std::max(x.cwiseAbs().maxCoeff(), 1e-300);
      Eigen::VectorXd z = Eigen::VectorXd::Zero(n), p = z, q = z;
      for (int it = 0; it < 100000; ++it) {
        const Eigen::VectorXd o = (z + p).cwiseMax(0.0);
        p += z - o;
        const Eigen::VectorXd next = to_affine(o + q);
        q += o - next;
        const double step = (next - z).cwiseAbs().maxCoeff();
        z = next;
        if (step < 1e-15 * scale) break;
      }
      y = z;
    }
    result.x = y.cwiseMax(0.0);
  } else {
    result.x = x;
  }
  return result;
}

InversionResult invert_lighting(std::span<const Observation> observations, const RelightableGaussianSet& avatar,
                                const LightRig& rig, const InversionOptions& options) {
  if (observations.empty()) throw InvalidInput("invert_lighting needs at least one observation");
  rig.validate();
  const Eigen::Index n = static_cast<Eigen::Index>(rig.size());

  // Rows of A (one per covered pixel and observation) and the background-free
  // observed values, per channel.
  std::vector<std::vector<double>> columns(rig.size());
  std::vector<double> observed;  // interleaved RGB over kept pixels
  double uncovered_sq[3] = {0.0, 0.0, 0.0};
  for (const auto& obs : observations) {
    obs.camera.validate();
    if (obs.image.width != obs.camera.width || obs.image.height != obs.camera.height) {
      throw InvalidInput("observation image size does not match its camera");
    }
    const OlatRenderer renderer(avatar, obs.camera, options.threads);
    const SplatPlan& plan = renderer.plan();
    const auto offsets = plan.offsets();
    std::vector<std::size_t> kept;
    for (std::size_t p = 0; p + 1 < offsets.size(); ++p) {
      const double t = plan.transmittance()[p];
      if (offsets[p + 1] > offsets[p]) {
        kept.push_back(p);
        for (int c = 0; c < 3; ++c) observed.push_back(obs.image.rgb[3 * p + c] - options.background[c] * t);
      } else {
        for (int c = 0; c < 3; ++c) {
          const double r = obs.image.rgb[3 * p + c] - options.background[c] * t;
          uncovered_sq[c] += r * r;
        }
      }
    }
    std::vector<double> frame;
    for (std::size_t j = 0; j < rig.size(); ++j) {
      renderer.frame_linear(rig.directions[j], frame);
      auto& col = columns[j];
      for (std::size_t p : kept) {
        for (int c = 0; c < 3; ++c) col.push_back(frame[3 * p + c]);
      }
    }
  }

  const Eigen::Index rows = static_cast<Eigen::Index>(observed.size() / 3);
  InversionResult result;
  result.lights.rig_id = rig.id;
  result.lights.directions = rig.directions;
  result.lights.intensities.assign(rig.size(), Rgb::Zero());
  result.iterations.assign(3, 0);
  result.objective.assign(3, 0.0);
  std::vector<int> null_dims(3, 0);

  parallel_for(3, std::min<std::size_t>(options.threads == 0 ? default_thread_count() : options.threads, 3),
               [&](std::size_t c0, std::size_t c1) {
    for (std::size_t c = c0; c < c1; ++c) {
      Eigen::MatrixXd a(rows, n);
      Eigen::VectorXd b(rows);
      for (Eigen::Index r = 0; r < rows; ++r) {
        b[r] = observed[3 * r + c];
        for (Eigen::Index j = 0; j < n; ++j) a(r, j) = columns[j][3 * r + c];
      }
      const Eigen::MatrixXd gram = a.transpose() * a;
      const Eigen::VectorXd h = a.transpose() * b;
      const double bb = b.squaredNorm() + uncovered_sq[c];

      const NnlsResult sol = nnls_gram(gram, h, options.max_iterations, options.rank_tolerance);
      null_dims[c] = sol.null_space_dim;
      result.iterations[c] = sol.iterations;
      result.objective[c] = std::max(0.0, sol.x.dot(gram * sol.x) - 2.0 * h.dot(sol.x) + bb);
      for (Eigen::Index j = 0; j < n; ++j) result.lights.intensities[j][c] = sol.x[j];
    }
  });

  static const char* kChannelNames[3] = {"red", "green", "blue"};
  for (int c = 0; c < 3; ++c) {
    result.null_space_dim = std::max(result.null_space_dim, null_dims[c]);
    if (null_dims[c] > 0) {
      result.degenerate = true;
      result.warnings.push_back(std::string(kChannelNames[c]) + " channel: system is rank deficient, null space " +
                                "dimension " + std::to_string(null_dims[c]) + "; returning the minimum-norm solution");
    }
  }
  return result;
}

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

RenderTarget synthesize_observation(const RelightableGaussianSet& avatar, const PointLightSet& lights,
                                    const Camera& camera, const Rgb& background, double noise_sigma,
                                    std::uint64_t seed, std::size_t threads) {
  const LightCondition condition = prepare_point_lights(lights, avatar.sh_order);
  const std::vector<Rgb> colors = shade_all(avatar, condition, camera.center(), nullptr, threads);
  RenderTarget image = render(avatar.geometry, colors, camera, {background, threads});
  if (noise_sigma > 0.0) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < image.rgb.size(); i += 2) {
      const double u1 = 1.0 - uniform01(rng);  // (0, 1]
      const double u2 = uniform01(rng);
      const double r = noise_sigma * std::sqrt(-2.0 * std::log(u1));
      image.rgb[i] = static_cast<float>(image.rgb[i] + r * std::cos(2.0 * kPi * u2));
      if (i + 1 < image.rgb.size()) image.rgb[i + 1] = static_cast<float>(image.rgb[i + 1] + r * std::sin(2.0 * kPi * u2));
    }
  }
  return image;
}

std::vector<Rgb> random_intensities(std::size_t count, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::vector<Rgb> out(count);
  for (auto& v : out) {
    for (int c = 0; c < 3; ++c) v[c] = lo + (hi - lo) * uniform01(rng);
  }
  return out;
}

double relative_intensity_error(std::span<const Rgb> x, std::span<const Rgb> reference) {
  if (x.size() != reference.size()) throw InvalidInput("intensity lists differ in length");
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    num += (x[j] - reference[j]).square().sum();
    den += reference[j].square().sum();
  }
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(num / den);
}

RelightMode parse_relight_mode(const std::string& name) {
  if (name == "direct") return RelightMode::kDirect;
  if (name == "ibr" || name == "ibr-10x20") return RelightMode::kIbr;
  throw InvalidInput("unknown relight mode '" + name + "' (expected direct or ibr-10x20)");
}

RenderTarget relight_under_env(const RelightableGaussianSet& avatar, const EnvironmentMap& env,
                               const Camera& camera, RelightMode mode, const RelightOptions& options,
                               RenderStats* stats) {
  if (mode == RelightMode::kDirect) {
    PrefilterOptions prefilter = options.prefilter;
    if (prefilter.threads == 0) prefilter.threads = options.threads;
    const LightCondition condition = prepare_environment(env, avatar.sh_order, options.ladder, prefilter);
    ShadeStats shade_stats;
    const std::vector<Rgb> colors = shade_all(avatar, condition, camera.center(), &shade_stats, options.threads);
    RenderTarget out = render(avatar.geometry, colors, camera, {options.background, options.threads}, stats);
    if (stats) {
      stats->clamp_activations = shade_stats.clamp_activations;
      stats->roughness_clamped = shade_stats.roughness_clamped;
    }
    return out;
  }
  const LightRig rig = options.rig ? *options.rig : fibonacci_rig(331);
  const EnvironmentMap coarse = env.height() == options.ibr_height ? env : downsample_env(env, options.ibr_height);
  const PointLightSet weights = env_to_point_lights(coarse, rig);
  const OlatRenderer renderer(avatar, camera, options.threads);
  RenderTarget out = ibr_relight_streamed(renderer, weights, options.background);
  if (stats) *stats = renderer.plan().stats();
  return out;
}

double rms_difference(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw InvalidInput("rms: buffers differ in size");
  if (a.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(a.size()));
}

double relative_rms(std::span<const float> a, std::span<const float> b) {
  const double diff = rms_difference(a, b);
  double s = 0.0;
  for (float v : b) s += static_cast<double>(v) * v;
  const double ref = std::sqrt(s / static_cast<double>(std::max<std::size_t>(b.size(), 1)));
  if (ref == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return diff / ref;
}

}  // namespace relight
