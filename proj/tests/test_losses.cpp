#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "relight/losses.hpp"

using namespace relight;

namespace {

RenderTarget random_target(std::mt19937_64& rng, int w, int h) {
  RenderTarget t(w, h);
  for (auto& v : t.rgb) v = static_cast<float>(oracle::uniform01(rng));
  return t;
}

std::vector<Vec3> random_vecs(std::mt19937_64& rng, std::size_t n) {
  std::vector<Vec3> v(n);
  for (auto& x : v) x = Vec3(oracle::uniform01(rng), oracle::uniform01(rng), oracle::uniform01(rng)) - Vec3::Constant(0.5);
  return v;
}

}  // namespace

TEST(PairwiseSum, MatchesAndIsOrderFixed) {
  std::vector<double> v(1000);
  std::mt19937_64 rng(1);
  for (auto& x : v) x = oracle::uniform01(rng);
  double naive = 0.0;
  for (double x : v) naive += x;
  const double p = pairwise_sum(v.size(), [&](std::size_t i) { return v[i]; });
  EXPECT_NEAR(p, naive, 1e-10);
  EXPECT_EQ(p, pairwise_sum(v.size(), [&](std::size_t i) { return v[i]; }));
  EXPECT_EQ(pairwise_sum(0, [](std::size_t) { return 1.0; }), 0.0);
}

TEST(L1, Examples) {
  std::mt19937_64 rng(2);
  const auto a = random_target(rng, 12, 7);
  EXPECT_EQ(l1_loss(a, a), 0.0);
  RenderTarget b = a;
  for (auto& v : b.rgb) v += 0.1f;
  EXPECT_NEAR(l1_loss(a, b), 0.1, 1e-6);
  const auto c = random_target(rng, 12, 7);
  double s = 0.0;
  for (std::size_t i = 0; i < a.rgb.size(); ++i) s += std::abs(double(a.rgb[i]) - c.rgb[i]);
  EXPECT_NEAR(l1_loss(a, c), s / a.rgb.size(), 1e-12);
  EXPECT_THROW(l1_loss(a, random_target(rng, 7, 12)), InvalidInput);
}

TEST(L1, Mask) {
  std::mt19937_64 rng(3);
  const auto a = random_target(rng, 8, 8), c = random_target(rng, 8, 8);
  std::vector<float> mask(64, 0.0f);
  double s = 0.0;
  int n = 0;
  for (int p = 0; p < 64; p += 3) {
    mask[p] = 1.0f;
    for (int ch = 0; ch < 3; ++ch) s += std::abs(double(a.rgb[3 * p + ch]) - c.rgb[3 * p + ch]);
    n += 3;
  }
  EXPECT_NEAR(l1_loss(a, c, mask), s / n, 1e-12);
  EXPECT_THROW(l1_loss(a, c, std::vector<float>(10, 1.0f)), InvalidInput);
}

TEST(Ssim, Examples) {
  std::mt19937_64 rng(4);
  const auto a = random_target(rng, 20, 16), b = random_target(rng, 20, 16);
  EXPECT_NEAR(ssim_index(a, a), 1.0, 1e-12);
  EXPECT_NEAR(ssim_loss(a, a), 0.0, 1e-12);
  EXPECT_EQ(ssim_loss(a, b), ssim_loss(b, a));
  EXPECT_GT(ssim_loss(a, b), 0.1);
  EXPECT_THROW(ssim_loss(random_target(rng, 10, 30), random_target(rng, 10, 30)), InvalidInput);
}

TEST(Ssim, ConstantImagesClosedForm) {
  for (double m1 : {0.1, 0.5}) {
    for (double delta : {0.05, 0.3}) {
      RenderTarget a(16, 16), b(16, 16);
      std::fill(a.rgb.begin(), a.rgb.end(), static_cast<float>(m1));
      std::fill(b.rgb.begin(), b.rgb.end(), static_cast<float>(m1 + delta));
      const double x = static_cast<float>(m1), y = static_cast<float>(m1 + delta), c1 = 1e-4;
      EXPECT_NEAR(ssim_index(a, b), (2 * x * y + c1) / (x * x + y * y + c1), 1e-9);
    }
  }
}

TEST(Ssim, ClampsInputs) {
  RenderTarget a(12, 12), b(12, 12);
  std::fill(a.rgb.begin(), a.rgb.end(), 1.0f);
  std::fill(b.rgb.begin(), b.rgb.end(), 5.0f);
  EXPECT_NEAR(ssim_loss(a, b), 0.0, 1e-12);
}

TEST(RegScale, Examples) {
  const double s0 = 0.02;
  EXPECT_EQ(reg_scale(std::vector<Vec3>(5, Vec3::Constant(s0)), s0), 0.0);
  EXPECT_NEAR(reg_scale(std::vector<Vec3>(5, Vec3::Constant(std::exp(1.0) * s0)), s0), 1.0, 1e-14);
  std::vector<Vec3> s{Vec3(0.01, 0.02, 0.04), Vec3(0.001, 0.1, 0.02)};
  double want = 0.0;
  for (const auto& v : s)
    for (int k = 0; k < 3; ++k) want += std::pow(std::log(v[k] / s0), 2);
  EXPECT_NEAR(reg_scale(s, s0), want / 6.0, 1e-14);
  EXPECT_THROW(reg_scale(std::vector<Vec3>{Vec3(0.01, 0.0, 0.01)}, s0), InvalidInput);
  EXPECT_THROW(reg_scale(s, 0.0), InvalidInput);
}

TEST(RegScale, DefaultReference) {
  CoarseMesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 2, 0)};
  m.faces = {{0, 1, 2}};
  m.uvs = {Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)};
  m.uv_faces = {{0, 1, 2}};
  // Edges 1, sqrt(5), 2; median 2.
  EXPECT_DOUBLE_EQ(default_reference_scale(m), 0.5);
}

TEST(RegOffsetNormal, Examples) {
  std::mt19937_64 rng(5);
  for (auto fn : {reg_offset, reg_normal}) {
    std::vector<Vec3> z(10, Vec3::Zero());
    EXPECT_EQ(fn(z), 0.0);
    z[3] = Vec3(1, 0, 0);
    EXPECT_DOUBLE_EQ(fn(z), 0.1);
    const auto r = random_vecs(rng, 31);
    double s = 0.0;
    for (const auto& v : r) s += v.squaredNorm();
    EXPECT_NEAR(fn(r), s / 31.0, 1e-15);
  }
}

TEST(RegAlbedo, Examples) {
  std::mt19937_64 rng(6);
  std::vector<float> mean(48), rho(48), up(48), mask(16, 0.0f);
  for (std::size_t i = 0; i < 48; ++i) {
    mean[i] = static_cast<float>(oracle::uniform01(rng) * 0.7);
    rho[i] = static_cast<float>(oracle::uniform01(rng));
    up[i] = mean[i] + 0.2f;
  }
  EXPECT_EQ(reg_albedo(mean, mean), 0.0);
  EXPECT_NEAR(reg_albedo(up, mean), 0.04, 1e-7);
  double s = 0.0;
  int n = 0;
  for (int t = 0; t < 16; t += 2) {
    mask[t] = 1.0f;
    for (int c = 0; c < 3; ++c) s += std::pow(double(rho[3 * t + c]) - mean[3 * t + c], 2), ++n;
  }
  EXPECT_NEAR(reg_albedo(rho, mean, mask), s / n, 1e-15);
  EXPECT_THROW(reg_albedo(rho, std::vector<float>(47)), InvalidInput);
}

TEST(RegMonochrome, Examples) {
  EXPECT_EQ(reg_monochrome(std::vector<Rgb>(8, Rgb(0.4, 0.4, 0.4))), 0.0);
  EXPECT_DOUBLE_EQ(reg_monochrome(std::vector<Rgb>(8, Rgb(1, 1, 4))), 2.0);
  std::mt19937_64 rng(7);
  std::vector<Rgb> d(33);
  double s = 0.0;
  for (auto& x : d) {
    x = Rgb(oracle::uniform01(rng), oracle::uniform01(rng), oracle::uniform01(rng)) - 0.5;
    const double m = (x[0] + x[1] + x[2]) / 3.0;
    s += ((x[0] - m) * (x[0] - m) + (x[1] - m) * (x[1] - m) + (x[2] - m) * (x[2] - m)) / 3.0;
  }
  EXPECT_NEAR(reg_monochrome(d), s / 33.0, 1e-15);
  // Channel permutation invariance.
  std::vector<Rgb> perm(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) perm[i] = Rgb(d[i][2], d[i][0], d[i][1]);
  EXPECT_NEAR(reg_monochrome(perm), reg_monochrome(d), 1e-15);
}

TEST(NegativeDiffuse, Examples) {
  std::vector<Rgb> c(6, Rgb(0.1, 0.2, 0.3));
  EXPECT_EQ(penalty_negative_diffuse(c), 0.0);
  c[4][2] = -0.5;
  EXPECT_DOUBLE_EQ(penalty_negative_diffuse(c), 0.25 / 18.0);
  std::mt19937_64 rng(8);
  std::vector<Rgb> r(20);
  double s = 0.0;
  for (auto& x : r) {
    x = Rgb(oracle::uniform01(rng), oracle::uniform01(rng), oracle::uniform01(rng)) - 0.5;
    for (int k = 0; k < 3; ++k) s += std::pow(std::min(x[k], 0.0), 2);
  }
  EXPECT_NEAR(penalty_negative_diffuse(r), s / 60.0, 1e-15);
  // Zero on any clamped output.
  for (auto& x : r) x = x.max(0.0);
  EXPECT_EQ(penalty_negative_diffuse(r), 0.0);
}

TEST(Geometry, Examples) {
  std::mt19937_64 rng(9);
  const auto v = random_vecs(rng, 25), w = random_vecs(rng, 25);
  EXPECT_EQ(geometry_loss(v, v), 0.0);
  std::vector<Vec3> moved(v);
  const Vec3 d(0.3, -0.1, 0.2);
  for (auto& x : moved) x += d;
  EXPECT_NEAR(geometry_loss(moved, v), d.squaredNorm(), 1e-15);
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += (v[i] - w[i]).squaredNorm();
  EXPECT_NEAR(geometry_loss(v, w), s / 25.0, 1e-15);
  EXPECT_THROW(geometry_loss(v, std::span<const Vec3>(w).first(3)), InvalidInput);
}

TEST(PermutationInvariance, RegularizersOverGaussians) {
  std::mt19937_64 rng(10);
  auto v = random_vecs(rng, 40);
  const double a = reg_offset(v);
  std::shuffle(v.begin(), v.end(), rng);
  EXPECT_NEAR(reg_offset(v), a, 1e-15);
}

TEST(Schedule, LinearRamp) {
  const LossWeights w;
  EXPECT_EQ(w.offset.at(0), 1.0);
  EXPECT_NEAR(w.offset.at(10000), 0.5005, 1e-15);
  EXPECT_EQ(w.offset.at(20000), 0.001);
  EXPECT_EQ(w.offset.at(40000), 0.001);
  EXPECT_EQ(w.normal.at(5000), 0.0);
  EXPECT_EQ(w.albedo.at(0), 10.0);
  EXPECT_EQ(w.albedo.at(99999), 0.01);
}

TEST(StageLosses, WeightsAndLinearity) {
  const LossWeights w;
  EXPECT_EQ(w.l1, 10.0);
  EXPECT_EQ(w.ssim, 0.2);
  EXPECT_EQ(w.geo, 0.4);
  EXPECT_EQ(w.scale, 0.01);
  EXPECT_EQ(w.negative_color, 0.01);
  EXPECT_EQ(w.mono, 0.01);
  EXPECT_EQ(w.id, 0.01);

  LossComponents zero;
  zero.l1 = zero.ssim = zero.geo = zero.scale = zero.offset = 0.0;
  EXPECT_EQ(stage_losses(w, zero, Objective::kStage1), 0.0);

  LossComponents one;
  one.geo = 1.0;
  EXPECT_EQ(stage_losses(w, one, Objective::kStage1), 0.4);
  EXPECT_EQ(stage_losses(w, one, Objective::kStage2), 0.0);  // not a stage-2 term

  std::mt19937_64 rng(11);
  LossComponents r;
  r.l1 = oracle::uniform01(rng);
  r.ssim = oracle::uniform01(rng);
  r.geo = oracle::uniform01(rng);
  r.scale = oracle::uniform01(rng);
  r.offset = oracle::uniform01(rng);
  const double want = 10 * *r.l1 + 0.2 * *r.ssim + 0.4 * *r.geo + 0.01 * *r.scale + 1.0 * *r.offset;
  EXPECT_NEAR(stage_losses(w, r, Objective::kStage1), want, 1e-14);

  LossComponents doubled = r;
  for (auto* f : {&doubled.l1, &doubled.ssim, &doubled.geo, &doubled.scale, &doubled.offset}) **f *= 2.0;
  EXPECT_NEAR(stage_losses(w, doubled, Objective::kStage1), 2.0 * want, 1e-13);

  LossComponents inv;
  inv.l1 = 0.5;
  inv.id_norm2 = 3.0;
  EXPECT_NEAR(stage_losses(w, inv, Objective::kInversion), 5.0 + 0.03, 1e-15);
}

TEST(Report, TextAndJson) {
  const std::map<std::string, double> m{{"l1", 0.25}, {"ssim", 0.125}};
  EXPECT_EQ(format_loss_report_text(m), "l1=0.25\nssim=0.125\n");
  EXPECT_EQ(format_loss_report_json(m), "{\"l1\":0.25,\"ssim\":0.125}");
}
