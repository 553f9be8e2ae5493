#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "relight/sh_basis.hpp"

using namespace relight;

TEST(ShOrder, CoefficientCountAndRange) {
  for (int n = 0; n <= kMaxShOrder; ++n) EXPECT_EQ(ShOrder(n).count(), static_cast<std::size_t>((n + 1) * (n + 1)));
  EXPECT_EQ(ShOrder().n(), 3);
  EXPECT_THROW(ShOrder(-1), InvalidInput);
  EXPECT_THROW(ShOrder(5), InvalidInput);
}

TEST(ShCoefficients, LengthMustMatchOrder) {
  EXPECT_THROW(ShCoefficients(ShOrder(2), std::vector<Rgb>(8, Rgb::Zero())), InvalidInput);
  EXPECT_NO_THROW(ShCoefficients(ShOrder(2), std::vector<Rgb>(9, Rgb::Zero())));
}

TEST(EvalShBasis, DcAtPole) {
  const auto y = eval_sh_basis(Vec3::UnitZ(), ShOrder(0));
  ASSERT_EQ(y.size(), 1u);
  EXPECT_NEAR(y[0], 0.2820948, 1e-7);
  EXPECT_DOUBLE_EQ(y[0], 0.5 / std::sqrt(kPi));
}

TEST(EvalShBasis, DcIndependentOfDirection) {
  std::mt19937_64 rng(1);
  const double y0 = eval_sh_basis(Vec3::UnitZ(), ShOrder(0))[0];
  for (int i = 0; i < 100; ++i) EXPECT_EQ(eval_sh_basis(oracle::random_unit(rng), ShOrder(0))[0], y0);
}

TEST(EvalShBasis, BandOneVanishesOffAxisAtPole) {
  const auto y = eval_sh_basis(Vec3::UnitZ(), ShOrder(1));
  EXPECT_EQ(y[sh_index(1, -1)], 0.0);
  EXPECT_EQ(y[sh_index(1, 1)], 0.0);
  EXPECT_GT(y[sh_index(1, 0)], 0.0);
}

TEST(EvalShBasis, MatchesWrittenOutLowBands) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i) {
    const Vec3 d = oracle::random_unit(rng);
    const auto got = eval_sh_basis(d, ShOrder(2));
    const auto want = oracle::sh_l2(d);
    for (std::size_t k = 0; k < want.size(); ++k) EXPECT_NEAR(got[k], want[k], 1e-14) << k;
  }
}

TEST(EvalShBasis, RejectsBadDirections) {
  EXPECT_THROW(eval_sh_basis(Vec3(1.0, 1.0, 0.0), ShOrder(2)), InvalidInput);
  EXPECT_THROW(eval_sh_basis(Vec3(std::nan(""), 0.0, 1.0), ShOrder(2)), InvalidInput);
  EXPECT_NO_THROW(eval_sh_basis(Vec3(0.0, 0.0, 1.0 + 5e-7), ShOrder(2)));
}

TEST(Quadrature, WeightsSumToSphereArea) {
  for (auto kind : {QuadratureSpec::Kind::kFibonacci, QuadratureSpec::Kind::kMonteCarlo}) {
    const auto nodes = sphere_quadrature({kind, 5000, 3});
    double s = 0.0;
    for (const auto& n : nodes) {
      s += n.weight;
      EXPECT_NEAR(n.direction.norm(), 1.0, 1e-12);
    }
    EXPECT_NEAR(s, 4.0 * kPi, 1e-10);
  }
}

TEST(Orthonormality, OrderFourUnderDefaultQuadrature) {
  const ShOrder order(4);
  const std::size_t n = order.count();
  const auto nodes = sphere_quadrature({});
  std::vector<double> gram(n * n, 0.0), y(n);
  for (const auto& node : nodes) {
    eval_sh_basis_unchecked(node.direction, order, y);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) gram[i * n + j] += node.weight * y[i] * y[j];
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(gram[i * n + j], i == j ? 1.0 : 0.0, 1e-4);
}

TEST(ProjectToSh, ConstantFunction) {
  const auto c = project_to_sh([](const Vec3&) { return Rgb(1, 1, 1); }, ShOrder(2));
  for (int ch = 0; ch < 3; ++ch) EXPECT_NEAR(c[0][ch], 2.0 * std::sqrt(kPi), 1e-6);
  for (std::size_t i = 1; i < c.size(); ++i) EXPECT_LT(c[i].abs().maxCoeff(), 1e-6);
}

TEST(ProjectToSh, BasisFunctionIsOneHot) {
  const ShOrder order(1);
  const auto c = project_to_sh(
      [](const Vec3& w) { return Rgb::Constant(std::sqrt(3.0 / (4.0 * kPi)) * w.z()); }, order);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(c[i][0], i == 2 ? 1.0 : 0.0, 1e-6);
}

TEST(ProjectToSh, ZeroFunction) {
  const auto c = project_to_sh([](const Vec3&) { return Rgb(0, 0, 0); }, ShOrder(3));
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(c[i].abs().maxCoeff(), 0.0);
}

TEST(ProjectToSh, RefusesTooFewNodes) {
  EXPECT_THROW(project_to_sh([](const Vec3&) { return Rgb(1, 1, 1); }, ShOrder(3), {QuadratureSpec::Kind::kFibonacci, 63}),
               InvalidInput);
}

TEST(ProjectToSh, DcInvariantUnderRotation) {
  auto f = [](const Vec3& w) { return Rgb::Constant(std::exp(2.0 * w.x()) + w.y() * w.y()); };
  const Mat3 r = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
  const auto a = project_to_sh(f, ShOrder(2));
  const auto b = project_to_sh([&](const Vec3& w) { return f(r * w); }, ShOrder(2));
  EXPECT_NEAR(a[0][0], b[0][0], 1e-5 * std::abs(a[0][0]));
}

TEST(ShDot, TrivialCases) {
  std::mt19937_64 rng(4);
  std::vector<Rgb> b(16), zero(16, Rgb::Zero());
  for (auto& v : b) v = Rgb(oracle::uniform01(rng), oracle::uniform01(rng), oracle::uniform01(rng));
  EXPECT_EQ(sh_dot(zero, b).abs().maxCoeff(), 0.0);
  for (std::size_t i = 0; i < 16; ++i) {
    std::vector<Rgb> a(16, Rgb::Zero());
    a[i] = Rgb::Ones();
    EXPECT_TRUE((sh_dot(a, b) == b[i]).all());
  }
  EXPECT_THROW(sh_dot(std::span<const Rgb>(b).first(9), b), InvalidInput);
}

TEST(ShDot, Bilinear) {
  std::mt19937_64 rng(5);
  auto rnd = [&] {
    std::vector<Rgb> v(16);
    for (auto& x : v) x = Rgb(oracle::uniform01(rng), oracle::uniform01(rng), oracle::uniform01(rng)) - 0.5;
    return v;
  };
  for (int t = 0; t < 50; ++t) {
    const auto a = rnd(), a2 = rnd(), b = rnd();
    const double alpha = 2.0 * oracle::uniform01(rng) - 1.0, beta = 3.0 * oracle::uniform01(rng);
    std::vector<Rgb> mix(16);
    for (std::size_t i = 0; i < 16; ++i) mix[i] = alpha * a[i] + beta * a2[i];
    const Rgb lhs = sh_dot(mix, b);
    const Rgb rhs = alpha * sh_dot(a, b) + beta * sh_dot(a2, b);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(lhs[c], rhs[c], 1e-12 * std::max(1.0, std::abs(rhs[c])));
  }
}

// Constant light against the clamped-cosine transfer about +z: the integral
// of max(0, z) over the sphere is pi.
TEST(ShDot, ConstantLightClampedCosineAgainstQuadrature) {
  const ShOrder order(3);
  const auto light = project_to_sh([](const Vec3&) { return Rgb(1, 1, 1); }, order);
  const auto t = clamped_cosine_sh(Vec3::UnitZ(), order);
  std::vector<Rgb> tr(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) tr[i] = Rgb::Constant(t[i]);
  const double want = oracle::sphere_integral([](const Vec3& w) { return std::max(0.0, w.z()); }, 400, 8);
  EXPECT_NEAR(sh_dot(light.coeffs(), tr)[0], want, 1e-4 * want);
}

TEST(ClampedCosine, BandWeights) {
  EXPECT_DOUBLE_EQ(clamped_cosine_band(0), kPi);
  EXPECT_DOUBLE_EQ(clamped_cosine_band(1), 2.0 * kPi / 3.0);
  EXPECT_DOUBLE_EQ(clamped_cosine_band(2), kPi / 4.0);
  EXPECT_DOUBLE_EQ(clamped_cosine_band(3), 0.0);
  EXPECT_DOUBLE_EQ(clamped_cosine_band(4), -kPi / 24.0);
}

// Exact for band-limited light: compare against quadrature of L * max(0, a.w)
// for a random order-2 light.
TEST(ClampedCosine, ReproducesIrradianceOfBandLimitedLight) {
  std::mt19937_64 rng(6);
  const Vec3 axis = oracle::random_unit(rng);
  std::vector<double> l(9);
  for (auto& v : l) v = oracle::uniform01(rng) - 0.5;
  auto light = [&](const Vec3& w) {
    const auto y = oracle::sh_l2(w);
    double s = 0.0;
    for (int i = 0; i < 9; ++i) s += l[i] * y[i];
    return s;
  };
  // The integrand is smooth on the lit hemisphere, so integrate only there:
  // Gauss-Legendre mapped to cos in [0, 1] times the trapezoid rule in azimuth.
  const oracle::GaussLegendre gl(64);
  Vec3 t, b;
  oracle::frame_about(axis, t, b);
  double want = 0.0;
  for (std::size_t i = 0; i < gl.x.size(); ++i) {
    const double z = 0.5 * (gl.x[i] + 1.0), r = std::sqrt(1.0 - z * z);
    double ring = 0.0;
    for (int j = 0; j < 64; ++j) {
      const double phi = 2.0 * kPi * (j + 0.5) / 64;
      ring += light(z * axis + r * std::cos(phi) * t + r * std::sin(phi) * b) * z;
    }
    want += 0.5 * gl.w[i] * ring * 2.0 * kPi / 64;
  }
  const auto c = clamped_cosine_sh(axis, ShOrder(2));
  double got = 0.0;
  for (int i = 0; i < 9; ++i) got += l[i] * c[i];
  EXPECT_NEAR(got, want, 1e-8);
}
