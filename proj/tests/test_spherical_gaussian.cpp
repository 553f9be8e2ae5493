#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "relight/spherical_gaussian.hpp"

using namespace relight;

TEST(SpecularLobe, Invariants) {
  EXPECT_THROW(SpecularLobe(Vec3(0, 0, 2), 0.5), InvalidInput);
  EXPECT_THROW(SpecularLobe(Vec3::UnitZ(), 0.0), InvalidInput);
  EXPECT_THROW(SpecularLobe(Vec3::UnitZ(), 1.0), InvalidInput);
  EXPECT_THROW(SpecularLobe(Vec3::UnitZ(), -0.1), InvalidInput);
  EXPECT_DOUBLE_EQ(SpecularLobe(Vec3::UnitX(), 0.25).sharpness(), 4.0);
}

TEST(SgEval, Examples) {
  const Vec3 a = Vec3(1, 2, 2).normalized();
  EXPECT_EQ(sg_eval(SpecularLobe(a, 0.3), a), 1.0);
  EXPECT_NEAR(sg_eval(SpecularLobe(a, 0.5), -a), 0.0183156, 1e-7);
  const Vec3 z = Vec3::UnitZ();
  const Vec3 w(std::sqrt(1.0 - 0.81), 0.0, 0.9);
  EXPECT_NEAR(sg_eval(SpecularLobe(z, 0.25), w), 0.670320, 1e-6);
}

TEST(SgEval, DecreasesWithAngle) {
  const SpecularLobe lobe(Vec3::UnitZ(), 0.2);
  double prev = 2.0;
  for (int i = 0; i <= 180; ++i) {
    const double t = kPi * i / 180.0;
    const double g = sg_eval(lobe, Vec3(std::sin(t), 0.0, std::cos(t)));
    EXPECT_LT(g, prev);
    EXPECT_GT(g, 0.0);
    prev = g;
  }
}

TEST(SgSphereIntegral, ClosedFormValues) {
  EXPECT_NEAR(sg_sphere_integral(1.0), 2.0 * kPi * (1.0 - std::exp(-2.0)), 1e-12);
  EXPECT_NEAR(sg_sphere_integral(1.0), 5.432849, 1e-6);
  EXPECT_NEAR(sg_sphere_integral(0.1), 0.6283185, 1e-7);
  double prev = 1e9;
  for (double s : {0.9, 0.5, 0.1, 1e-2, 1e-4, 1e-8}) {
    const double v = sg_sphere_integral(s);
    EXPECT_LT(v, prev);
    prev = v;
  }
  EXPECT_LT(sg_sphere_integral(1e-8), 1e-7);
}

TEST(SgSphereIntegral, MatchesQuadrature) {
  std::mt19937_64 rng(9);
  const Vec3 axis = oracle::random_unit(rng);
  for (double s : {0.05, 0.1, 0.25, 0.5, 0.9, 1.0}) {
    const double q = oracle::sphere_integral([&](const Vec3& w) { return std::exp((axis.dot(w) - 1.0) / s); },
                                             1000, 1000);
    EXPECT_NEAR(sg_sphere_integral(s), q, 1e-5 * q) << s;
  }
}

TEST(ReflectLobeAxis, Examples) {
  const Vec3 n = Vec3(1, -1, 3).normalized();
  EXPECT_LT((reflect_lobe_axis(n, n) - n).norm(), 1e-15);
  const Vec3 grazing = n.cross(Vec3::UnitX()).normalized();
  EXPECT_LT((reflect_lobe_axis(grazing, n) + grazing).norm(), 1e-15);

  const double h = 22.5 * kPi / 180.0;
  const Vec3 a = reflect_lobe_axis(Vec3::UnitZ(), Vec3(0.0, std::sin(h), std::cos(h)));
  const Vec3 want = Vec3(0.0, std::sin(kPi / 4.0), std::cos(kPi / 4.0));
  EXPECT_LT((a - want).norm(), 1e-7);
}

TEST(ReflectLobeAxis, Involution) {
  std::mt19937_64 rng(10);
  for (int i = 0; i < 100; ++i) {
    const Vec3 n = oracle::random_unit(rng), v = oracle::random_unit(rng);
    EXPECT_LT((reflect_lobe_axis(reflect_lobe_axis(v, n), n) - v).norm(), 1e-12);
  }
}

TEST(PointLightResponse, Examples) {
  const Vec3 a = Vec3(0, 1, 1).normalized();
  const SpecularLobe lobe(a, 0.5);
  EXPECT_LT((sg_point_light_response(lobe, a, Rgb::Ones()) - Rgb::Ones()).abs().maxCoeff(), 1e-15);
  EXPECT_TRUE((sg_point_light_response(lobe, a, Rgb::Zero()) == Rgb::Zero()).all());
  const Vec3 perp = Vec3::UnitX();
  const Rgb i(0.3, 1.2, 2.0);
  const Rgb r = sg_point_light_response(lobe, perp, i);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(r[c], i[c] * std::exp(-2.0), 1e-15);
  EXPECT_THROW(sg_point_light_response(lobe, a, Rgb(-1, 0, 0)), InvalidInput);
}

TEST(PointLightResponse, LinearInIntensity) {
  const SpecularLobe lobe(Vec3::UnitY(), 0.2);
  const Vec3 d = Vec3(0.3, 0.8, 0.1).normalized();
  const Rgb a(0.1, 0.2, 0.3), b(1.0, 0.5, 0.25);
  const Rgb lhs = sg_point_light_response(lobe, d, 2.0 * a + b);
  const Rgb rhs = 2.0 * sg_point_light_response(lobe, d, a) + sg_point_light_response(lobe, d, b);
  EXPECT_LT((lhs - rhs).abs().maxCoeff(), 1e-15);
}
