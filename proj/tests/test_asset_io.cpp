#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "relight/asset_io.hpp"
#include "relight/demo.hpp"
#include "relight/image_io.hpp"

using namespace relight;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("relight_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

AvatarAsset small_demo(std::uint64_t seed = 1) {
  DemoOptions o;
  o.seed = seed;
  o.resolution = 32;
  o.rings = 8;
  o.segments = 16;
  return gen_demo_avatar(o);
}

}  // namespace

TEST(Obj, RoundTripIsExact) {
  const auto mesh = make_uv_sphere(5, 7, Vec3(0.1, 0.2, 0.3));
  const auto back = decode_obj(encode_obj(mesh));
  EXPECT_EQ(back.vertices, mesh.vertices);
  EXPECT_EQ(back.uvs, mesh.uvs);
  EXPECT_EQ(back.faces, mesh.faces);
  EXPECT_EQ(back.uv_faces, mesh.uv_faces);
}

TEST(Obj, ReaderAcceptsNormalsQuadsAndNegativeIndices) {
  const std::string text =
      "# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 1 1\nvt 0 1\nvn 0 0 1\n"
      "f -4/-4/1 -3/-3/1 -2/-2/1 -1/-1/1\n";
  const auto m = decode_obj(text);
  ASSERT_EQ(m.faces.size(), 2u);
  EXPECT_EQ(m.faces[0], (std::array<int, 3>{0, 1, 2}));
  EXPECT_EQ(m.faces[1], (std::array<int, 3>{0, 2, 3}));
  EXPECT_EQ(m.uv_faces, m.faces);
}

TEST(Obj, RejectsMissingUvs) {
  EXPECT_THROW(decode_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n"), InvalidAsset);
  EXPECT_THROW(decode_obj("v 0 0 0\nvt 0 0\nf 1/1 2/1 3/1\n"), InvalidAsset);
}

TEST(Plane, BytesAreLittleEndianFloat32) {
  Plane p{2, {1.0f, -2.5f, 0.1f, 3e-39f}};
  const auto bytes = encode_plane(p);
  ASSERT_EQ(bytes.size(), 16u);
  EXPECT_EQ(bytes[0], 0x00);
  EXPECT_EQ(bytes[3], 0x3f);  // 1.0f = 0x3f800000
  EXPECT_EQ(decode_plane(bytes), p.data);
  EXPECT_THROW(decode_plane(std::vector<std::uint8_t>(7)), InvalidAsset);
}

TEST(Meta, RoundTrip) {
  AvatarMeta m;
  m.resolution = 64;
  m.sh_order = ShOrder(2);
  m.rig_id = "fibonacci-32";
  m.clamp_roughness = false;
  m.preset = "sphere-head";
  m.seed = 99;
  m.channels = {{"albedo", 3}, {"mask", 1}};
  const auto back = decode_meta(encode_meta(m));
  EXPECT_EQ(back.resolution, 64);
  EXPECT_EQ(back.sh_order, ShOrder(2));
  EXPECT_EQ(back.rig_id, m.rig_id);
  EXPECT_FALSE(back.clamp_roughness);
  EXPECT_EQ(back.seed, 99u);
  ASSERT_EQ(back.channels.size(), 2u);
  EXPECT_EQ(back.channels[0].name, "albedo");
  EXPECT_EQ(back.channels[1].components, 1);
  EXPECT_THROW(decode_meta("{\"format\": \"other\"}"), InvalidAsset);
  EXPECT_THROW(decode_meta("not json"), InvalidAsset);
}

TEST(Asset, SaveLoadBitEqual) {
  TempDir dir("asset_roundtrip");
  const auto a = small_demo();
  save_asset(a, dir.path);
  EXPECT_TRUE(fs::exists(dir.path / "meta.json"));
  EXPECT_TRUE(fs::exists(dir.path / "mesh.obj"));
  EXPECT_TRUE(fs::exists(dir.path / "albedo.f32"));
  const auto b = load_asset(dir.path);
  EXPECT_EQ(b.mesh.vertices, a.mesh.vertices);
  for (const auto& [name, plane] : a.planes.planes()) EXPECT_EQ(b.planes.plane(name).data, plane.data) << name;
  const auto ra = a.relightable(), rb = b.relightable();
  EXPECT_EQ(ra.geometry.positions, rb.geometry.positions);
  EXPECT_EQ(ra.normals, rb.normals);
  EXPECT_EQ(ra.roughness, rb.roughness);
}

TEST(Asset, MissingPlaneNamesChannel) {
  TempDir dir("asset_missing");
  save_asset(small_demo(), dir.path);
  fs::remove(dir.path / "albedo.f32");
  try {
    load_asset(dir.path);
    FAIL();
  } catch (const InvalidAsset& e) {
    EXPECT_NE(std::string(e.what()).find("albedo"), std::string::npos);
  }
  const auto v = validate_asset_dir(dir.path);
  ASSERT_TRUE(v);
  EXPECT_EQ(v->invariant, "AvatarAsset.container");
}

TEST(Asset, TruncatedPlaneIsRejected) {
  TempDir dir("asset_truncated");
  save_asset(small_demo(), dir.path);
  auto bytes = read_file_bytes(dir.path / "scale.f32");
  bytes.resize(bytes.size() - 4);
  write_file_bytes(dir.path / "scale.f32", bytes);
  EXPECT_THROW(load_asset(dir.path), InvalidAsset);
}

TEST(Validate, DemoPasses) { EXPECT_FALSE(validate_asset(small_demo())); }

TEST(Validate, RoughnessOutsideRangeWithClampDisabled) {
  auto a = small_demo();
  a.meta.clamp_roughness = false;
  const int texel = a.bind().texels[5].texel;
  a.planes.plane(channel::kRoughness).data[texel] = static_cast<float>(std::log(1.5));
  const auto v = validate_asset(a);
  ASSERT_TRUE(v);
  EXPECT_EQ(v->invariant, "SpecularLobe.roughness");
  // With the clamp marker on, the same value is legal.
  a.meta.clamp_roughness = true;
  EXPECT_FALSE(validate_asset(a));
}

TEST(Validate, NamesEachInvariant) {
  const auto base = small_demo();
  const int texel = base.bind().texels[3].texel;
  auto expect = [](AvatarAsset a, const std::string& name) {
    const auto v = validate_asset(a);
    ASSERT_TRUE(v) << name;
    EXPECT_EQ(v->invariant, name);
  };
  {
    auto a = base;
    a.planes.plane(channel::kAlbedo).data[7] = std::nanf("");
    expect(a, "ParamPlanes.finite");
  }
  {
    auto a = base;
    a.mesh.faces[0][1] = 100000;
    expect(a, "CoarseMesh.indices");
  }
  {
    auto a = base;
    a.mesh.uvs[2] = Vec2(1.5, 0.2);
    expect(a, "CoarseMesh.uv_range");
  }
  {
    auto a = base;
    for (int c = 0; c < 4; ++c) a.planes.plane(channel::kRotation).data[texel * 4 + c] = 0.0f;
    expect(a, "Gaussian.rotation");
  }
  {
    auto a = base;
    a.planes.plane(channel::kMask).data[texel] = 0.5f;
    expect(a, "ParamPlanes.mask");
  }
  {
    auto a = base;
    const auto b = a.bind();
    int uncovered = -1;
    for (std::size_t t = 0; t < b.texel_to_gaussian.size() && uncovered < 0; ++t)
      if (b.texel_to_gaussian[t] < 0) uncovered = static_cast<int>(t);
    ASSERT_GE(uncovered, 0);
    a.planes.plane(channel::kMask).data[uncovered] = 1.0f;
    expect(a, "ParamPlanes.mask");
  }
  {
    // Flat square facing +z, so n-hat is exactly (0, 0, 1) and the residual
    // can cancel it exactly.
    auto a = base;
    a.mesh.vertices = {{-0.1, -0.1, 0.0}, {0.1, -0.1, 0.0}, {0.1, 0.1, 0.0}, {-0.1, 0.1, 0.0}};
    a.mesh.uvs = {{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}};
    a.mesh.faces = {{0, 1, 2}, {0, 2, 3}};
    a.mesh.uv_faces = a.mesh.faces;
    auto& mask = a.planes.plane(channel::kMask).data;
    std::fill(mask.begin(), mask.end(), 1.0f);
    EXPECT_FALSE(validate_asset(a));
    const auto t = a.bind().texels[3];
    ASSERT_EQ(t.normal_base, Vec3(0.0, 0.0, 1.0));
    a.planes.plane(channel::kNormalResidual).data[t.texel * 3 + 2] = -1.0f;
    expect(a, "Gaussian.normal");
  }
  {
    auto a = base;
    a.meta.sh_order = ShOrder(2);
    expect(a, "SHCoefficients.length");
  }
}

TEST(Rig, JsonRoundTripBitEqual) {
  LightRig rig = fibonacci_rig(17);
  const auto back = decode_rig(encode_rig(rig));
  EXPECT_EQ(back.id, rig.id);
  EXPECT_EQ(back.directions, rig.directions);
  EXPECT_THROW(decode_rig("{\"rig_id\": \"x\", \"directions\": [[0, 0, 2]]}"), InvalidInput);
}

TEST(Weights, JsonRoundTripBitEqual) {
  std::mt19937_64 rng(1);
  std::vector<Rgb> w(9);
  for (auto& x : w) x = Rgb(oracle::uniform01(rng), oracle::uniform01(rng), oracle::uniform01(rng)) / 3.0;
  const auto back = decode_weights(encode_weights(w));
  ASSERT_EQ(back.size(), w.size());
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_TRUE((back[i] == w[i]).all());
}

TEST(CameraJson, ExplicitAndOrbit) {
  const Camera c = Camera::orbit(33.0, -12.0, 0.7, Vec3(0.01, 0.02, 0.03), 35.0, 120, 80);
  const Camera back = decode_camera(encode_camera(c));
  EXPECT_EQ(back.rotation, c.rotation);
  EXPECT_EQ(back.translation, c.translation);
  EXPECT_EQ(back.fx, c.fx);
  EXPECT_EQ(back.width, 120);
  const Camera orbit = decode_camera(
      R"({"orbit": {"azimuth": 33, "elevation": -12, "distance": 0.7, "target": [0.01, 0.02, 0.03], "fov_y": 35},
          "width": 120, "height": 80})");
  EXPECT_LT((orbit.rotation - c.rotation).norm(), 1e-15);
  EXPECT_LT((orbit.translation - c.translation).norm(), 1e-15);
  EXPECT_THROW(decode_camera("{\"width\": 3}"), InvalidInput);
}
