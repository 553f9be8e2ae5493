#include <gtest/gtest.h>

#include <json.hpp>

#include <filesystem>
#include <sstream>

#include "relight/asset_io.hpp"
#include "relight/cli.hpp"
#include "relight/image_io.hpp"

using namespace relight;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out, err;
  json stats() const {
    const auto line = out.substr(0, out.find('\n'));
    return json::parse(line);
  }
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "relight");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  static fs::path root;
  static fs::path asset;

  static void SetUpTestSuite() {
    root = fs::temp_directory_path() / "relight_test_cli";
    fs::remove_all(root);
    fs::create_directories(root);
    asset = root / "demo";
    const auto r = run({"gen-demo", "--out", asset.string(), "--seed", "2", "--resolution", "64", "--rings", "16",
                        "--segments", "32"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static void TearDownTestSuite() { fs::remove_all(root); }

  static std::vector<std::string> small_camera() { return {"--width", "48", "--height", "48"}; }
};

fs::path Cli::root;
fs::path Cli::asset;

std::vector<std::string> operator+(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_F(Cli, ValidateDemo) {
  const auto r = run({"validate", "--asset", asset.string()});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(r.stats()["valid"].get<bool>());
}

TEST_F(Cli, ValidateRoughnessViolationExitsTwo) {
  const fs::path bad = root / "bad_roughness";
  auto a = load_asset(asset);
  a.meta.clamp_roughness = false;
  a.planes.plane("roughness").data[a.bind().texels[0].texel] = static_cast<float>(std::log(1.5));
  save_asset(a, bad);
  const auto r = run({"validate", "--asset", bad.string()});
  EXPECT_EQ(r.code, kExitAsset);
  EXPECT_EQ(r.stats()["invariant"], "SpecularLobe.roughness");
  EXPECT_NE(r.err.find("SpecularLobe.roughness"), std::string::npos);
}

TEST_F(Cli, RenderFullOnCoversHead) {
  const fs::path out = root / "fullon.pfm";
  const auto r = run(std::vector<std::string>{"render", "--asset", asset.string(), "--fullon", "--out", out.string()} +
                     small_camera());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto s = r.stats();
  EXPECT_EQ(s["command"], "render");
  EXPECT_EQ(s["light"], "fullon");
  EXPECT_GT(s["drawn"].get<int>(), 0);
  EXPECT_EQ(s["clamp_activations"].get<int>(), 0);
  const auto img = read_pfm(out);
  EXPECT_GT(img.at(24, 24, 0), 0.0f);
  EXPECT_EQ(img.at(0, 0, 0), 0.0f);
}

TEST_F(Cli, RenderZeroEnvIsBackground) {
  const fs::path env = root / "zero.pfm";
  ASSERT_EQ(run({"gen-env", "--preset", "zero", "--height", "8", "--out", env.string()}).code, 0);
  const fs::path out = root / "zero_env.pfm";
  const auto r = run(std::vector<std::string>{"render", "--asset", asset.string(), "--env", env.string(), "--out",
                                              out.string(), "--background", "0.25,0.5,0.75"} +
                     small_camera());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto img = read_pfm(out);
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 48; ++x) EXPECT_LE(img.at(x, y, 2), 0.75f + 1e-6f);
  EXPECT_FLOAT_EQ(img.at(0, 0, 1), 0.5f);
  EXPECT_NEAR(img.at(24, 24, 0), 0.0f, 1e-4f);
}

TEST_F(Cli, RenderIsDeterministicAcrossRunsAndThreads) {
  std::vector<std::vector<std::uint8_t>> outs;
  for (const char* threads : {"1", "1", "4"}) {
    const fs::path out = root / (std::string("det_") + std::to_string(outs.size()) + ".pfm");
    const auto r = run(std::vector<std::string>{"--threads", threads, "render", "--asset", asset.string(),
                                                "--env-preset", "sky", "--out", out.string()} +
                       small_camera());
    ASSERT_EQ(r.code, 0) << r.err;
    outs.push_back(read_file_bytes(out));
  }
  EXPECT_EQ(outs[0], outs[1]);
  EXPECT_EQ(outs[0], outs[2]);
}

TEST_F(Cli, RigWeightsRender) {
  const fs::path rig = root / "rig.json", weights = root / "weights.json", out = root / "rig.png";
  ASSERT_EQ(run({"make-rig", "--count", "4", "--out", rig.string()}).code, 0);
  write_text_file(weights, "[[1,1,1],[0.5,0.5,0.5],[0,0,0],[0.2,0.1,0.0]]");
  const auto r = run(std::vector<std::string>{"render", "--asset", asset.string(), "--rig", rig.string(),
                                              "--weights", weights.string(), "--out", out.string()} +
                     small_camera());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.stats()["light"], "rig");
  EXPECT_TRUE(fs::exists(out));

  write_text_file(weights, "[[1,1,1]]");
  EXPECT_EQ(run(std::vector<std::string>{"render", "--asset", asset.string(), "--rig", rig.string(), "--weights",
                                         weights.string(), "--out", out.string()})
                .code,
            kExitUsage);
}

TEST_F(Cli, OlatWritesFramesAndRig) {
  const fs::path dir = root / "olat";
  const auto r = run(std::vector<std::string>{"olat", "--asset", asset.string(), "--rig-count", "3", "--out-dir",
                                              dir.string()} +
                     small_camera());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "olat_0000.pfm"));
  EXPECT_TRUE(fs::exists(dir / "olat_0002.pfm"));
  EXPECT_EQ(decode_rig(read_text_file(dir / "rig.json")).size(), 3u);
}

TEST_F(Cli, RelightModes) {
  for (const char* mode : {"direct", "ibr-10x20"}) {
    const fs::path out = root / (std::string("relit_") + mode + ".pfm");
    const auto r = run(std::vector<std::string>{"relight", "--asset", asset.string(), "--env-preset", "studio",
                                                "--mode", mode, "--rig-count", "64", "--out", out.string()} +
                       small_camera());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(out));
  }
}

TEST_F(Cli, InvertRoundTrip) {
  const fs::path out = root / "recovered.json";
  const auto r = run(std::vector<std::string>{"invert", "--asset", asset.string(), "--roundtrip", "--rig-count",
                                              "16", "--azimuths", "0,180", "--out", out.string()} +
                     small_camera());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_LT(r.stats()["relative_error"].get<double>(), 1e-4);
  EXPECT_EQ(decode_weights(read_text_file(out)).size(), 16u);
}

TEST_F(Cli, InvertFromObservationFiles) {
  const fs::path rig = root / "inv_rig.json", w = root / "inv_w.json", img = root / "obs.pfm",
                 cam = root / "obs_cam.json";
  ASSERT_EQ(run({"make-rig", "--count", "6", "--out", rig.string()}).code, 0);
  write_text_file(w, "[[0.5,0.4,0.3],[0.1,0.2,0.3],[0.9,0.9,0.9],[0.3,0.3,0.3],[0.6,0.2,0.4],[0.2,0.25,0.3]]");
  write_text_file(cam, R"({"orbit": {"azimuth": 0, "elevation": 0, "distance": 0.5, "target": [0,0,0], "fov_y": 30},
                           "width": 48, "height": 48})");
  ASSERT_EQ(run({"render", "--asset", asset.string(), "--rig", rig.string(), "--weights", w.string(), "--camera",
                 cam.string(), "--out", img.string()})
                .code,
            0);
  const fs::path rec = root / "inv_rec.json";
  const auto r = run({"invert", "--asset", asset.string(), "--rig", rig.string(), "--observation", img.string(),
                      "--observation-camera", cam.string(), "--out", rec.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto got = decode_weights(read_text_file(rec));
  const auto want = decode_weights(read_text_file(w));
  for (std::size_t j = 0; j < want.size(); ++j)
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(got[j][c], want[j][c], 1e-3);
}

TEST_F(Cli, ProjectEnv) {
  const fs::path sh = root / "sh.json", w = root / "env_w.json";
  const auto r = run({"project-env", "--env-preset", "constant", "--sh-order", "2", "--rig-count", "32", "--out",
                      sh.string(), "--weights-out", w.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto c = json::parse(read_text_file(sh));
  ASSERT_EQ(c.size(), 9u);
  EXPECT_NEAR(c[0][0].get<double>(), 2.0 * std::sqrt(kPi), 1e-3);
  EXPECT_EQ(decode_weights(read_text_file(w)).size(), 32u);
}

TEST_F(Cli, ConfigFileWithFlagsWinning) {
  const fs::path cfg = root / "render.toml";
  const fs::path a = root / "cfg_a.pfm", b = root / "cfg_b.pfm";
  write_text_file(cfg, "asset = \"" + asset.string() + "\"\nfullon = true\nwidth = 40\nheight = 24\nout = \"" +
                           a.string() + "\"\n");
  auto r = run({"render", "--config", cfg.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_pfm(a).width, 40);
  r = run({"render", "--config", cfg.string(), "--width", "20", "--out", b.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_pfm(b).width, 20);
  EXPECT_EQ(read_pfm(b).height, 24);
  // Unknown keys are usage errors, not silently ignored.
  write_text_file(cfg, "asset = \"" + asset.string() + "\"\nfullon = true\nwdith = 40\n");
  EXPECT_EQ(run({"render", "--config", cfg.string(), "--out", b.string()}).code, kExitUsage);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run({"render", "--asset", asset.string(), "--out", (root / "x.pfm").string()}).code, kExitUsage);
  EXPECT_EQ(run({"validate", "--asset", (root / "nowhere").string()}).code, kExitAsset);
  EXPECT_EQ(run({"render", "--asset", (root / "nowhere").string(), "--fullon", "--out", (root / "x.pfm").string()})
                .code,
            kExitAsset);
  EXPECT_EQ(run({"--help"}).code, kExitOk);

  // Degenerate normal: assembling the relightable set fails numerically.
  const fs::path bad = root / "bad_normal";
  // A flat square facing +z has n-hat exactly (0, 0, 1), which a float
  // residual can cancel exactly.
  auto a = load_asset(asset);
  a.mesh.vertices = {{-0.1, -0.1, 0.0}, {0.1, -0.1, 0.0}, {0.1, 0.1, 0.0}, {-0.1, 0.1, 0.0}};
  a.mesh.uvs = {{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}};
  a.mesh.faces = {{0, 1, 2}, {0, 2, 3}};
  a.mesh.uv_faces = a.mesh.faces;
  auto& mask = a.planes.plane("mask").data;
  std::fill(mask.begin(), mask.end(), 1.0f);
  const auto t = a.bind().texels[0];
  ASSERT_EQ(t.normal_base, Vec3(0.0, 0.0, 1.0));
  a.planes.plane("normal_residual").data[t.texel * 3 + 2] = -1.0f;
  save_asset(a, bad);
  const auto r = run({"render", "--asset", bad.string(), "--env-preset", "sky", "--out", (root / "x.pfm").string()});
  EXPECT_EQ(r.code, kExitNumeric) << r.err;
  EXPECT_EQ(run({"validate", "--asset", bad.string()}).code, kExitAsset);
}
