#include "relight/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iomanip>
#include <ostream>

#include "relight/asset_io.hpp"
#include "relight/demo.hpp"
#include "relight/parallel.hpp"
#include "relight/relight_solver.hpp"

namespace relight {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CameraArgs {
  std::string file;
  double azimuth = 0.0;
  double elevation = 0.0;
  double distance = 0.5;
  double fov = 30.0;
  int width = 256;
  int height = 256;

  void add(CLI::App* app) {
    app->add_option("--camera", file, "Camera JSON (overrides the orbit flags)")->check(CLI::ExistingFile);
    app->add_option("--azimuth", azimuth, "Orbit azimuth in degrees (0 looks from +x)")->capture_default_str();
    app->add_option("--elevation", elevation, "Orbit elevation in degrees")->capture_default_str();
    app->add_option("--distance", distance, "Orbit distance")->capture_default_str();
    app->add_option("--fov", fov, "Vertical field of view in degrees")->capture_default_str();
    app->add_option("--width", width, "Image width")->capture_default_str();
    app->add_option("--height", height, "Image height")->capture_default_str();
  }

  Camera camera() const {
    if (!file.empty()) return decode_camera(read_text_file(file));
    return Camera::orbit(azimuth, elevation, distance, Vec3::Zero(), fov, width, height);
  }
};

struct EnvArgs {
  std::string file;
  std::string preset;
  int height = 32;

  void add(CLI::App* app) {
    auto* f = app->add_option("--env", file, "Equirectangular PFM environment map")->check(CLI::ExistingFile);
    auto* p = app->add_option("--env-preset", preset, "Procedural map: sky, studio, constant or zero");
    app->add_option("--env-height", height, "Rows of the procedural map")->capture_default_str();
    f->excludes(p);
  }

  bool given() const { return !file.empty() || !preset.empty(); }

  EnvironmentMap load() const {
    if (!file.empty()) return EnvironmentMap::from_image(read_pfm(file));
    if (!preset.empty()) return make_procedural_env(parse_env_preset(preset), height);
    throw InvalidInput("no environment given: pass --env or --env-preset");
  }
};

struct RigArgs {
  std::string file;
  std::size_t count = 0;

  void add(CLI::App* app, std::size_t default_count) {
    count = default_count;
    auto* f = app->add_option("--rig", file, "Rig JSON")->check(CLI::ExistingFile);
    auto* c = app->add_option("--rig-count", count, "Fibonacci rig size when no rig file is given");
    c->capture_default_str();
    f->excludes(c);
  }

  LightRig load() const {
    if (!file.empty()) return decode_rig(read_text_file(file));
    return fibonacci_rig(count);
  }
};

Rgb to_rgb(const std::vector<double>& v) {
  if (v.size() != 3) throw InvalidInput("colors take three comma-separated values");
  return Rgb(v[0], v[1], v[2]);
}

void write_image(const fs::path& path, const RenderTarget& target) {
  const std::string ext = path.extension().string();
  if (ext == ".png") {
    write_png_srgb(path, target.to_image());
  } else if (ext == ".pfm") {
    write_pfm(path, target.to_image());
  } else {
    throw InvalidInput("output image must end in .pfm or .png: " + path.string());
  }
}

json stats_json(const RenderStats& s) {
  return {{"gaussians", s.gaussians},
          {"drawn", s.drawn},
          {"culled", s.culled},
          {"skipped_nonfinite", s.skipped_nonfinite},
          {"contributions", s.contributions},
          {"clamp_activations", s.clamp_activations},
          {"roughness_clamped", s.roughness_clamped}};
}

std::vector<Rgb> load_weights_for(const std::string& path, const LightRig& rig) {
  std::vector<Rgb> w = decode_weights(read_text_file(path));
  if (w.size() != rig.size()) {
    throw InvalidInput("weights file has " + std::to_string(w.size()) + " entries for a " +
                       std::to_string(rig.size()) + "-light rig");
  }
  return w;
}

// Reads TOML-style key=value files; bare keys that are not global options
// belong to the chosen command, so "asset = ..." works without a [render]
// section.
class CommandConfig : public CLI::ConfigTOML {
 public:
  explicit CommandConfig(const CLI::App* app) : app_(app) {}

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    std::vector<CLI::ConfigItem> items = CLI::ConfigTOML::from_config(input);
    const auto chosen = app_->get_subcommands();
    if (chosen.empty()) return items;
    for (auto& item : items) {
      if (item.parents.empty() && item.name != "++" && item.name != "--" &&
          app_->get_option_no_throw("--" + item.name) == nullptr) {
        item.parents = {chosen.front()->get_name()};
      }
    }
    return items;
  }

 private:
  const CLI::App* app_;
};

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Relightable Gaussian avatar toolkit"};
  app.set_config("--config", "", "key=value configuration file; command-line flags win");
  app.config_formatter(std::make_shared<CommandConfig>(&app));
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);
  app.fallthrough();
  std::size_t threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = hardware concurrency)");
  std::vector<double> background{0.0, 0.0, 0.0};
  app.add_option("--background", background, "Background RGB, e.g. 0,0,0")->delimiter(',')->expected(3);

  std::function<void()> action;

  // gen-demo
  DemoOptions demo;
  std::string demo_out, demo_preset = "sphere-head";
  int demo_order = kDefaultShOrder;
  auto* gen = app.add_subcommand("gen-demo", "Write a deterministic procedural avatar asset");
  gen->add_option("--out", demo_out, "Output asset directory")->required();
  gen->add_option("--seed", demo.seed, "Random seed")->capture_default_str();
  gen->add_option("--preset", demo_preset, "sphere-head or ellipsoid-two-tone")->capture_default_str();
  gen->add_option("--resolution", demo.resolution, "UV resolution R")->capture_default_str();
  gen->add_option("--sh-order", demo_order, "SH order (0-4)")->capture_default_str();
  gen->add_option("--rings", demo.rings, "Mesh rings")->capture_default_str();
  gen->add_option("--segments", demo.segments, "Mesh segments")->capture_default_str();
  gen->callback([&] {
    action = [&] {
      demo.preset = parse_demo_preset(demo_preset);
      demo.sh_order = ShOrder(demo_order);
      const AvatarAsset asset = gen_demo_avatar(demo);
      save_asset(asset, demo_out);
      out << json{{"command", "gen-demo"},
                  {"preset", demo_preset},
                  {"seed", demo.seed},
                  {"resolution", demo.resolution},
                  {"gaussians", asset.bind().covered()},
                  {"out", demo_out}}
                 .dump()
          << "\n";
    };
  });

  // render
  std::string asset_dir, out_path, rig_weights;
  CameraArgs cam_args;
  EnvArgs env_args;
  RigArgs rig_args;
  bool fullon = false;
  std::vector<std::string> extra_out;
  auto* rend = app.add_subcommand("render", "Render an asset under an environment, a weighted rig, or full-on");
  rend->add_option("--asset", asset_dir, "Asset directory")->required();
  rend->add_option("--out", out_path, "Output image (.pfm or .png)")->required();
  rend->add_option("--also", extra_out, "Additional output images");
  env_args.add(rend);
  rig_args.add(rend, 32);
  rend->add_option("--weights", rig_weights, "Per-light RGB weights JSON for --rig")->check(CLI::ExistingFile);
  rend->add_flag("--fullon", fullon, "Render the full-on colors");
  cam_args.add(rend);
  rend->callback([&] {
    action = [&] {
      const int modes = int(env_args.given()) + int(!rig_weights.empty()) + int(fullon);
      if (modes != 1) throw InvalidInput("render needs exactly one of --env/--env-preset, --rig --weights, --fullon");
      const AvatarAsset asset = load_asset(asset_dir);
      const Camera cam = cam_args.camera();
      const Rgb bg = to_rgb(background);
      RenderStats stats;
      RenderTarget image;
      std::string light;
      if (fullon) {
        light = "fullon";
        const FullOnGaussianSet set = asset.fullon();
        image = render(set.geometry, set.colors, cam, {bg, threads}, &stats);
      } else {
        const RelightableGaussianSet set = asset.relightable();
        LightCondition condition;
        if (env_args.given()) {
          light = "env";
          condition = prepare_environment(env_args.load(), set.sh_order, default_prefilter_ladder(), {64, threads});
        } else {
          light = "rig";
          const LightRig rig = rig_args.load();
          condition = prepare_point_lights(PointLightSet::from_rig(rig, load_weights_for(rig_weights, rig)),
                                           set.sh_order);
        }
        ShadeStats shade_stats;
        const auto colors = shade_all(set, condition, cam.center(), &shade_stats, threads);
        image = render(set.geometry, colors, cam, {bg, threads}, &stats);
        stats.clamp_activations = shade_stats.clamp_activations;
        stats.roughness_clamped = shade_stats.roughness_clamped;
      }
      write_image(out_path, image);
      for (const auto& p : extra_out) write_image(p, image);
      json j = stats_json(stats);
      j["command"] = "render";
      j["light"] = light;
      j["width"] = image.width;
      j["height"] = image.height;
      j["out"] = out_path;
      out << j.dump() << "\n";
    };
  });

  // olat
  std::string olat_dir;
  CameraArgs olat_cam;
  RigArgs olat_rig;
  std::string olat_asset;
  auto* olat = app.add_subcommand("olat", "Render one frame per rig light (unit white intensity)");
  olat->add_option("--asset", olat_asset, "Asset directory")->required();
  olat->add_option("--out-dir", olat_dir, "Directory for olat_NNNN.pfm frames")->required();
  olat_rig.add(olat, 32);
  olat_cam.add(olat);
  olat->callback([&] {
    action = [&] {
      const AvatarAsset asset = load_asset(olat_asset);
      const RelightableGaussianSet set = asset.relightable();
      const LightRig rig = olat_rig.load();
      const Camera cam = olat_cam.camera();
      const OlatRenderer renderer(set, cam, threads);
      fs::create_directories(olat_dir);
      for (std::size_t j = 0; j < rig.size(); ++j) {
        std::ostringstream name;
        name << "olat_" << std::setw(4) << std::setfill('0') << j << ".pfm";
        write_pfm(fs::path(olat_dir) / name.str(), renderer.frame(rig.directions[j], to_rgb(background)).to_image());
      }
      write_text_file(fs::path(olat_dir) / "rig.json", encode_rig(rig));
      json j = stats_json(renderer.plan().stats());
      j["command"] = "olat";
      j["rig_id"] = rig.id;
      j["frames"] = rig.size();
      j["out_dir"] = olat_dir;
      out << j.dump() << "\n";
    };
  });

  // relight
  std::string relight_asset, relight_out, relight_mode = "direct";
  CameraArgs relight_cam;
  EnvArgs relight_env;
  RigArgs relight_rig;
  auto* rel = app.add_subcommand("relight", "Relight under an environment map, directly or by OLAT superposition");
  rel->add_option("--asset", relight_asset, "Asset directory")->required();
  rel->add_option("--out", relight_out, "Output image (.pfm or .png)")->required();
  rel->add_option("--mode", relight_mode, "direct or ibr-10x20")->capture_default_str();
  relight_env.add(rel);
  relight_rig.add(rel, 331);
  relight_cam.add(rel);
  rel->callback([&] {
    action = [&] {
      const AvatarAsset asset = load_asset(relight_asset);
      const RelightableGaussianSet set = asset.relightable();
      RelightOptions options;
      options.rig = relight_rig.load();
      options.background = to_rgb(background);
      options.threads = threads;
      RenderStats stats;
      const RenderTarget image = relight_under_env(set, relight_env.load(), relight_cam.camera(),
                                                   parse_relight_mode(relight_mode), options, &stats);
      write_image(relight_out, image);
      json j = stats_json(stats);
      j["command"] = "relight";
      j["mode"] = relight_mode;
      j["out"] = relight_out;
      out << j.dump() << "\n";
    };
  });

  // invert
  std::string inv_asset, inv_out;
  RigArgs inv_rig;
  std::vector<std::string> inv_images, inv_cameras;
  bool roundtrip = false;
  std::vector<double> inv_azimuths{0.0, 180.0};
  double inv_noise = 0.0;
  std::uint64_t inv_seed = 1;
  CameraArgs inv_cam;
  auto* inv = app.add_subcommand("invert", "Recover non-negative point-light intensities from observations");
  inv->add_option("--asset", inv_asset, "Asset directory")->required();
  inv_rig.add(inv, 32);
  inv->add_option("--observation", inv_images, "Observed PFM image (repeatable)");
  inv->add_option("--observation-camera", inv_cameras, "Camera JSON for each observation, in order");
  inv->add_flag("--roundtrip", roundtrip, "Synthesize observations under random intensities and report the error");
  inv->add_option("--azimuths", inv_azimuths, "Round-trip view azimuths")->delimiter(',');
  inv->add_option("--noise", inv_noise, "Round-trip pixel noise sigma")->capture_default_str();
  inv->add_option("--seed", inv_seed, "Round-trip seed")->capture_default_str();
  inv->add_option("--out", inv_out, "Write recovered intensities as weights JSON");
  inv_cam.add(inv);
  inv->callback([&] {
    action = [&] {
      const AvatarAsset asset = load_asset(inv_asset);
      const RelightableGaussianSet set = asset.relightable();
      const LightRig rig = inv_rig.load();
      const Rgb bg = to_rgb(background);
      std::vector<Observation> observations;
      std::vector<Rgb> truth;
      if (roundtrip) {
        if (!inv_images.empty()) throw InvalidInput("--roundtrip synthesizes its own observations");
        truth = random_intensities(rig.size(), inv_seed);
        const PointLightSet lights = PointLightSet::from_rig(rig, truth);
        for (std::size_t v = 0; v < inv_azimuths.size(); ++v) {
          const Camera cam = Camera::orbit(inv_azimuths[v], inv_cam.elevation, inv_cam.distance, Vec3::Zero(),
                                           inv_cam.fov, inv_cam.width, inv_cam.height);
          observations.push_back({synthesize_observation(set, lights, cam, bg, inv_noise, inv_seed * 1000 + v,
                                                         threads), cam});
        }
      } else {
        if (inv_images.empty()) throw InvalidInput("invert needs --observation images or --roundtrip");
        if (inv_cameras.size() != inv_images.size()) {
          throw InvalidInput("pass one --observation-camera per --observation");
        }
        for (std::size_t v = 0; v < inv_images.size(); ++v) {
          observations.push_back({RenderTarget::from_image(read_pfm(inv_images[v])),
                                  decode_camera(read_text_file(inv_cameras[v]))});
        }
      }
      InversionOptions options;
      options.background = bg;
      options.threads = threads;
      const InversionResult result = invert_lighting(observations, set, rig, options);
      for (const auto& w : result.warnings) err << "warning: " << w << "\n";
      if (!inv_out.empty()) write_text_file(inv_out, encode_weights(result.lights.intensities));
      json j{{"command", "invert"},
             {"rig_id", rig.id},
             {"lights", rig.size()},
             {"views", observations.size()},
             {"degenerate", result.degenerate},
             {"null_space_dim", result.null_space_dim},
             {"iterations", result.iterations},
             {"objective", result.objective}};
      if (roundtrip) j["relative_error"] = relative_intensity_error(result.lights.intensities, truth);
      out << std::setprecision(17) << j.dump() << "\n";
    };
  });

  // project-env
  EnvArgs proj_env;
  int proj_order = kDefaultShOrder;
  std::string proj_out, proj_weights;
  RigArgs proj_rig;
  auto* proj = app.add_subcommand("project-env", "Project an environment onto SH and optionally onto rig lights");
  proj_env.add(proj);
  proj->add_option("--sh-order", proj_order, "SH order (0-4)")->capture_default_str();
  proj->add_option("--out", proj_out, "SH coefficients JSON ([[r,g,b], ...])")->required();
  proj->add_option("--weights-out", proj_weights, "Nearest-light weights JSON for the rig");
  proj_rig.add(proj, 331);
  proj->callback([&] {
    action = [&] {
      const EnvironmentMap env = proj_env.load();
      const ShCoefficients sh = env_to_sh(env, ShOrder(proj_order));
      write_text_file(proj_out, encode_weights(std::vector<Rgb>(sh.coeffs().begin(), sh.coeffs().end())));
      json j{{"command", "project-env"}, {"sh_order", proj_order}, {"width", env.width()}, {"height", env.height()}};
      const Rgb e = env.integrated_energy();
      j["energy"] = {e[0], e[1], e[2]};
      if (!proj_weights.empty()) {
        const LightRig rig = proj_rig.load();
        const PointLightSet lights = env_to_point_lights(env, rig);
        write_text_file(proj_weights, encode_weights(lights.intensities));
        j["rig_id"] = rig.id;
      }
      out << j.dump() << "\n";
    };
  });

  // validate
  std::string val_asset;
  auto* val = app.add_subcommand("validate", "Check every asset invariant; exit 2 naming the first violation");
  val->add_option("--asset", val_asset, "Asset directory")->required();
  int validate_code = kExitOk;
  val->callback([&] {
    action = [&] {
      const auto v = validate_asset_dir(val_asset);
      if (v) {
        err << "invalid asset: " << v->invariant << ": " << v->message << "\n";
        out << json{{"command", "validate"}, {"valid", false}, {"invariant", v->invariant}, {"message", v->message}}
                   .dump()
            << "\n";
        validate_code = kExitAsset;
        return;
      }
      out << json{{"command", "validate"}, {"valid", true}}.dump() << "\n";
    };
  });

  // make-rig
  std::size_t rig_count = 32;
  std::string rig_out;
  auto* mk = app.add_subcommand("make-rig", "Write a Fibonacci-sphere light rig");
  mk->add_option("--count", rig_count, "Number of lights")->capture_default_str();
  mk->add_option("--out", rig_out, "Rig JSON")->required();
  mk->callback([&] {
    action = [&] {
      const LightRig rig = fibonacci_rig(rig_count);
      write_text_file(rig_out, encode_rig(rig));
      out << json{{"command", "make-rig"}, {"rig_id", rig.id}, {"lights", rig.size()}}.dump() << "\n";
    };
  });

  // gen-env
  std::string env_preset = "sky", env_out;
  int env_height = 32;
  auto* genv = app.add_subcommand("gen-env", "Write a procedural equirectangular PFM");
  genv->add_option("--preset", env_preset, "sky, studio, constant or zero")->capture_default_str();
  genv->add_option("--height", env_height, "Rows (width is twice this)")->capture_default_str();
  genv->add_option("--out", env_out, "Output PFM")->required();
  genv->callback([&] {
    action = [&] {
      const EnvironmentMap env = make_procedural_env(parse_env_preset(env_preset), env_height);
      write_pfm(env_out, env.to_image());
      out << json{{"command", "gen-env"}, {"preset", env_preset}, {"width", env.width()}, {"height", env.height()}}
                 .dump()
          << "\n";
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (threads > 0) set_default_thread_count(threads);
    if (action) action();
    return validate_code;
  } catch (const InvalidAsset& e) {
    err << "asset error: " << e.what() << "\n";
    return kExitAsset;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace relight
