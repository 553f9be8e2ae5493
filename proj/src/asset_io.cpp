#include "relight/asset_io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace relight {

namespace fs = std::filesystem;
using nlohmann::json;

MeshBinding AvatarAsset::bind() const { return bind_texels(mesh, meta.resolution); }

RelightableGaussianSet AvatarAsset::relightable() const {
  return assemble_relightable(planes, bind(), AssembleOptions{meta.clamp_roughness});
}

FullOnGaussianSet AvatarAsset::fullon() const { return assemble_fullon(planes, bind()); }

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << text;
  if (!out) throw InvalidInput("failed writing " + path.string());
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Parses "12" or "12/5" or "12/5/7" into (vertex, uv) 1-based indices.
std::pair<int, int> parse_face_corner(const std::string& token, int line_no) {
  const auto slash = token.find('/');
  if (slash == std::string::npos) {
    throw InvalidAsset("line " + std::to_string(line_no) + ": face corner '" + token + "' has no vt index", "mesh");
  }
  try {
    const int v = std::stoi(token.substr(0, slash));
    const auto rest = token.substr(slash + 1);
    const int vt = std::stoi(rest.substr(0, rest.find('/')));
    return {v, vt};
  } catch (const std::exception&) {
    throw InvalidAsset("line " + std::to_string(line_no) + ": malformed face corner '" + token + "'", "mesh");
  }
}

}  // namespace

std::string encode_obj(const CoarseMesh& mesh) {
  std::string out;
  for (const auto& v : mesh.vertices) out += "v " + fmt(v.x()) + " " + fmt(v.y()) + " " + fmt(v.z()) + "\n";
  for (const auto& t : mesh.uvs) out += "vt " + fmt(t.x()) + " " + fmt(t.y()) + "\n";
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    out += "f";
    for (int c = 0; c < 3; ++c) {
      out += " " + std::to_string(mesh.faces[f][c] + 1) + "/" + std::to_string(mesh.uv_faces[f][c] + 1);
    }
    out += "\n";
  }
  return out;
}

CoarseMesh decode_obj(const std::string& text) {
  CoarseMesh mesh;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) throw InvalidAsset("line " + std::to_string(line_no) + ": malformed vertex", "mesh");
      mesh.vertices.emplace_back(x, y, z);
    } else if (tag == "vt") {
      double u, v;
      if (!(ls >> u >> v)) throw InvalidAsset("line " + std::to_string(line_no) + ": malformed uv", "mesh");
      mesh.uvs.emplace_back(u, v);
    } else if (tag == "f") {
      std::vector<std::pair<int, int>> corners;
      std::string tok;
      while (ls >> tok) corners.push_back(parse_face_corner(tok, line_no));
      if (corners.size() < 3) throw InvalidAsset("line " + std::to_string(line_no) + ": face needs 3 corners", "mesh");
      // Polygons are fanned into triangles.
      for (std::size_t i = 1; i + 1 < corners.size(); ++i) {
        const std::pair<int, int> tri[3] = {corners[0], corners[i], corners[i + 1]};
        std::array<int, 3> f{}, t{};
        for (int c = 0; c < 3; ++c) {
          f[c] = tri[c].first > 0 ? tri[c].first - 1 : static_cast<int>(mesh.vertices.size()) + tri[c].first;
          t[c] = tri[c].second > 0 ? tri[c].second - 1 : static_cast<int>(mesh.uvs.size()) + tri[c].second;
          if (f[c] < 0 || f[c] >= static_cast<int>(mesh.vertices.size()) || t[c] < 0 ||
              t[c] >= static_cast<int>(mesh.uvs.size())) {
            throw InvalidAsset("line " + std::to_string(line_no) + ": face references an undefined vertex or uv",
                               "mesh");
          }
        }
        mesh.faces.push_back(f);
        mesh.uv_faces.push_back(t);
      }
    }
    // vn and other records are accepted and ignored; normals are recomputed.
  }
  return mesh;
}

std::vector<std::uint8_t> encode_plane(const Plane& plane) {
  std::vector<std::uint8_t> bytes(plane.data.size() * 4);
  for (std::size_t i = 0; i < plane.data.size(); ++i) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(plane.data[i]);
    for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<std::uint8_t>(bits >> (8 * b));
  }
  return bytes;
}

std::vector<float> decode_plane(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() % 4 != 0) throw InvalidAsset("plane file size is not a multiple of 4 bytes");
  std::vector<float> data(bytes.size() / 4);
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[4 * i + b]) << (8 * b);
    data[i] = std::bit_cast<float>(bits);
  }
  return data;
}

std::string encode_meta(const AvatarMeta& meta) {
  json j;
  j["format"] = "relight-avatar";
  j["version"] = 1;
  j["resolution"] = meta.resolution;
  j["sh_order"] = meta.sh_order.n();
  j["mesh"] = meta.mesh_file;
  j["rig_id"] = meta.rig_id;
  j["clamp_roughness"] = meta.clamp_roughness;
  j["preset"] = meta.preset;
  j["seed"] = meta.seed;
  json channels = json::array();
  for (const auto& c : meta.channels) {
    channels.push_back({{"name", c.name}, {"components", c.components}, {"file", c.name + ".f32"}});
  }
  j["channels"] = channels;
  return j.dump(2) + "\n";
}

AvatarMeta decode_meta(const std::string& text) {
  AvatarMeta meta;
  try {
    const json j = json::parse(text);
    meta.resolution = j.at("resolution").get<int>();
    meta.sh_order = ShOrder(j.at("sh_order").get<int>());
    meta.mesh_file = j.value("mesh", std::string("mesh.obj"));
    meta.rig_id = j.value("rig_id", std::string());
    meta.clamp_roughness = j.value("clamp_roughness", true);
    meta.preset = j.value("preset", std::string());
    meta.seed = j.value("seed", std::uint64_t{0});
    for (const auto& c : j.at("channels")) {
      meta.channels.push_back({c.at("name").get<std::string>(), c.at("components").get<int>()});
    }
  } catch (const json::exception& e) {
    throw InvalidAsset(std::string("malformed meta.json: ") + e.what(), "meta.json");
  } catch (const InvalidInput& e) {
    throw InvalidAsset(e.what(), "meta.json");
  }
  if (meta.resolution <= 0) throw InvalidAsset("resolution must be positive", "meta.json");
  return meta;
}

void save_asset(const AvatarAsset& asset, const fs::path& dir) {
  fs::create_directories(dir);
  AvatarMeta meta = asset.meta;
  meta.channels.clear();
  for (const auto& [name, plane] : asset.planes.planes()) meta.channels.push_back({name, plane.components});
  write_text_file(dir / "meta.json", encode_meta(meta));
  write_text_file(dir / meta.mesh_file, encode_obj(asset.mesh));
  for (const auto& [name, plane] : asset.planes.planes()) {
    write_file_bytes(dir / (name + ".f32"), encode_plane(plane));
  }
}

AvatarAsset load_asset(const fs::path& dir) {
  AvatarAsset asset;
  if (!fs::exists(dir / "meta.json")) throw InvalidAsset("missing " + (dir / "meta.json").string(), "meta.json");
  asset.meta = decode_meta(read_text_file(dir / "meta.json"));
  const fs::path mesh_path = dir / asset.meta.mesh_file;
  if (!fs::exists(mesh_path)) throw InvalidAsset("missing mesh file " + mesh_path.string(), "mesh");
  asset.mesh = decode_obj(read_text_file(mesh_path));
  asset.planes = ParamPlanes(asset.meta.resolution, asset.meta.sh_order);
  for (const auto& c : asset.meta.channels) {
    const fs::path p = dir / (c.name + ".f32");
    if (!fs::exists(p)) throw InvalidAsset("missing plane file " + p.string(), c.name);
    asset.planes.set(c.name, c.components, decode_plane(read_file_bytes(p)));
  }
  return asset;
}

namespace {

InvariantViolation violation(std::string invariant, std::string message) {
  return {std::move(invariant), std::move(message)};
}

}  // namespace

std::optional<InvariantViolation> validate_asset(const AvatarAsset& asset) {
  const AvatarMeta& meta = asset.meta;
  const int res = meta.resolution;
  if (res <= 0) return violation("AvatarAsset.resolution", "resolution must be positive");
  if (asset.planes.resolution() != res) {
    return violation("ParamPlanes.resolution", "planes do not share the asset resolution");
  }

  // Channel manifest: every relightable channel with its exact width.
  for (const auto& spec : relightable_channels(meta.sh_order)) {
    if (!asset.planes.has(spec.name)) {
      return violation("AvatarAsset.channels", "missing channel '" + spec.name + "'");
    }
    const Plane& p = asset.planes.plane(spec.name);
    if (p.components != spec.components) {
      const std::string inv = spec.name == channel::kShTransfer ? "SHCoefficients.length" : "AvatarAsset.channels";
      return violation(inv, "channel '" + spec.name + "' has " + std::to_string(p.components) +
                                " components, expected " + std::to_string(spec.components));
    }
  }
  for (const auto& [name, p] : asset.planes.planes()) {
    if (p.data.size() != asset.planes.texel_count() * static_cast<std::size_t>(p.components)) {
      return violation("ParamPlanes.resolution", "channel '" + name + "' size does not match R^2");
    }
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      if (!std::isfinite(p.data[i])) {
        return violation("ParamPlanes.finite", "channel '" + name + "' value " + std::to_string(i) + " is not finite");
      }
    }
  }

  // Mesh.
  const CoarseMesh& mesh = asset.mesh;
  if (mesh.faces.empty()) return violation("CoarseMesh.faces", "mesh has no faces");
  if (mesh.faces.size() != mesh.uv_faces.size()) {
    return violation("CoarseMesh.indices", "face and uv-face counts differ");
  }
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    for (int c = 0; c < 3; ++c) {
      if (mesh.faces[f][c] < 0 || mesh.faces[f][c] >= static_cast<int>(mesh.vertices.size()) ||
          mesh.uv_faces[f][c] < 0 || mesh.uv_faces[f][c] >= static_cast<int>(mesh.uvs.size())) {
        return violation("CoarseMesh.indices", "face " + std::to_string(f) + " has an index out of range");
      }
    }
  }
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    if (!mesh.vertices[i].allFinite()) {
      return violation("CoarseMesh.finite", "vertex " + std::to_string(i) + " is not finite");
    }
  }
  for (std::size_t i = 0; i < mesh.uvs.size(); ++i) {
    const Vec2& t = mesh.uvs[i];
    if (!(t.x() >= 0.0 && t.x() <= 1.0 && t.y() >= 0.0 && t.y() <= 1.0)) {
      return violation("CoarseMesh.uv_range", "uv " + std::to_string(i) + " outside [0,1]^2");
    }
  }

  MeshBinding binding;
  try {
    binding = asset.bind();
  } catch (const OverlappingUvError& e) {
    return violation("MeshBinding.overlap", e.what());
  } catch (const Error& e) {
    return violation("MeshBinding.normal", e.what());
  }

  if (asset.planes.has(channel::kMask)) {
    const Plane& mask = asset.planes.plane(channel::kMask);
    if (mask.components != 1) return violation("ParamPlanes.mask", "mask must have one component");
    for (std::size_t t = 0; t < asset.planes.texel_count(); ++t) {
      if (mask.data[t] != 0.0f && mask.data[t] != 1.0f) {
        return violation("ParamPlanes.mask", "mask value at texel " + std::to_string(t) + " is not 0 or 1");
      }
      if (mask.data[t] != 0.0f && binding.texel_to_gaussian[t] < 0) {
        return violation("ParamPlanes.mask", "mask marks uncovered texel " + std::to_string(t));
      }
    }
  }

  const Plane* mask = asset.planes.has(channel::kMask) ? &asset.planes.plane(channel::kMask) : nullptr;
  for (const auto& b : binding.texels) {
    const int t = b.texel;
    // Masked-out texels are dropped at assembly; their parameters are unused.
    if (mask && mask->data[static_cast<std::size_t>(t)] == 0.0f) continue;
    const std::string where = "texel " + std::to_string(t);
    auto q = asset.planes.texel(channel::kRotation, t);
    const double qn = std::sqrt(double(q[0]) * q[0] + double(q[1]) * q[1] + double(q[2]) * q[2] + double(q[3]) * q[3]);
    if (!(qn > 0.0)) return violation("Gaussian.rotation", where + ": quaternion cannot be normalized");
    auto s = asset.planes.texel(channel::kScale, t);
    for (int c = 0; c < 3; ++c) {
      if (!(softplus(s[c]) > 0.0)) return violation("Gaussian.scale", where + ": activated scale is not positive");
    }
    const double o = sigmoid(asset.planes.texel(channel::kOpacity, t)[0]);
    if (!(o > 0.0 && o < 1.0)) return violation("Gaussian.opacity", where + ": opacity outside (0,1)");
    const double v = sigmoid(asset.planes.texel(channel::kVisibility, t)[0]);
    if (!(v > 0.0 && v < 1.0)) return violation("Gaussian.visibility", where + ": visibility outside (0,1)");
    const double sigma = std::exp(static_cast<double>(asset.planes.texel(channel::kRoughness, t)[0]));
    if (!meta.clamp_roughness && !(sigma > 0.0 && sigma < 1.0)) {
      return violation("SpecularLobe.roughness",
                       where + ": roughness " + std::to_string(sigma) + " outside (0,1) with clamping disabled");
    }
    auto dn = asset.planes.texel(channel::kNormalResidual, t);
    const Vec3 n = b.normal_base + Vec3(dn[0], dn[1], dn[2]);
    if (!(n.norm() >= 1e-8)) return violation("Gaussian.normal", where + ": ||n-hat + dn|| < 1e-8");
  }
  return std::nullopt;
}

std::optional<InvariantViolation> validate_asset_dir(const fs::path& dir) {
  AvatarAsset asset;
  try {
    asset = load_asset(dir);
  } catch (const InvalidAsset& e) {
    return violation("AvatarAsset.container", e.what());
  } catch (const Error& e) {
    return violation("AvatarAsset.container", e.what());
  }
  return validate_asset(asset);
}

std::string encode_rig(const LightRig& rig) {
  json dirs = json::array();
  for (const auto& d : rig.directions) dirs.push_back({d.x(), d.y(), d.z()});
  return json{{"rig_id", rig.id}, {"directions", dirs}}.dump() + "\n";
}

LightRig decode_rig(const std::string& text) {
  LightRig rig;
  try {
    const json j = json::parse(text);
    rig.id = j.at("rig_id").get<std::string>();
    for (const auto& d : j.at("directions")) {
      if (d.size() != 3) throw InvalidInput("rig direction must have three components");
      rig.directions.emplace_back(d[0].get<double>(), d[1].get<double>(), d[2].get<double>());
    }
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed rig file: ") + e.what());
  }
  rig.validate();
  return rig;
}

std::string encode_weights(const std::vector<Rgb>& weights) {
  json j = json::array();
  for (const auto& w : weights) j.push_back({w[0], w[1], w[2]});
  return j.dump() + "\n";
}

std::vector<Rgb> decode_weights(const std::string& text) {
  std::vector<Rgb> out;
  try {
    const json j = json::parse(text);
    for (const auto& w : j) {
      if (w.size() != 3) throw InvalidInput("weight entries must be RGB triplets");
      out.emplace_back(w[0].get<double>(), w[1].get<double>(), w[2].get<double>());
    }
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed weights file: ") + e.what());
  }
  return out;
}

std::string encode_camera(const Camera& camera) {
  json rot = json::array();
  for (int r = 0; r < 3; ++r) rot.push_back({camera.rotation(r, 0), camera.rotation(r, 1), camera.rotation(r, 2)});
  json j{{"fx", camera.fx},
         {"fy", camera.fy},
         {"cx", camera.cx},
         {"cy", camera.cy},
         {"rotation", rot},
         {"translation", {camera.translation.x(), camera.translation.y(), camera.translation.z()}},
         {"width", camera.width},
         {"height", camera.height}};
  return j.dump() + "\n";
}

Camera decode_camera(const std::string& text) {
  try {
    const json j = json::parse(text);
    const int width = j.at("width").get<int>();
    const int height = j.at("height").get<int>();
    if (j.contains("orbit")) {
      const json& o = j["orbit"];
      Vec3 target = Vec3::Zero();
      if (o.contains("target")) target = Vec3(o["target"][0].get<double>(), o["target"][1].get<double>(),
                                              o["target"][2].get<double>());
      return Camera::orbit(o.value("azimuth", 0.0), o.value("elevation", 0.0), o.at("distance").get<double>(),
                           target, o.value("fov_y", 30.0), width, height);
    }
    Camera cam;
    cam.fx = j.at("fx").get<double>();
    cam.fy = j.at("fy").get<double>();
    cam.cx = j.at("cx").get<double>();
    cam.cy = j.at("cy").get<double>();
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) cam.rotation(r, c) = j.at("rotation").at(r).at(c).get<double>();
    }
    for (int c = 0; c < 3; ++c) cam.translation[c] = j.at("translation").at(c).get<double>();
    cam.width = width;
    cam.height = height;
    cam.validate();
    return cam;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed camera file: ") + e.what());
  }
}

}  // namespace relight
