#include "splatcull/scene.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <unordered_map>

namespace splatcull {
namespace {

using nlohmann::json;

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

template <int N>
Eigen::Matrix<double, N, 1> vec(const json& j, const char* key) {
  if (!j.contains(key)) throw std::runtime_error(std::string("missing key '") + key + "'");
  const json& a = j.at(key);
  if (!a.is_array() || a.size() != N) {
    throw std::runtime_error(std::string("'") + key + "' must be an array of " + std::to_string(N) + " numbers");
  }
  Eigen::Matrix<double, N, 1> out;
  for (int i = 0; i < N; ++i) out[i] = a.at(static_cast<std::size_t>(i)).get<double>();
  return out;
}

Camera parse_camera(const json& j) {
  const double fov = j.value("fov_deg", 60.0) * std::numbers::pi / 180.0;
  const int width = j.value("width", 256);
  const int height = j.value("height", width);
  const double near_clip = j.value("near", 0.01);
  const double far_clip = j.value("far", 1000.0);
  const Eigen::Vector3d position = vec<3>(j, "position");
  Camera cam;
  if (j.contains("rotation")) {
    const json& rows = j.at("rotation");
    if (!rows.is_array() || rows.size() != 3) throw std::runtime_error("'rotation' must hold 3 rows");
    cam.position = position;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) cam.rotation(r, c) = rows.at(r).at(c).get<double>();
    cam.fov_y = fov;
    cam.width = width;
    cam.height = height;
    cam.near_clip = near_clip;
    cam.far_clip = far_clip;
  } else {
    const Eigen::Vector3d up = j.contains("up") ? vec<3>(j, "up") : Eigen::Vector3d::UnitZ();
    cam = Camera::look_at(position, vec<3>(j, "target"), up, fov, width, height, near_clip, far_clip);
  }
  if (!cam.is_valid()) throw std::runtime_error("camera is invalid (check rotation, fov and size)");
  return cam;
}

}  // namespace

Camera load_camera(const std::filesystem::path& path) {
  const json j = read_json(path);
  try {
    return parse_camera(j.contains("camera") ? j.at("camera") : j);
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

SceneFile load_scene(const std::filesystem::path& path) {
  const json j = read_json(path);
  const std::filesystem::path base = path.parent_path();
  SceneFile out;
  try {
    std::unordered_map<std::string, std::size_t> index;
    for (const json& a : j.at("assets")) {
      SceneAsset sa;
      sa.id = a.at("id").get<std::string>();
      if (index.contains(sa.id)) throw std::runtime_error("duplicate asset id '" + sa.id + "'");
      sa.asset = load_ply(base / a.at("ply").get<std::string>());
      if (a.contains("vismlp") && !a.at("vismlp").is_null()) {
        sa.attach_model(load_model(base / a.at("vismlp").get<std::string>()));
      }
      const std::string id = sa.id;
      index.emplace(id, out.scene.add_asset(std::move(sa)));
    }
    for (const json& inst : j.at("instances")) {
      const std::string id = inst.at("asset_id").get<std::string>();
      const auto it = index.find(id);
      if (it == index.end()) throw std::runtime_error("instance references unknown asset '" + id + "'");
      InstanceTransform t;
      if (inst.contains("translation")) t.translation = vec<3>(inst, "translation");
      if (inst.contains("rotation_quat")) t.rotation = vec<4>(inst, "rotation_quat").normalized();
      t.scale = inst.value("scale", 1.0);
      out.scene.add_instance(it->second, t);
    }
    if (j.contains("camera")) out.camera = parse_camera(j.at("camera"));
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  out.scene.validate();
  return out;
}

}  // namespace splatcull
