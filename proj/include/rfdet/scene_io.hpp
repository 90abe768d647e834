// Scene JSON serialization. Layout:
//   {class_table, bounds:{min,max}, primitives:[{kind, center, size,
//    rotation (9 row-major), color, density_amp, class_id}]}
#pragma once

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rfdet/field.hpp"

namespace rfdet {

using json = nlohmann::json;

inline json vec3_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

inline Vec3 vec3_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw IoError(what + ": expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline json scene_to_json(const SyntheticScene& scene) {
  json j;
  j["class_table"] = scene.class_table;
  j["bounds"] = {{"min", vec3_to_json(scene.bounds.lo)}, {"max", vec3_to_json(scene.bounds.hi)}};
  json prims = json::array();
  for (const auto& p : scene.primitives) {
    json jp;
    jp["kind"] = to_string(p.kind);
    jp["center"] = vec3_to_json(p.pose.translation);
    jp["size"] = vec3_to_json(p.size);
    jp["rotation"] = p.pose.rotation.m;
    jp["color"] = vec3_to_json(p.color);
    jp["density_amp"] = p.density_amp;
    jp["class_id"] = p.class_id;
    prims.push_back(jp);
  }
  j["primitives"] = prims;
  return j;
}

inline void validate_scene(const SyntheticScene& s);

inline SyntheticScene scene_from_json(const json& j) {
  SyntheticScene s;
  try {
    s.class_table = j.at("class_table").get<std::vector<std::string>>();
    s.bounds.lo = vec3_from_json(j.at("bounds").at("min"), "bounds.min");
    s.bounds.hi = vec3_from_json(j.at("bounds").at("max"), "bounds.max");
    for (const auto& jp : j.at("primitives")) {
      Primitive p;
      p.kind = primitive_kind_from(jp.at("kind").get<std::string>());
      p.pose.translation = vec3_from_json(jp.at("center"), "primitive.center");
      p.size = vec3_from_json(jp.at("size"), "primitive.size");
      auto rot = jp.at("rotation").get<std::vector<double>>();
      if (rot.size() != 9) throw IoError("primitive.rotation: expected 9 row-major entries");
      std::copy(rot.begin(), rot.end(), p.pose.rotation.m.begin());
      p.color = vec3_from_json(jp.at("color"), "primitive.color");
      p.density_amp = jp.at("density_amp").get<double>();
      p.class_id = jp.at("class_id").get<int>();
      s.primitives.push_back(p);
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed scene JSON: ") + e.what());
  }
  validate_scene(s);
  return s;
}

inline void validate_scene(const SyntheticScene& s) {
  if (s.class_table.empty()) throw IoError("scene: empty class table");
  if (!(s.bounds.lo.x < s.bounds.hi.x && s.bounds.lo.y < s.bounds.hi.y &&
        s.bounds.lo.z < s.bounds.hi.z))
    throw IoError("scene: bounds min must be strictly below max");
  for (const auto& p : s.primitives) {
    if (!(p.size.x > 0 && p.size.y > 0 && p.size.z > 0)) throw IoError("scene: non-positive primitive size");
    if (p.density_amp < 0) throw IoError("scene: negative density_amp");
    for (int c = 0; c < 3; ++c)
      if (p.color[c] < 0 || p.color[c] > 1) throw IoError("scene: color outside [0,1]");
    if (!is_rotation(p.pose.rotation, 1e-6)) throw IoError("scene: primitive rotation not in SO(3)");
    if (p.class_id < 0 || p.class_id >= static_cast<int>(s.class_table.size()))
      throw IoError("scene: class_id outside class table");
  }
}

inline void save_scene(const SyntheticScene& scene, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << scene_to_json(scene).dump(2) << "\n";
  if (!f) throw IoError("write failed: " + path);
}

inline SyntheticScene load_scene(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open scene file: " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw IoError("cannot parse scene JSON " + path + ": " + e.what());
  }
  return scene_from_json(j);
}

}  // namespace rfdet
