// SPDX-License-Identifier: Apache-2.0
//
// JSON forms of the scene and grid. Readers start from the caller's value
// and override only the keys present, so configs can omit defaults; every
// error names the offending field path.
#pragma once

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <string>
#include <string_view>

#include "json.hpp"
#include "vlcpos/channel.hpp"
#include "vlcpos/digest.hpp"
#include "vlcpos/errors.hpp"
#include "vlcpos/grid.hpp"

namespace vlcpos::json_io {

using nlohmann::json;

inline std::string join(std::string_view path, std::string_view key) {
  return path.empty() ? std::string(key) : std::string(path) + "." + std::string(key);
}

inline void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError((path.empty() ? "document" : path) + ": expected an object");
}

inline void reject_unknown(const json& j, std::initializer_list<std::string_view> known,
                           const std::string& path) {
  for (const auto& item : j.items()) {
    if (std::find(known.begin(), known.end(), item.key()) == known.end())
      throw ConfigError(join(path, item.key()) + ": unknown field");
  }
}

inline const json& require(const json& j, std::string_view key, const std::string& path) {
  const auto it = j.find(key);
  if (it == j.end()) throw ConfigError(join(path, key) + ": missing required field");
  return *it;
}

inline double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path + ": expected a number");
  return j.get<double>();
}

inline Vec3 as_vec3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(path + ": expected an array of 3 numbers");
  return {as_number(j[0], path + "[0]"), as_number(j[1], path + "[1]"),
          as_number(j[2], path + "[2]")};
}

inline void read_number(const json& j, std::string_view key, double& out, const std::string& path) {
  if (const auto it = j.find(key); it != j.end()) out = as_number(*it, join(path, key));
}

inline json to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

inline json to_json(const Photodetector& pd) {
  return {{"position", to_json(pd.position)},
          {"area", pd.area},
          {"fov_half_angle", pd.fov_half_angle},
          {"orientation", to_json(pd.orientation)}};
}

inline Photodetector photodetector_from_json(const json& j, const std::string& path) {
  expect_object(j, path);
  reject_unknown(j, {"position", "area", "fov_half_angle", "fov_half_angle_deg", "orientation"},
                 path);
  if (j.contains("fov_half_angle") && j.contains("fov_half_angle_deg"))
    throw ConfigError(path + ": give either fov_half_angle (rad) or fov_half_angle_deg, not both");
  Photodetector pd;
  pd.position = as_vec3(require(j, "position", path), join(path, "position"));
  read_number(j, "area", pd.area, path);
  read_number(j, "fov_half_angle", pd.fov_half_angle, path);
  if (const auto it = j.find("fov_half_angle_deg"); it != j.end())
    pd.fov_half_angle = degrees(as_number(*it, join(path, "fov_half_angle_deg")));
  if (const auto it = j.find("orientation"); it != j.end())
    pd.orientation = as_vec3(*it, join(path, "orientation"));
  return pd;
}

inline json to_json(const RoomScene& s) {
  json pds = json::array();
  for (const Photodetector& pd : s.photodetectors) pds.push_back(to_json(pd));
  return {{"room_size", to_json(s.room_size)},
          {"wall_reflectance", s.wall_reflectance},
          {"reflecting_element_side", s.reflecting_element_side},
          {"transmitter",
           {{"height", s.transmitter_height},
            {"power", s.transmitter_power},
            {"lambertian_mode", s.lambertian_mode}}},
          {"bin_width", s.bin_width},
          {"photodetectors", pds}};
}

/// Overrides fields of `base` with those present in `j`.
inline RoomScene scene_from_json(const json& j, RoomScene base, const std::string& path) {
  expect_object(j, path);
  reject_unknown(j,
                 {"room_size", "wall_reflectance", "reflecting_element_side", "transmitter",
                  "bin_width", "photodetectors"},
                 path);
  if (const auto it = j.find("room_size"); it != j.end())
    base.room_size = as_vec3(*it, join(path, "room_size"));
  read_number(j, "wall_reflectance", base.wall_reflectance, path);
  read_number(j, "reflecting_element_side", base.reflecting_element_side, path);
  read_number(j, "bin_width", base.bin_width, path);
  if (const auto it = j.find("transmitter"); it != j.end()) {
    const std::string tp = join(path, "transmitter");
    expect_object(*it, tp);
    reject_unknown(*it, {"height", "power", "lambertian_mode"}, tp);
    read_number(*it, "height", base.transmitter_height, tp);
    read_number(*it, "power", base.transmitter_power, tp);
    read_number(*it, "lambertian_mode", base.lambertian_mode, tp);
  }
  if (const auto it = j.find("photodetectors"); it != j.end()) {
    const std::string pp = join(path, "photodetectors");
    if (!it->is_array()) throw ConfigError(pp + ": expected an array");
    base.photodetectors.clear();
    for (std::size_t i = 0; i < it->size(); ++i)
      base.photodetectors.push_back(
          photodetector_from_json((*it)[i], pp + "[" + std::to_string(i) + "]"));
  }
  try {
    validate(base);
  } catch (const ConfigError& e) {
    throw ConfigError((path.empty() ? std::string("scene") : path) + ": " + e.what());
  }
  return base;
}

/// Stable identity of a scene: FNV-1a over its canonical JSON text.
inline std::uint64_t scene_digest(const RoomScene& s) { return fnv1a(to_json(s).dump()); }

inline json to_json(const GridSpec& g) {
  return {{"origin", json::array({g.origin.x, g.origin.y})},
          {"step", g.step},
          {"n_x", g.n_x},
          {"n_y", g.n_y},
          {"user_height", g.user_height}};
}

inline GridSpec grid_from_json(const json& j, const std::string& path) {
  expect_object(j, path);
  reject_unknown(j, {"origin", "step", "n_x", "n_y", "user_height"}, path);
  GridSpec g;
  const json& origin = require(j, "origin", path);
  if (!origin.is_array() || origin.size() != 2)
    throw ConfigError(join(path, "origin") + ": expected an array of 2 numbers");
  g.origin = {as_number(origin[0], join(path, "origin") + "[0]"),
              as_number(origin[1], join(path, "origin") + "[1]")};
  g.step = as_number(require(j, "step", path), join(path, "step"));
  for (auto [key, out] : {std::pair{"n_x", &g.n_x}, std::pair{"n_y", &g.n_y}}) {
    const json& v = require(j, key, path);
    if (!v.is_number_unsigned()) throw ConfigError(join(path, key) + ": expected a positive integer");
    *out = v.get<std::size_t>();
  }
  g.user_height = as_number(require(j, "user_height", path), join(path, "user_height"));
  return g;
}

}  // namespace vlcpos::json_io
