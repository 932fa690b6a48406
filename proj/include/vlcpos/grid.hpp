// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "vlcpos/channel.hpp"
#include "vlcpos/errors.hpp"
#include "vlcpos/vec.hpp"

namespace vlcpos {

/// N x M lattice of anchor points C_k in the user plane z = user_height.
///
/// Anchors are numbered row-major in (x, y): k = ix * n_y + iy, so k = 0 is
/// the origin and k = size() - 1 the opposite corner.
struct GridSpec {
  Vec2 origin;
  double step{0.14};
  std::size_t n_x{1};
  std::size_t n_y{1};
  double user_height{0.85};

  bool operator==(const GridSpec&) const = default;

  [[nodiscard]] std::size_t size() const { return n_x * n_y; }

  [[nodiscard]] Vec2 point(std::size_t k) const {
    if (k >= size())
      throw DimensionError("anchor index " + std::to_string(k) + " out of range [0, " +
                           std::to_string(size()) + ")");
    return {origin.x + static_cast<double>(k / n_y) * step,
            origin.y + static_cast<double>(k % n_y) * step};
  }

  /// Far corner of the anchor footprint.
  [[nodiscard]] Vec2 extent() const {
    return {origin.x + static_cast<double>(n_x - 1) * step,
            origin.y + static_cast<double>(n_y - 1) * step};
  }

  /// Anchor closest to `p` in the room plane.
  [[nodiscard]] std::size_t nearest(Vec2 p) const {
    auto axis = [&](double v, double o, std::size_t n) {
      const double f = std::round((v - o) / step);
      return static_cast<std::size_t>(std::clamp(f, 0.0, static_cast<double>(n - 1)));
    };
    return axis(p.x, origin.x, n_x) * n_y + axis(p.y, origin.y, n_y);
  }
};

inline void validate(const GridSpec& g, const RoomScene& scene) {
  if (!(g.step > 0.0)) throw ConfigError("grid step must be > 0");
  if (g.n_x < 1 || g.n_y < 1) throw ConfigError("grid must have at least one anchor per axis");
  const Vec2 hi = g.extent();
  if (!(g.origin.x > 0.0 && g.origin.y > 0.0 && hi.x < scene.room_size.x && hi.y < scene.room_size.y))
    throw ConfigError("grid anchors must lie strictly inside the room footprint");
  if (!(g.user_height > 0.0 && g.user_height < scene.room_size.z))
    throw ConfigError("user_height must lie strictly between floor and ceiling");
}

/// Grid of round(L / step) anchors per axis, centered in the room.
/// A 5 m room with a 14 cm step gives 36 x 36 anchors spanning 0.05..4.95 m.
inline GridSpec centered_grid(const RoomScene& scene, double step) {
  if (!(step > 0.0)) throw ConfigError("grid step must be > 0");
  auto axis = [&](double length, std::size_t& n, double& origin) {
    n = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(length / step)));
    origin = 0.5 * (length - static_cast<double>(n - 1) * step);
  };
  GridSpec g;
  g.step = step;
  g.user_height = scene.transmitter_height;
  axis(scene.room_size.x, g.n_x, g.origin.x);
  axis(scene.room_size.y, g.n_y, g.origin.y);
  validate(g, scene);
  return g;
}

}  // namespace vlcpos
