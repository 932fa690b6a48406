// SPDX-License-Identifier: Apache-2.0
//
// Shared fixtures: the reference room and its 14 cm database are expensive
// enough to build once per test binary.
#pragma once

#include "vlcpos/vlcpos.hpp"

namespace vlcpos::testing {

inline const ChannelModel& reference_model() {
  static const ChannelModel model(default_scene());
  return model;
}

inline const GridSpec& reference_grid() {
  static const GridSpec grid = centered_grid(default_scene(), 0.14);
  return grid;
}

inline const FingerprintDatabase& reference_db() {
  static const FingerprintDatabase db =
      build_database(reference_model(), reference_grid(), default_guard(default_scene()));
  return db;
}

/// Scene with a single PD at `pd`.
inline RoomScene single_pd_scene(Vec3 pd_position) {
  RoomScene scene = default_scene();
  scene.photodetectors.resize(1);
  scene.photodetectors[0].position = pd_position;
  return scene;
}

}  // namespace vlcpos::testing
