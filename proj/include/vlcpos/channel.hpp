// SPDX-License-Identifier: Apache-2.0
//
// Uplink optical channel: Lambertian line-of-sight gain plus the first
// diffuse bounce off every room surface, binned into an impulse response.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "vlcpos/errors.hpp"
#include "vlcpos/vec.hpp"

namespace vlcpos {

inline constexpr double kSpeedOfLight = 2.998e8;  // m/s

inline constexpr double degrees(double deg) { return deg * std::numbers::pi / 180.0; }

/// Ceiling-mounted uplink receiver.
struct Photodetector {
  Vec3 position;
  double area{1e-4};                 // m^2
  double fov_half_angle{degrees(70.0)};
  Vec3 orientation{0.0, 0.0, -1.0};  // unit normal, facing down by default

  bool operator==(const Photodetector&) const = default;
};

/// User-side infrared LED.
struct Transmitter {
  Vec3 position;
  double power{10e-3};               // W
  double lambertian_mode{1.0};
  Vec3 orientation{0.0, 0.0, 1.0};   // unit normal, facing up by default

  bool operator==(const Transmitter&) const = default;
};

/// Empty rectangular room with identical diffuse surfaces.
///
/// The transmitter fields describe the device every user carries; only its
/// position in the plane z = transmitter_height varies between queries.
struct RoomScene {
  Vec3 room_size{5.0, 5.0, 3.0};     // width X, depth Y, height Z (m)
  double wall_reflectance{0.8};
  double reflecting_element_side{0.02};  // m, side of a square surface patch
  double transmitter_height{0.85};   // m
  double transmitter_power{10e-3};   // W
  double lambertian_mode{1.0};
  double bin_width{0.1e-9};          // s
  std::vector<Photodetector> photodetectors;

  bool operator==(const RoomScene&) const = default;

  [[nodiscard]] Transmitter transmitter_at(Vec2 p) const {
    Transmitter tx;
    tx.position = {p.x, p.y, transmitter_height};
    tx.power = transmitter_power;
    tx.lambertian_mode = lambertian_mode;
    return tx;
  }

  [[nodiscard]] bool contains(const Vec3& p) const {
    return p.x >= 0.0 && p.y >= 0.0 && p.z >= 0.0 && p.x <= room_size.x && p.y <= room_size.y &&
           p.z <= room_size.z;
  }
};

inline void validate(const Photodetector& pd) {
  if (!(pd.area > 0.0)) throw ConfigError("photodetector area must be > 0");
  if (!(pd.fov_half_angle > 0.0 && pd.fov_half_angle <= std::numbers::pi / 2 + 1e-12))
    throw ConfigError("photodetector fov_half_angle must lie in (0, pi/2]");
  if (std::abs(norm(pd.orientation) - 1.0) > 1e-9)
    throw ConfigError("photodetector orientation must be a unit vector");
}

inline void validate(const Transmitter& tx) {
  if (!(tx.power > 0.0)) throw ConfigError("transmitter power must be > 0");
  if (!(tx.lambertian_mode >= 1.0)) throw ConfigError("lambertian_mode must be >= 1");
  if (std::abs(norm(tx.orientation) - 1.0) > 1e-9)
    throw ConfigError("transmitter orientation must be a unit vector");
}

inline void validate(const RoomScene& scene) {
  const Vec3& r = scene.room_size;
  if (!(r.x > 0.0 && r.y > 0.0 && r.z > 0.0)) throw ConfigError("room dimensions must be > 0");
  if (!(scene.wall_reflectance >= 0.0 && scene.wall_reflectance <= 1.0))
    throw ConfigError("wall_reflectance must lie in [0, 1]");
  if (!(scene.reflecting_element_side > 0.0))
    throw ConfigError("reflecting_element_side must be > 0");
  if (scene.reflecting_element_side > std::min({r.x, r.y, r.z}))
    throw ConfigError("reflecting_element_side exceeds a room surface dimension");
  if (!(scene.bin_width > 0.0)) throw ConfigError("bin_width must be > 0");
  if (!(scene.transmitter_height > 0.0 && scene.transmitter_height < r.z))
    throw ConfigError("transmitter_height must lie strictly between floor and ceiling");
  validate(scene.transmitter_at({r.x / 2, r.y / 2}));
  for (std::size_t i = 0; i < scene.photodetectors.size(); ++i) {
    validate(scene.photodetectors[i]);
    if (!scene.contains(scene.photodetectors[i].position))
      throw ConfigError("photodetector " + std::to_string(i) + " lies outside the room");
  }
}

/// Time-binned received power. Bin i covers [t0 + i*bin_width, t0 + (i+1)*bin_width).
struct ImpulseResponse {
  double bin_width{0.1e-9};
  double t0{0.0};
  std::vector<double> power;

  [[nodiscard]] std::size_t size() const { return power.size(); }
  [[nodiscard]] double time_of(std::size_t bin) const {
    return t0 + static_cast<double>(bin) * bin_width;
  }
  /// Bin holding an arrival at `delay`, or size() when it falls outside.
  [[nodiscard]] std::size_t bin_of(double delay) const {
    const double f = std::floor((delay - t0) / bin_width);
    if (f < 0.0 || f >= static_cast<double>(power.size())) return power.size();
    return static_cast<std::size_t>(f);
  }
  void add(double delay, double watts) {
    const std::size_t b = bin_of(delay);
    if (b < power.size()) power[b] += watts;
  }

  bool operator==(const ImpulseResponse&) const = default;
};

inline double path_delay(const Vec3& a, const Vec3& b) {
  const double d = norm(a - b);
  if (d == 0.0) throw GeometryError("path_delay: coincident endpoints");
  return d / kSpeedOfLight;
}

struct LosPath {
  double gain{0.0};   // received / transmitted power
  double delay{0.0};  // s
};

namespace detail {

// Lambertian radiant intensity factor cos^m(phi); integer modes avoid pow().
inline double lambert_pattern(double cos_phi, double mode) {
  if (cos_phi <= 0.0) return 0.0;
  if (mode == 1.0) return cos_phi;
  const double rounded = std::round(mode);
  if (rounded == mode && mode <= 16.0) {
    double r = 1.0;
    for (int i = 0; i < static_cast<int>(rounded); ++i) r *= cos_phi;
    return r;
  }
  return std::pow(cos_phi, mode);
}

}  // namespace detail

/// Direct-path gain (m+1) A cos^m(phi) cos(psi) / (2 pi d^2), zero outside the receiver FOV.
inline LosPath los_gain(const Transmitter& tx, const Photodetector& pd) {
  const Vec3 to_pd = pd.position - tx.position;
  const double d = norm(to_pd);
  if (d == 0.0) throw GeometryError("los_gain: transmitter and photodetector coincide");
  LosPath out;
  out.delay = d / kSpeedOfLight;
  const double cos_phi = dot(tx.orientation, to_pd) / d;
  const double cos_psi = -dot(pd.orientation, to_pd) / d;
  if (cos_phi <= 0.0 || cos_psi <= 0.0 || cos_psi < std::cos(pd.fov_half_angle)) return out;
  out.gain = (tx.lambertian_mode + 1.0) * pd.area / (2.0 * std::numbers::pi * d * d) *
             detail::lambert_pattern(cos_phi, tx.lambertian_mode) * cos_psi;
  return out;
}

/// Zero-filled response spanning every first-bounce path length in the room.
inline ImpulseResponse empty_response(const RoomScene& scene) {
  const double longest = 2.0 * norm(scene.room_size) / kSpeedOfLight;
  ImpulseResponse ir;
  ir.bin_width = scene.bin_width;
  ir.t0 = 0.0;
  ir.power.assign(static_cast<std::size_t>(std::ceil(longest / scene.bin_width)) + 2, 0.0);
  return ir;
}

/// Room surfaces tessellated into square reflecting elements, with the
/// patch-to-receiver half of every first-bounce path precomputed for one PD.
///
/// Patches the PD cannot see (behind it, outside its FOV, or facing away)
/// are dropped at construction.
class ReflectorField {
 public:
  ReflectorField(const RoomScene& scene, const Photodetector& pd) {
    validate(scene);
    validate(pd);
    const Vec3 r = scene.room_size;
    struct Face {
      Vec3 origin, u, v, normal;
      double lu, lv;
    };
    const Face faces[] = {
        {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, r.x, r.y},     // floor
        {{0, 0, r.z}, {1, 0, 0}, {0, 1, 0}, {0, 0, -1}, r.x, r.y},  // ceiling
        {{0, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 0}, r.y, r.z},     // x = 0
        {{r.x, 0, 0}, {0, 1, 0}, {0, 0, 1}, {-1, 0, 0}, r.y, r.z},  // x = X
        {{0, 0, 0}, {1, 0, 0}, {0, 0, 1}, {0, 1, 0}, r.x, r.z},     // y = 0
        {{0, r.y, 0}, {1, 0, 0}, {0, 0, 1}, {0, -1, 0}, r.x, r.z},  // y = Y
    };
    const double side = scene.reflecting_element_side;
    const double cos_fov = std::cos(pd.fov_half_angle);
    for (const Face& f : faces) {
      // Round up so patches never exceed the requested side; areas stay exact.
      const auto nu = static_cast<std::size_t>(std::ceil(f.lu / side - 1e-9));
      const auto nv = static_cast<std::size_t>(std::ceil(f.lv / side - 1e-9));
      const double su = f.lu / static_cast<double>(nu);
      const double sv = f.lv / static_cast<double>(nv);
      const double area = su * sv;
      for (std::size_t j = 0; j < nv; ++j) {
        Row row{px_.size(), px_.size(), {}, {}};
        for (std::size_t i = 0; i < nu; ++i) {
          const Vec3 c = f.origin + f.u * ((static_cast<double>(i) + 0.5) * su) +
                         f.v * ((static_cast<double>(j) + 0.5) * sv);
          const Vec3 to_pd = pd.position - c;
          const double d2 = norm(to_pd);
          if (d2 == 0.0) continue;
          const double cos_out = dot(f.normal, to_pd) / d2;
          const double cos_psi = -dot(pd.orientation, to_pd) / d2;
          if (cos_out <= 0.0 || cos_psi <= 0.0 || cos_psi < cos_fov) continue;
          const double g2 = pd.area * cos_out * cos_psi / (std::numbers::pi * d2 * d2);
          if (row.begin == row.end) row.first = c;
          row.last = c;
          ++row.end;
          px_.push_back(static_cast<float>(c.x));
          py_.push_back(static_cast<float>(c.y));
          pz_.push_back(static_cast<float>(c.z));
          nx_.push_back(static_cast<float>(f.normal.x));
          ny_.push_back(static_cast<float>(f.normal.y));
          nz_.push_back(static_cast<float>(f.normal.z));
          coef_.push_back(static_cast<float>(scene.wall_reflectance * area * g2));
          d2_.push_back(static_cast<float>(d2));
        }
        if (row.end > row.begin) rows_.push_back(row);
      }
    }
  }

  [[nodiscard]] std::size_t patch_count() const { return px_.size(); }

  /// Adds the first-bounce power of `tx` into `ir`.
  void accumulate(const Transmitter& tx, ImpulseResponse& ir) const {
    const std::size_t n = px_.size();
    if (n == 0) return;
    thread_local std::vector<float> watts;
    thread_local std::vector<float> bin;
    watts.resize(n);
    bin.resize(n);
    const double k = tx.power * (tx.lambertian_mode + 1.0) / (2.0 * std::numbers::pi);
    const BinMap map{static_cast<float>(1.0 / (kSpeedOfLight * ir.bin_width)),
                     static_cast<float>(ir.t0 / ir.bin_width), static_cast<float>(ir.power.size())};
    double* out = ir.power.data();
    for (const Row& row : rows_) {
      // Centers are collinear, so the row is dark when both ends are behind the emitter.
      if (dot(tx.orientation, row.first - tx.position) <= 0.0 &&
          dot(tx.orientation, row.last - tx.position) <= 0.0)
        continue;
      kernel(tx, k, map, row.begin, row.end, watts.data(), bin.data());
      for (std::size_t i = row.begin; i < row.end; ++i) {
        // Truncation is floor here since negative positions are rejected first.
        if (bin[i] >= 0.0f && bin[i] < map.count) out[static_cast<std::size_t>(bin[i])] += watts[i];
      }
    }
  }

 private:
  struct Row {
    std::size_t begin, end;
    Vec3 first, last;
  };

  struct BinMap {
    float per_meter;  // bins per meter of path length
    float offset;     // t0 in bins
    float count;
  };

  // Branch-free so the compiler can vectorize it.
  void kernel(const Transmitter& tx, double k, const BinMap& map, std::size_t begin,
              std::size_t end, float* __restrict watts, float* __restrict bin) const {
    const auto tx_x = static_cast<float>(tx.position.x);
    const auto tx_y = static_cast<float>(tx.position.y);
    const auto tx_z = static_cast<float>(tx.position.z);
    const auto ox = static_cast<float>(tx.orientation.x);
    const auto oy = static_cast<float>(tx.orientation.y);
    const auto oz = static_cast<float>(tx.orientation.z);
    const auto kf = static_cast<float>(k);
    const float* __restrict px = px_.data();
    const float* __restrict py = py_.data();
    const float* __restrict pz = pz_.data();
    const float* __restrict nx = nx_.data();
    const float* __restrict ny = ny_.data();
    const float* __restrict nz = nz_.data();
    const float* __restrict coef = coef_.data();
    const float* __restrict d2 = d2_.data();
    for (std::size_t i = begin; i < end; ++i) {
      // d points from the patch to the transmitter.
      const float dx = tx_x - px[i];
      const float dy = tx_y - py[i];
      const float dz = tx_z - pz[i];
      const float r2 = dx * dx + dy * dy + dz * dz;
      const float r = std::sqrt(r2);
      const float inv_r = 1.0f / r;
      const float cos_emit = std::max(-(ox * dx + oy * dy + oz * dz) * inv_r, 0.0f);
      const float cos_in = std::max((nx[i] * dx + ny[i] * dy + nz[i] * dz) * inv_r, 0.0f);
      watts[i] = kf * cos_emit * cos_in * inv_r * inv_r * coef[i];
      bin[i] = (r + d2[i]) * map.per_meter - map.offset;
    }
    if (tx.lambertian_mode != 1.0) {
      for (std::size_t i = begin; i < end; ++i) {
        if (watts[i] == 0.0f) continue;
        const double dx = tx.position.x - px[i];
        const double dy = tx.position.y - py[i];
        const double dz = tx.position.z - pz[i];
        const double cos_emit = -(tx.orientation.x * dx + tx.orientation.y * dy + tx.orientation.z * dz) /
                                std::sqrt(dx * dx + dy * dy + dz * dz);
        watts[i] = static_cast<float>(
            watts[i] * detail::lambert_pattern(cos_emit, tx.lambertian_mode) / cos_emit);
      }
    }
  }

  std::vector<Row> rows_;
  // Single precision keeps twice as many patches per vector lane; path
  // lengths stay accurate to ~1e-6 m, far below one time bin.
  std::vector<float> px_, py_, pz_;
  std::vector<float> nx_, ny_, nz_;
  std::vector<float> coef_;  // reflectance * patch area * patch-to-PD gain
  std::vector<float> d2_;    // patch-to-PD distance (m)
};

namespace detail {

inline void check_inside(const RoomScene& scene, const Vec3& p) {
  const Vec3& r = scene.room_size;
  if (!(p.x > 0.0 && p.y > 0.0 && p.z > 0.0 && p.x < r.x && p.y < r.y && p.z < r.z))
    throw GeometryError("transmitter must lie strictly inside the room");
}

inline void add_los(const Transmitter& tx, const Photodetector& pd, ImpulseResponse& ir) {
  const LosPath los = los_gain(tx, pd);
  if (los.gain > 0.0) ir.add(los.delay, tx.power * los.gain);
}

}  // namespace detail

/// LOS plus first-bounce diffuse response of one transmitter at one PD.
inline ImpulseResponse first_bounce_response(const Transmitter& tx, const Photodetector& pd,
                                             const RoomScene& scene) {
  validate(tx);
  detail::check_inside(scene, tx.position);
  const ReflectorField field(scene, pd);
  ImpulseResponse ir = empty_response(scene);
  field.accumulate(tx, ir);
  detail::add_los(tx, pd, ir);
  return ir;
}

/// Scene with per-PD reflector tables built once; response() is then a
/// pure function and safe to call concurrently.
class ChannelModel {
 public:
  explicit ChannelModel(RoomScene scene) : scene_(std::move(scene)) {
    validate(scene_);
    fields_.reserve(scene_.photodetectors.size());
    for (const Photodetector& pd : scene_.photodetectors) fields_.emplace_back(scene_, pd);
  }

  [[nodiscard]] const RoomScene& scene() const { return scene_; }
  [[nodiscard]] std::size_t pd_count() const { return fields_.size(); }
  [[nodiscard]] const ReflectorField& field(std::size_t pd) const { return fields_.at(pd); }

  [[nodiscard]] ImpulseResponse response(const Transmitter& tx, std::size_t pd) const {
    detail::check_inside(scene_, tx.position);
    ImpulseResponse ir = empty_response(scene_);
    fields_.at(pd).accumulate(tx, ir);
    detail::add_los(tx, scene_.photodetectors[pd], ir);
    return ir;
  }

  [[nodiscard]] ImpulseResponse response(Vec2 user, std::size_t pd) const {
    return response(scene_.transmitter_at(user), pd);
  }

 private:
  RoomScene scene_;
  std::vector<ReflectorField> fields_;
};

/// 5 x 5 x 3 m room with four ceiling PDs on a 2 m square around the center.
inline RoomScene default_scene() {
  RoomScene scene;
  for (const Vec3& p : {Vec3{1.5, 1.5, 3.0}, Vec3{3.5, 1.5, 3.0}, Vec3{1.5, 3.5, 3.0},
                        Vec3{3.5, 3.5, 3.0}}) {
    Photodetector pd;
    pd.position = p;
    scene.photodetectors.push_back(pd);
  }
  return scene;
}

}  // namespace vlcpos
