// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "vlcpos/channel.hpp"
#include "vlcpos/digest.hpp"
#include "vlcpos/errors.hpp"
#include "vlcpos/features.hpp"
#include "vlcpos/grid.hpp"
#include "vlcpos/json_io.hpp"
#include "vlcpos/parallel.hpp"

namespace vlcpos {

inline constexpr std::size_t kFeaturesPerPd = 3;
enum FeatureSlot : std::size_t { kLosSlot = 0, kSppSlot = 1, kDelaySlot = 2 };

/// Sentinel stored in a delay slot when the response had no SPP.
inline constexpr double kAbsentDelay = std::numeric_limits<double>::quiet_NaN();

/// Appends (P_LOS, P_SPP, delta_tau) to `out`.
inline void append_features(const Fingerprint& fp, std::vector<double>& out) {
  out.push_back(fp.p_los);
  out.push_back(fp.p_spp);
  out.push_back(fp.delta_tau.value_or(kAbsentDelay));
}

/// Noiseless concatenated fingerprint (3Q values, PD order of the scene) at `user`.
inline std::vector<double> fingerprint_vector(const ChannelModel& model, Vec2 user, double guard) {
  std::vector<double> out;
  out.reserve(kFeaturesPerPd * model.pd_count());
  for (std::size_t pd = 0; pd < model.pd_count(); ++pd)
    append_features(extract_fingerprint(model.response(user, pd), guard), out);
  return out;
}

/// Anchor grid with the concatenated fingerprint of every anchor.
struct FingerprintDatabase {
  RoomScene scene;  // PD order here fixes the feature order
  GridSpec grid;
  double guard{0.0};
  std::vector<double> features;  // grid.size() rows of dims() values

  [[nodiscard]] std::size_t pd_count() const { return scene.photodetectors.size(); }
  [[nodiscard]] std::size_t dims() const { return kFeaturesPerPd * pd_count(); }
  [[nodiscard]] std::size_t size() const { return grid.size(); }

  [[nodiscard]] std::span<const double> entry(std::size_t k) const {
    if (k >= size()) throw DimensionError("anchor index out of range");
    return std::span<const double>(features).subspan(k * dims(), dims());
  }

  [[nodiscard]] std::uint64_t scene_digest() const { return json_io::scene_digest(scene); }

  /// Restriction to the listed PDs, in the listed order.
  [[nodiscard]] FingerprintDatabase subset(std::span<const std::size_t> pds) const {
    FingerprintDatabase out;
    out.scene = scene;
    out.scene.photodetectors.clear();
    for (const std::size_t p : pds) out.scene.photodetectors.push_back(scene.photodetectors.at(p));
    out.grid = grid;
    out.guard = guard;
    out.features.reserve(size() * kFeaturesPerPd * pds.size());
    for (std::size_t k = 0; k < size(); ++k) {
      const auto row = entry(k);
      for (const std::size_t p : pds)
        for (std::size_t s = 0; s < kFeaturesPerPd; ++s)
          out.features.push_back(row[p * kFeaturesPerPd + s]);
    }
    return out;
  }

  // Bitwise on features so absent-delay sentinels compare equal.
  bool operator==(const FingerprintDatabase& o) const {
    if (!(scene == o.scene && grid == o.grid && guard == o.guard &&
          features.size() == o.features.size()))
      return false;
    for (std::size_t i = 0; i < features.size(); ++i)
      if (std::bit_cast<std::uint64_t>(features[i]) != std::bit_cast<std::uint64_t>(o.features[i]))
        return false;
    return true;
  }
};

inline Vec2 anchor_position(const FingerprintDatabase& db, std::size_t k) { return db.grid.point(k); }

inline FingerprintDatabase build_database(const ChannelModel& model, const GridSpec& grid,
                                          double guard, unsigned threads = 0) {
  validate(grid, model.scene());
  if (model.pd_count() == 0) throw ConfigError("scene has no photodetectors");
  FingerprintDatabase db;
  db.scene = model.scene();
  db.grid = grid;
  db.guard = guard;
  const std::size_t dims = db.dims();
  db.features.assign(grid.size() * dims, 0.0);
  parallel_for(grid.size(), threads, [&](std::size_t k) {
    const std::vector<double> row = fingerprint_vector(model, grid.point(k), guard);
    std::copy(row.begin(), row.end(), db.features.begin() + static_cast<std::ptrdiff_t>(k * dims));
  });
  return db;
}

inline FingerprintDatabase build_database(const RoomScene& scene, const GridSpec& grid,
                                          double guard, unsigned threads = 0) {
  return build_database(ChannelModel(scene), grid, guard, threads);
}

inline constexpr int kDatabaseFormatVersion = 1;
inline constexpr std::string_view kDatabaseFormatName = "vlcpos-fingerprint-db";

/// Versioned JSON text; the checksum covers every other field.
inline std::string save_database(const FingerprintDatabase& db) {
  using nlohmann::json;
  json entries = json::array();
  for (std::size_t k = 0; k < db.size(); ++k) {
    json row = json::array();
    for (const double v : db.entry(k)) row.push_back(std::isnan(v) ? json(nullptr) : json(v));
    entries.push_back(std::move(row));
  }
  json doc = {{"format", kDatabaseFormatName},
              {"version", kDatabaseFormatVersion},
              {"scene_digest", to_hex(db.scene_digest())},
              {"scene", json_io::to_json(db.scene)},
              {"grid", json_io::to_json(db.grid)},
              {"guard", db.guard},
              {"entries", std::move(entries)}};
  doc["checksum"] = to_hex(fnv1a(doc.dump()));
  return doc.dump(1) + "\n";
}

inline FingerprintDatabase load_database(std::string_view text) {
  using nlohmann::json;
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos)
    throw FormatError("database: empty input");
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("database: malformed or truncated: ") + e.what());
  }
  if (!doc.is_object() || doc.value("format", "") != kDatabaseFormatName)
    throw FormatError("database: not a fingerprint database");
  if (!doc.contains("version") || doc["version"] != kDatabaseFormatVersion)
    throw FormatError("database: unsupported format version " +
                      (doc.contains("version") ? doc["version"].dump() : std::string("<none>")) +
                      " (expected " + std::to_string(kDatabaseFormatVersion) + ")");
  if (!doc.contains("checksum") || !doc["checksum"].is_string())
    throw FormatError("database: missing checksum");
  const std::string stored = doc["checksum"].get<std::string>();
  doc.erase("checksum");
  if (to_hex(fnv1a(doc.dump())) != stored)
    throw FormatError("database: checksum mismatch (file corrupted or edited)");

  FingerprintDatabase db;
  try {
    db.scene = json_io::scene_from_json(json_io::require(doc, "scene", ""), RoomScene{}, "scene");
    db.grid = json_io::grid_from_json(json_io::require(doc, "grid", ""), "grid");
    db.guard = json_io::as_number(json_io::require(doc, "guard", ""), "guard");
  } catch (const ConfigError& e) {
    throw FormatError(std::string("database: ") + e.what());
  }
  if (doc.value("scene_digest", "") != to_hex(db.scene_digest()))
    throw FormatError("database: scene digest does not match the stored scene");
  const json& entries = doc["entries"];
  if (!entries.is_array() || entries.size() != db.grid.size())
    throw FormatError("database: expected " + std::to_string(db.grid.size()) + " entries");
  const std::size_t dims = db.dims();
  db.features.reserve(db.grid.size() * dims);
  for (const json& row : entries) {
    if (!row.is_array() || row.size() != dims)
      throw FormatError("database: every entry must hold " + std::to_string(dims) + " values");
    for (std::size_t i = 0; i < dims; ++i) {
      if (row[i].is_null() && i % kFeaturesPerPd == kDelaySlot) {
        db.features.push_back(kAbsentDelay);
      } else if (row[i].is_number()) {
        db.features.push_back(row[i].get<double>());
      } else {
        throw FormatError("database: non-numeric feature value");
      }
    }
  }
  return db;
}

/// One row per anchor: k (1-based), x, y, then per PD the two powers in W
/// and dB re 1 W, and the delay in ns (empty when absent).
inline void write_database_csv(std::ostream& os, const FingerprintDatabase& db) {
  os << "k,x_m,y_m";
  for (std::size_t p = 0; p < db.pd_count(); ++p)
    os << ",pd" << p << "_p_los_W,pd" << p << "_p_los_dBW,pd" << p << "_p_spp_W,pd" << p
       << "_p_spp_dBW,pd" << p << "_delta_tau_ns";
  os << "\n";
  const auto old_precision = os.precision(17);
  for (std::size_t k = 0; k < db.size(); ++k) {
    const Vec2 c = db.grid.point(k);
    os << (k + 1) << ',' << c.x << ',' << c.y;
    const auto row = db.entry(k);
    for (std::size_t p = 0; p < db.pd_count(); ++p) {
      for (const std::size_t slot : {kLosSlot, kSppSlot}) {
        const double w = row[p * kFeaturesPerPd + slot];
        os << ',' << w << ',';
        if (w > 0.0) os << 10.0 * std::log10(w);
      }
      os << ',';
      const double d = row[p * kFeaturesPerPd + kDelaySlot];
      if (!std::isnan(d)) os << d * 1e9;
    }
    os << "\n";
  }
  os.precision(old_precision);
}

}  // namespace vlcpos
