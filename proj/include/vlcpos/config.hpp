// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: one JSON document with named sections. Every field has
// a default, so "{}" describes the 5 x 5 x 3 m four-PD reference room with a
// 14 cm grid at 50 dB SNR.
//
//   {
//     "scene":    { ...RoomScene overrides... },
//     "grid":     { "step": 0.14 }  or a full { origin, step, n_x, n_y, user_height },
//     "noise":    { "snr_db": 50 } or { "sigma2": 1e-20 }, plus optional "beta2",
//     "features": { "guard": 1e-10 },
//     "estimator":{ "observations": 3, "metric": "whitened", "pd_count": 4 },
//     "sweep":    { "snr_db": [...], "pd_counts": [...], "observations": [...],
//                   "steps": [...], "snr_fixed_db": 50, "lb_oversample": 4 },
//     "trials": 20000, "seed": 0, "threads": 0, "output_dir": "out"
//   }
#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "vlcpos/analysis.hpp"
#include "vlcpos/channel.hpp"
#include "vlcpos/errors.hpp"
#include "vlcpos/estimator.hpp"
#include "vlcpos/features.hpp"
#include "vlcpos/grid.hpp"
#include "vlcpos/json_io.hpp"

namespace vlcpos {

struct SweepConfig {
  std::vector<double> snr_db{10, 15, 20, 25, 30, 35, 40, 45, 50};
  std::vector<std::size_t> pd_counts{1, 2, 4};
  std::vector<ObservationSet> observations{ObservationSet::kTwo, ObservationSet::kThree};
  std::vector<double> steps{0.07, 0.14, 0.21, 0.28};
  double snr_fixed_db{50.0};
  std::size_t lb_oversample{4};

  bool operator==(const SweepConfig&) const = default;
};

struct RunConfig {
  RoomScene scene = default_scene();
  std::optional<GridSpec> grid;  // explicit lattice; otherwise centered at grid_step
  double grid_step{0.14};
  std::optional<double> sigma2;
  std::optional<double> snr_db{50.0};
  double beta2{30.0};
  std::optional<double> guard;  // s; defaults to one bin width
  ObservationSet observations{ObservationSet::kThree};
  Metric metric{Metric::kWhitened};
  std::size_t pd_count{0};  // 0 = every PD of the scene
  SweepConfig sweep;
  std::size_t trials{20000};
  std::uint64_t seed{0};
  unsigned threads{0};
  std::string output_dir{"out"};

  bool operator==(const RunConfig&) const = default;

  [[nodiscard]] GridSpec resolved_grid() const {
    if (grid) {
      validate(*grid, scene);
      return *grid;
    }
    return centered_grid(scene, grid_step);
  }
  [[nodiscard]] double resolved_guard() const { return guard.value_or(default_guard(scene)); }
  [[nodiscard]] std::size_t resolved_pd_count() const {
    return pd_count == 0 ? scene.photodetectors.size() : pd_count;
  }

  /// sigma^2 for this run; an SNR is converted with the room-average LOS
  /// power of PD 0 over `db`.
  [[nodiscard]] NoiseModel noise_for(const FingerprintDatabase& db) const {
    return {sigma2 ? *sigma2 : sigma2_for_snr(mean_los_power(db), *snr_db), beta2};
  }
};

inline void validate(const RunConfig& c) {
  validate(c.scene);
  (void)c.resolved_grid();
  if (c.sigma2.has_value() == c.snr_db.has_value())
    throw ConfigError("noise: specify exactly one of sigma2 or snr_db");
  if (c.sigma2 && !(*c.sigma2 >= 0.0)) throw ConfigError("noise.sigma2: must be >= 0");
  if (c.snr_db && !std::isfinite(*c.snr_db)) throw ConfigError("noise.snr_db: must be finite");
  if (!(c.beta2 > 0.0)) throw ConfigError("noise.beta2: must be > 0");
  if (c.guard && !(*c.guard >= c.scene.bin_width))
    throw ConfigError("features.guard: must be >= the bin width");
  if (c.pd_count > c.scene.photodetectors.size())
    throw ConfigError("estimator.pd_count: scene has only " +
                      std::to_string(c.scene.photodetectors.size()) + " PDs");
  for (const std::size_t q : c.sweep.pd_counts)
    if (q < 1 || q > c.scene.photodetectors.size())
      throw ConfigError("sweep.pd_counts: " + std::to_string(q) + " outside 1.." +
                        std::to_string(c.scene.photodetectors.size()));
  for (const double s : c.sweep.steps)
    if (!(s > 0.0)) throw ConfigError("sweep.steps: steps must be > 0");
  if (c.sweep.lb_oversample < 1) throw ConfigError("sweep.lb_oversample: must be >= 1");
  if (c.trials < 1) throw ConfigError("trials: must be >= 1");
}

namespace detail {

inline ObservationSet observation_set(const nlohmann::json& j, const std::string& path) {
  if (j == 2) return ObservationSet::kTwo;
  if (j == 3) return ObservationSet::kThree;
  throw ConfigError(path + ": expected 2 or 3");
}

inline int observation_count(ObservationSet s) { return s == ObservationSet::kTwo ? 2 : 3; }

inline std::size_t as_count(const nlohmann::json& j, const std::string& path) {
  if (!j.is_number_unsigned()) throw ConfigError(path + ": expected a non-negative integer");
  return j.get<std::size_t>();
}

template <typename T, typename F>
std::vector<T> as_list(const nlohmann::json& j, const std::string& path, F&& item) {
  if (!j.is_array() || j.empty()) throw ConfigError(path + ": expected a non-empty array");
  std::vector<T> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(item(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

/// 1-based line and column of a byte offset.
inline std::string line_col(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
  using namespace json_io;
  expect_object(j, "");
  reject_unknown(j,
                 {"scene", "grid", "noise", "features", "estimator", "sweep", "trials", "seed",
                  "threads", "output_dir"},
                 "");
  RunConfig c;
  if (const auto it = j.find("scene"); it != j.end()) c.scene = scene_from_json(*it, c.scene, "scene");

  if (const auto it = j.find("grid"); it != j.end()) {
    expect_object(*it, "grid");
    if (it->size() == 1 && it->contains("step")) {
      c.grid_step = as_number((*it)["step"], "grid.step");
    } else {
      c.grid = grid_from_json(*it, "grid");
      c.grid_step = c.grid->step;
    }
  }

  if (const auto it = j.find("noise"); it != j.end()) {
    expect_object(*it, "noise");
    reject_unknown(*it, {"sigma2", "snr_db", "beta2"}, "noise");
    c.sigma2.reset();
    c.snr_db.reset();
    if (const auto s = it->find("sigma2"); s != it->end()) c.sigma2 = as_number(*s, "noise.sigma2");
    if (const auto s = it->find("snr_db"); s != it->end()) c.snr_db = as_number(*s, "noise.snr_db");
    read_number(*it, "beta2", c.beta2, "noise");
  }

  if (const auto it = j.find("features"); it != j.end()) {
    expect_object(*it, "features");
    reject_unknown(*it, {"guard"}, "features");
    if (const auto g = it->find("guard"); g != it->end()) c.guard = as_number(*g, "features.guard");
  }

  if (const auto it = j.find("estimator"); it != j.end()) {
    expect_object(*it, "estimator");
    reject_unknown(*it, {"observations", "metric", "pd_count"}, "estimator");
    if (const auto o = it->find("observations"); o != it->end())
      c.observations = detail::observation_set(*o, "estimator.observations");
    if (const auto m = it->find("metric"); m != it->end()) {
      if (*m == "whitened") c.metric = Metric::kWhitened;
      else if (*m == "euclidean") c.metric = Metric::kEuclidean;
      else throw ConfigError("estimator.metric: expected \"whitened\" or \"euclidean\"");
    }
    if (const auto q = it->find("pd_count"); q != it->end())
      c.pd_count = detail::as_count(*q, "estimator.pd_count");
  }

  if (const auto it = j.find("sweep"); it != j.end()) {
    expect_object(*it, "sweep");
    reject_unknown(*it, {"snr_db", "pd_counts", "observations", "steps", "snr_fixed_db", "lb_oversample"},
                   "sweep");
    SweepConfig& s = c.sweep;
    if (const auto v = it->find("snr_db"); v != it->end())
      s.snr_db = detail::as_list<double>(*v, "sweep.snr_db", as_number);
    if (const auto v = it->find("pd_counts"); v != it->end())
      s.pd_counts = detail::as_list<std::size_t>(*v, "sweep.pd_counts", detail::as_count);
    if (const auto v = it->find("observations"); v != it->end())
      s.observations = detail::as_list<ObservationSet>(*v, "sweep.observations", detail::observation_set);
    if (const auto v = it->find("steps"); v != it->end())
      s.steps = detail::as_list<double>(*v, "sweep.steps", as_number);
    read_number(*it, "snr_fixed_db", s.snr_fixed_db, "sweep");
    if (const auto v = it->find("lb_oversample"); v != it->end())
      s.lb_oversample = detail::as_count(*v, "sweep.lb_oversample");
  }

  if (const auto it = j.find("trials"); it != j.end()) c.trials = detail::as_count(*it, "trials");
  if (const auto it = j.find("seed"); it != j.end()) {
    if (!it->is_number_unsigned()) throw ConfigError("seed: expected a non-negative integer");
    c.seed = it->get<std::uint64_t>();
  }
  if (const auto it = j.find("threads"); it != j.end())
    c.threads = static_cast<unsigned>(detail::as_count(*it, "threads"));
  if (const auto it = j.find("output_dir"); it != j.end()) {
    if (!it->is_string()) throw ConfigError("output_dir: expected a string");
    c.output_dir = it->get<std::string>();
  }
  validate(c);
  return c;
}

/// Parses config text; syntax errors report line and column.
inline RunConfig parse_config(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config syntax error at " + detail::line_col(text, e.byte > 0 ? e.byte - 1 : 0) +
                      ": " + e.what());
  }
  return config_from_json(j);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

/// Complete, explicit form of `c`; config_from_json(to_json(c)) == c.
inline nlohmann::json to_json(const RunConfig& c) {
  using nlohmann::json;
  json noise = {{"beta2", c.beta2}};
  if (c.sigma2) noise["sigma2"] = *c.sigma2;
  if (c.snr_db) noise["snr_db"] = *c.snr_db;
  json obs = json::array();
  for (const ObservationSet s : c.sweep.observations) obs.push_back(detail::observation_count(s));
  json doc = {
      {"scene", json_io::to_json(c.scene)},
      {"grid", c.grid ? json_io::to_json(*c.grid) : json{{"step", c.grid_step}}},
      {"noise", noise},
      {"estimator",
       {{"observations", detail::observation_count(c.observations)},
        {"metric", to_string(c.metric)},
        {"pd_count", c.pd_count}}},
      {"sweep",
       {{"snr_db", c.sweep.snr_db},
        {"pd_counts", c.sweep.pd_counts},
        {"observations", obs},
        {"steps", c.sweep.steps},
        {"snr_fixed_db", c.sweep.snr_fixed_db},
        {"lb_oversample", c.sweep.lb_oversample}}},
      {"trials", c.trials},
      {"seed", c.seed},
      {"threads", c.threads},
      {"output_dir", c.output_dir}};
  if (c.guard) doc["features"] = {{"guard", *c.guard}};
  return doc;
}

}  // namespace vlcpos
