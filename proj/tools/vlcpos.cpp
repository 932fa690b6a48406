// SPDX-License-Identifier: Apache-2.0
//
// vlcpos: build fingerprint databases, run Monte Carlo accuracy studies and
// export plot-ready tables.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime error or
// failed invariant check.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vlcpos/vlcpos.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vlcpos;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

/// Raised for failed --check invariants.
struct CheckFailure : Error {
  using Error::Error;
};

struct Options {
  std::string config_path;
  std::string db_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<unsigned> threads;
  std::optional<double> sigma2;
  std::string snr;
  std::string pds;
  std::string obs;
  std::string steps;
  std::optional<double> snr_fixed;
  std::string feature{"p_los"};
  std::size_t pd{0};
  bool check{false};
};

// ---- flag parsing ---------------------------------------------------------

std::vector<double> parse_numbers(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty()) throw ConfigError(flag + ": '" + s + "' is not a number");
    return v;
  };
  // "a:b:c" is the inclusive range a, a+c, ..., b.
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw ConfigError(flag + ": range must be start:stop:step");
    const double a = number(parts[0]), b = number(parts[1]), step = number(parts[2]);
    if (!(step > 0.0) || b < a) throw ConfigError(flag + ": range needs step > 0 and stop >= start");
    const auto n = static_cast<long>(std::floor((b - a) / step + 1e-9));
    for (long i = 0; i <= n; ++i) out.push_back(a + static_cast<double>(i) * step);
    return out;
  }
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ',');) out.push_back(number(p));
  if (out.empty()) throw ConfigError(flag + ": empty list");
  return out;
}

std::vector<std::size_t> parse_counts(const std::string& text, const std::string& flag) {
  std::vector<std::size_t> out;
  for (const double v : parse_numbers(text, flag)) {
    if (v < 0 || v != std::floor(v)) throw ConfigError(flag + ": expected non-negative integers");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::vector<ObservationSet> parse_obs(const std::string& text) {
  std::vector<ObservationSet> out;
  for (const std::size_t v : parse_counts(text, "--obs")) {
    if (v == 2) out.push_back(ObservationSet::kTwo);
    else if (v == 3) out.push_back(ObservationSet::kThree);
    else throw ConfigError("--obs: expected 2 or 3");
  }
  return out;
}

template <typename T>
T single(const std::vector<T>& v, const std::string& flag) {
  if (v.size() != 1) throw ConfigError(flag + ": this command takes a single value");
  return v.front();
}

/// Config file (or defaults) with command-line overrides applied.
RunConfig resolve_config(const Options& o) {
  RunConfig c = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (o.trials) c.trials = *o.trials;
  if (o.threads) c.threads = *o.threads;
  if (!o.out_dir.empty()) c.output_dir = o.out_dir;
  if (o.sigma2 && !o.snr.empty()) throw ConfigError("give either --sigma2 or --snr, not both");
  if (o.sigma2) {
    c.sigma2 = *o.sigma2;
    c.snr_db.reset();
  }
  if (!o.snr.empty()) c.sweep.snr_db = parse_numbers(o.snr, "--snr");
  if (!o.pds.empty()) c.sweep.pd_counts = parse_counts(o.pds, "--pds");
  if (!o.obs.empty()) c.sweep.observations = parse_obs(o.obs);
  if (!o.steps.empty()) c.sweep.steps = parse_numbers(o.steps, "--steps");
  if (o.snr_fixed) c.sweep.snr_fixed_db = *o.snr_fixed;
  validate(c);
  return c;
}

/// Single-run view: --snr / --pds / --obs select one value each.
RunConfig single_run(RunConfig c, const Options& o) {
  if (!o.snr.empty()) {
    c.snr_db = single(c.sweep.snr_db, "--snr");
    c.sigma2.reset();
  }
  if (!o.pds.empty()) c.pd_count = single(c.sweep.pd_counts, "--pds");
  if (!o.obs.empty()) c.observations = single(c.sweep.observations, "--obs");
  validate(c);
  return c;
}

// ---- outputs --------------------------------------------------------------

fs::path output_path(const RunConfig& c, const std::string& name) {
  fs::create_directories(c.output_dir);
  return fs::path(c.output_dir) / name;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw Error(path.string() + ": write failed");
}

void write_sidecar(const RunConfig& c, const std::string& name, const std::string& command,
                   json results) {
  json doc = {{"command", command},
              {"config", to_json(c)},
              {"seed", c.seed},
              {"scene_digest", to_hex(json_io::scene_digest(c.scene))},
              {"results", std::move(results)}};
  write_text(output_path(c, name), doc.dump(2) + "\n");
}

json to_json(const ErrorReport& r) {
  return {{"rms_m", r.rms_m},        {"std_error_m", r.std_error_m}, {"n_trials", r.n_trials},
          {"p50_m", r.p50_m},        {"p90_m", r.p90_m},             {"p99_m", r.p99_m},
          {"max_m", r.max_m},        {"config_digest", r.config_digest}};
}

// ---- database -------------------------------------------------------------

/// Loads the database at `path` and refuses it when it was built for a
/// different scene, grid or guard than `c` describes.
FingerprintDatabase load_matching_db(const RunConfig& c, const Options& o, const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(path.string() + ": cannot open database");
  std::ostringstream ss;
  ss << in.rdbuf();
  FingerprintDatabase db = load_database(ss.str());
  const std::string want = to_hex(json_io::scene_digest(c.scene));
  const std::string have = to_hex(db.scene_digest());
  const bool stale = want != have || !(db.grid == c.resolved_grid()) || db.guard != c.resolved_guard();
  if (stale) {
    std::string rebuild = "vlcpos build-db";
    if (!o.config_path.empty()) rebuild += " --config " + o.config_path;
    rebuild += " --db " + path.string();
    throw Error("database " + path.string() + " is stale (scene digest " + have + ", config expects " +
                want + (want == have ? "; grid or guard differs" : "") + "); rebuild it with: " + rebuild);
  }
  return db;
}

FingerprintDatabase database_for(const RunConfig& c, const Options& o, const ChannelModel& model) {
  if (!o.db_path.empty()) return load_matching_db(c, o, o.db_path);
  return build_database(model, c.resolved_grid(), c.resolved_guard(), c.threads);
}

// ---- built-in invariant suite --------------------------------------------

void expect(bool ok, const std::string& what, std::vector<std::string>& failures) {
  std::cout << (ok ? "  ok    " : "  FAIL  ") << what << "\n";
  if (!ok) failures.push_back(what);
}

/// Fast structural checks on the configured scene; throws CheckFailure on violation.
void run_checks(const RunConfig& c) {
  std::vector<std::string> failures;
  std::cout << "invariant checks\n";
  expect(q_function(0.0) == 0.5 && std::abs(q_function(1.0) - 0.158655253931457) < 1e-12,
         "q_function reference values", failures);

  const ChannelModel model(c.scene);
  const GridSpec grid = c.resolved_grid();
  const double guard = c.resolved_guard();
  const FingerprintDatabase db = build_database(model, grid, guard, c.threads);
  const FingerprintDatabase db1 = build_database(model, grid, guard, 1);
  expect(db == db1, "database identical for 1 and N worker threads", failures);
  expect(load_database(save_database(db)) == db, "database save/load round trip", failures);

  const CovarianceModel cov = CovarianceModel::from_noise({0.0, c.beta2}, db.pd_count());
  std::size_t recovered = 0;
  for (std::size_t k = 0; k < db.size(); ++k) {
    const std::vector<double> obs(db.entry(k).begin(), db.entry(k).end());
    if (classify(ObservationVector{obs}, db, cov, c.metric, c.observations).anchor == k) ++recovered;
  }
  expect(recovered == db.size(),
         "noiseless anchor recovery " + std::to_string(recovered) + "/" + std::to_string(db.size()),
         failures);

  bool los_positive = true, delay_positive = true;
  for (std::size_t k = 0; k < db.size(); ++k) {
    const auto row = db.entry(k);
    for (std::size_t p = 0; p < db.pd_count(); ++p) {
      los_positive = los_positive && row[p * kFeaturesPerPd + kLosSlot] > 0.0;
      const double d = row[p * kFeaturesPerPd + kDelaySlot];
      delay_positive = delay_positive && (std::isnan(d) || d > 0.0);
    }
  }
  expect(los_positive, "P_LOS > 0 at every anchor", failures);
  expect(delay_positive, "delta_tau > 0 wherever an SPP exists", failures);
  expect(config_from_json(to_json(c)) == c, "config JSON round trip", failures);

  const NoiseModel noise = c.noise_for(db);
  const std::size_t n = std::min<std::size_t>(c.trials, 2000);
  const ErrorReport a = monte_carlo_rms(model, db, noise, n, c.seed, c.observations, c.metric,
                                        PositionSampling::kUniform, 1);
  const ErrorReport b = monte_carlo_rms(model, db, noise, n, c.seed, c.observations, c.metric,
                                        PositionSampling::kUniform, c.threads);
  expect(a.rms_m == b.rms_m, "Monte Carlo result independent of worker count", failures);
  const Vec2 diag = {c.scene.room_size.x, c.scene.room_size.y};
  expect(a.rms_m >= 0.0 && a.rms_m * a.rms_m <= squared_norm(diag), "RMS error within room diagonal",
         failures);

  if (!failures.empty())
    throw CheckFailure(std::to_string(failures.size()) + " invariant check(s) failed");
  std::cout << "all invariant checks passed\n";
}

// ---- commands -------------------------------------------------------------

int cmd_build_db(const Options& o) {
  const RunConfig c = resolve_config(o);
  const auto t0 = std::chrono::steady_clock::now();
  const FingerprintDatabase db = build_database(c.scene, c.resolved_grid(), c.resolved_guard(), c.threads);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const fs::path path = o.db_path.empty() ? output_path(c, "fingerprints.db.json") : fs::path(o.db_path);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_text(path, save_database(db));
  std::ofstream csv(output_path(c, "fingerprints.csv"), std::ios::binary);
  write_database_csv(csv, db);

  std::cout << "database   " << path.string() << "\n"
            << "anchors    " << db.size() << " (" << db.grid.n_x << " x " << db.grid.n_y << ", step "
            << db.grid.step << " m)\n"
            << "features   " << db.dims() << " per anchor (" << db.pd_count() << " PDs x 3)\n"
            << "scene      " << to_hex(db.scene_digest()) << "\n"
            << "built in   " << secs << " s\n";
  json ranges = json::array();
  for (std::size_t p = 0; p < db.pd_count(); ++p) {
    double lo[3], hi[3];
    std::size_t absent = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      lo[s] = std::numeric_limits<double>::infinity();
      hi[s] = -lo[s];
    }
    for (std::size_t k = 0; k < db.size(); ++k)
      for (std::size_t s = 0; s < 3; ++s) {
        const double v = db.entry(k)[p * kFeaturesPerPd + s];
        if (std::isnan(v)) {
          ++absent;
          continue;
        }
        lo[s] = std::min(lo[s], v);
        hi[s] = std::max(hi[s], v);
      }
    std::cout << "pd" << p << "        P_LOS " << lo[0] << " .. " << hi[0] << " W, P_SPP " << lo[1]
              << " .. " << hi[1] << " W, delta_tau " << lo[2] * 1e9 << " .. " << hi[2] * 1e9
              << " ns, no SPP at " << absent << " anchors\n";
    ranges.push_back({{"p_los_W", {lo[0], hi[0]}},
                      {"p_spp_W", {lo[1], hi[1]}},
                      {"delta_tau_ns", {lo[2] * 1e9, hi[2] * 1e9}},
                      {"absent_delay", absent}});
  }
  write_sidecar(c, "fingerprints.json", "build-db",
                {{"database", path.string()}, {"anchors", db.size()}, {"pd_ranges", ranges}});
  if (o.check) run_checks(c);
  return 0;
}

int cmd_simulate(const Options& o) {
  const RunConfig c = single_run(resolve_config(o), o);
  const ChannelModel model(c.scene);
  const FingerprintDatabase full = database_for(c, o, model);
  const FingerprintDatabase db = full.subset(first_pds(c.resolved_pd_count()));
  const NoiseModel noise = c.noise_for(full);
  const ErrorReport r = monte_carlo_rms(ChannelModel(db.scene), db, noise, c.trials, c.seed, c.observations,
                                        c.metric, PositionSampling::kUniform, c.threads);
  std::ofstream csv(output_path(c, "simulate.csv"), std::ios::binary);
  CsvWriter w(csv);
  w.header({"pd_count", "observations", "metric", "sigma2_W2", "beta2", "n_trials", "rms_m", "std_error_m",
            "p50_m", "p90_m", "p99_m", "max_m"});
  w.write({std::to_string(db.pd_count()), to_string(c.observations), to_string(c.metric),
           csv_number(noise.sigma2), csv_number(noise.beta2), std::to_string(r.n_trials), csv_number(r.rms_m),
           csv_number(r.std_error_m), csv_number(r.p50_m), csv_number(r.p90_m), csv_number(r.p99_m),
           csv_number(r.max_m)});
  write_sidecar(c, "simulate.json", "simulate", {{"sigma2", noise.sigma2}, {"report", to_json(r)}});
  std::cout << "d_RMS = " << r.rms_m * 100 << " cm +- " << r.std_error_m * 100 << " cm over " << r.n_trials
            << " trials (" << db.pd_count() << " PDs, " << to_string(c.observations) << ")\n";
  if (o.check) run_checks(c);
  return 0;
}

int cmd_lower_bound(const Options& o) {
  const RunConfig c = single_run(resolve_config(o), o);
  const ChannelModel model(c.scene);
  const FingerprintDatabase full = database_for(c, o, model);
  const std::vector<std::size_t> pds = first_pds(c.resolved_pd_count());
  const FingerprintDatabase db = full.subset(pds);
  const NoiseModel noise = c.noise_for(full);
  const SampleSet samples = select_pds(
      sample_features(model, oversampled_positions(db.grid, c.sweep.lb_oversample), db.guard, c.threads), pds);
  const LowerBoundReport lb = lower_bound_rms(db, noise, samples, c.observations, c.threads);

  std::ofstream csv(output_path(c, "lower_bound.csv"), std::ios::binary);
  CsvWriter w(csv);
  w.header({"x_m", "y_m", "boundary_distance"});
  for (std::size_t i = 0; i < samples.size(); ++i)
    w.write({csv_number(samples.positions[i].x), csv_number(samples.positions[i].y),
             csv_number(lb.boundary_distances[i])});
  write_sidecar(c, "lower_bound.json", "lower-bound",
                {{"sigma2", noise.sigma2},
                 {"pd_count", db.pd_count()},
                 {"observations", to_string(c.observations)},
                 {"samples", samples.size()},
                 {"rms_lb_m", lb.rms_lb_m},
                 {"ties", lb.ties}});
  std::cout << "d_RMS lower bound = " << lb.rms_lb_m * 100 << " cm over " << samples.size() << " samples ("
            << lb.ties << " with coincident nearest centers)\n";
  if (o.check) run_checks(c);
  return 0;
}

int cmd_sweep_snr(const Options& o) {
  const RunConfig c = resolve_config(o);
  const ChannelModel model(c.scene);
  SweepOptions so;
  so.n_trials = c.trials;
  so.seed = c.seed;
  so.metric = c.metric;
  so.lb_oversample = c.sweep.lb_oversample;
  so.threads = c.threads;
  const SnrSweep sw = sweep_snr(model, c.resolved_grid(), c.sweep.snr_db, c.sweep.pd_counts,
                                c.sweep.observations, c.beta2, c.resolved_guard(), so);

  std::ofstream csv(output_path(c, "sweep_snr.csv"), std::ios::binary);
  CsvWriter w(csv);
  w.header({"snr_db", "sigma2_W2", "pd_count", "observations", "n_trials", "rms_m", "std_error_m", "p50_m",
            "p90_m", "rms_lb_m", "lb_ties"});
  json rows = json::array();
  for (const SnrSweepRow& r : sw.rows) {
    w.write({csv_number(r.snr_db), csv_number(r.sigma2), std::to_string(r.pd_count), to_string(r.observations),
             std::to_string(r.mc.n_trials), csv_number(r.mc.rms_m), csv_number(r.mc.std_error_m),
             csv_number(r.mc.p50_m), csv_number(r.mc.p90_m), csv_number(r.lb.rms_lb_m),
             std::to_string(r.lb.ties)});
    rows.push_back({{"snr_db", r.snr_db},
                    {"pd_count", r.pd_count},
                    {"observations", to_string(r.observations)},
                    {"mc", to_json(r.mc)},
                    {"rms_lb_m", r.lb.rms_lb_m}});
    std::cout << "SNR " << r.snr_db << " dB  " << r.pd_count << " PD  " << to_string(r.observations)
              << "  MC " << r.mc.rms_m * 100 << " cm  LB " << r.lb.rms_lb_m * 100 << " cm\n";
  }
  write_sidecar(c, "sweep_snr.json", "sweep-snr", {{"reference_power_W", sw.reference_power}, {"rows", rows}});
  if (o.check) run_checks(c);
  return 0;
}

int cmd_sweep_grid(const Options& o) {
  RunConfig c = resolve_config(o);
  if (!o.obs.empty()) c.observations = single(c.sweep.observations, "--obs");
  const ChannelModel model(c.scene);
  SweepOptions so;
  so.n_trials = c.trials;
  so.seed = c.seed;
  so.metric = c.metric;
  so.threads = c.threads;
  const GridSweep gs = sweep_grid_step(model, c.sweep.steps, c.sweep.pd_counts, c.sweep.snr_fixed_db, c.beta2,
                                       c.resolved_guard(), c.observations, so);

  std::ofstream csv(output_path(c, "sweep_grid.csv"), std::ios::binary);
  CsvWriter w(csv);
  w.header({"step_m", "pd_count", "snr_db", "sigma2_W2", "n_trials", "rms_m", "std_error_m",
            "quantization_floor_m"});
  json rows = json::array();
  for (const GridSweepRow& r : gs.rows) {
    w.write({csv_number(r.step), std::to_string(r.pd_count), csv_number(c.sweep.snr_fixed_db),
             csv_number(r.sigma2), std::to_string(r.mc.n_trials), csv_number(r.mc.rms_m),
             csv_number(r.mc.std_error_m), csv_number(r.quantization_floor_m)});
    rows.push_back({{"step_m", r.step}, {"pd_count", r.pd_count}, {"mc", to_json(r.mc)}});
    std::cout << "step " << r.step * 100 << " cm  " << r.pd_count << " PD  MC " << r.mc.rms_m * 100
              << " cm  floor " << r.quantization_floor_m * 100 << " cm\n";
  }
  std::ofstream fit_csv(output_path(c, "sweep_grid_fit.csv"), std::ios::binary);
  CsvWriter fw(fit_csv);
  fw.header({"pd_count", "slope", "intercept_m", "r2"});
  json fits = json::array();
  for (const auto& [q, f] : gs.fits) {
    fw.write({std::to_string(q), csv_number(f.slope), csv_number(f.intercept), csv_number(f.r2)});
    fits.push_back({{"pd_count", q}, {"slope", f.slope}, {"intercept_m", f.intercept}, {"r2", f.r2}});
    std::cout << q << " PD linear fit: slope " << f.slope << ", intercept " << f.intercept * 100
              << " cm, R^2 " << f.r2 << "\n";
  }
  write_sidecar(c, "sweep_grid.json", "sweep-grid", {{"rows", rows}, {"fits", fits}});
  if (o.check) run_checks(c);
  return 0;
}

int cmd_contours(const Options& o) {
  const RunConfig c = resolve_config(o);
  const ChannelModel model(c.scene);
  const FingerprintDatabase db = database_for(c, o, model);
  ContourFeature f{};
  if (o.feature == "p_los") f = ContourFeature::kPLos;
  else if (o.feature == "p_spp") f = ContourFeature::kPSpp;
  else if (o.feature == "delta_tau") f = ContourFeature::kDelay;
  else throw ConfigError("--feature: expected p_los, p_spp or delta_tau");
  if (o.pd >= db.pd_count()) throw ConfigError("--pd: scene has " + std::to_string(db.pd_count()) + " PDs");
  const std::vector<ContourPoint> pts = export_contours(db, f, o.pd);

  const std::string name = "contours_" + o.feature + "_pd" + std::to_string(o.pd);
  std::ofstream csv(output_path(c, name + ".csv"), std::ios::binary);
  CsvWriter w(csv);
  const bool power = f != ContourFeature::kDelay;
  if (power) w.header({"x_m", "y_m", "value_dBW", "value_W"});
  else w.header({"x_m", "y_m", "value_ns"});
  for (const ContourPoint& p : pts) {
    std::vector<std::string> row{csv_number(p.x), csv_number(p.y), csv_number(p.value)};
    if (power) row.push_back(csv_number(std::pow(10.0, p.value / 10.0)));
    w.write(row);
  }
  write_sidecar(c, name + ".json", "contours",
                {{"feature", o.feature}, {"pd", o.pd}, {"points", pts.size()},
                 {"units", power ? "dB re 1 W" : "ns"}});
  std::cout << "wrote " << pts.size() << " points to " << (fs::path(c.output_dir) / (name + ".csv")).string()
            << "\n";
  if (o.check) run_checks(c);
  return 0;
}

int cmd_check(const Options& o) {
  run_checks(resolve_config(o));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uplink visible-light positioning from impulse-response fingerprints"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON run configuration (defaults apply when omitted)");
    sub->add_option("--out", o.out_dir, "Output directory (overrides output_dir)");
    sub->add_option("--seed", o.seed, "Master random seed");
    sub->add_option("--trials", o.trials, "Monte Carlo trials");
    sub->add_option("--threads", o.threads, "Worker threads (0 = all cores); results do not depend on it");
    sub->add_flag("--check", o.check, "Run the built-in invariant checks afterwards");
  };
  auto noise = [&](CLI::App* sub) {
    sub->add_option("--sigma2", o.sigma2, "Amplitude noise variance in W^2");
    sub->add_option("--snr", o.snr, "SNR in dB: a value, a list a,b,c or a range start:stop:step");
    sub->add_option("--pds", o.pds, "PD count(s); the first N PDs of the scene are used");
    sub->add_option("--obs", o.obs, "Observation set(s): 2 (powers) or 3 (powers + delay)");
  };

  CLI::App* build = app.add_subcommand("build-db", "Build and save the anchor fingerprint database");
  common(build);
  build->add_option("--db", o.db_path, "Database file (default <out>/fingerprints.db.json)");

  CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo RMS positioning error");
  common(sim);
  noise(sim);
  sim->add_option("--db", o.db_path, "Prebuilt database (built on demand otherwise)");

  CLI::App* lb = app.add_subcommand("lower-bound", "Two-nearest-centers lower bound on the RMS error");
  common(lb);
  noise(lb);
  lb->add_option("--db", o.db_path, "Prebuilt database (built on demand otherwise)");

  CLI::App* ssnr = app.add_subcommand("sweep-snr", "RMS error and lower bound vs SNR, PD count, observations");
  common(ssnr);
  noise(ssnr);

  CLI::App* sgrid = app.add_subcommand("sweep-grid", "RMS error vs grid step at a fixed SNR");
  common(sgrid);
  sgrid->add_option("--pds", o.pds, "PD counts");
  sgrid->add_option("--obs", o.obs, "Observation set (2 or 3)");
  sgrid->add_option("--steps", o.steps, "Grid steps in m, list or range");
  sgrid->add_option("--snr-fixed", o.snr_fixed, "SNR in dB");

  CLI::App* sweep = app.add_subcommand("sweep", "sweep-grid when --steps/--snr-fixed is given, else sweep-snr");
  common(sweep);
  noise(sweep);
  sweep->add_option("--steps", o.steps, "Grid steps in m, list or range");
  sweep->add_option("--snr-fixed", o.snr_fixed, "SNR in dB for the grid-step sweep");

  CLI::App* cont = app.add_subcommand("contours", "Export one feature over the anchor grid");
  common(cont);
  cont->add_option("--db", o.db_path, "Prebuilt database (built on demand otherwise)");
  cont->add_option("--feature", o.feature, "p_los, p_spp or delta_tau")->capture_default_str();
  cont->add_option("--pd", o.pd, "PD index (0-based)")->capture_default_str();

  CLI::App* check = app.add_subcommand("check", "Run the built-in invariant checks");
  common(check);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*build) return cmd_build_db(o);
    if (*sim) return cmd_simulate(o);
    if (*lb) return cmd_lower_bound(o);
    if (*ssnr) return cmd_sweep_snr(o);
    if (*sgrid) return cmd_sweep_grid(o);
    if (*sweep) {
      if (!o.steps.empty() || o.snr_fixed) return cmd_sweep_grid(o);
      return cmd_sweep_snr(o);
    }
    if (*cont) return cmd_contours(o);
    if (*check) return cmd_check(o);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CheckFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
