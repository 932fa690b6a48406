// SPDX-License-Identifier: Apache-2.0
//
// Positioning accuracy: Monte Carlo RMS error, the two-nearest-centers
// lower bound, parameter sweeps and contour export.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vlcpos/digest.hpp"
#include "vlcpos/errors.hpp"
#include "vlcpos/estimator.hpp"
#include "vlcpos/fingerprint_db.hpp"
#include "vlcpos/parallel.hpp"

namespace vlcpos {

/// Gaussian tail probability Q(x) = P(N(0,1) > x).
inline double q_function(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

/// RMS distance from a uniform point in a square cell of side `step` to the cell center.
inline double quantization_floor(double step) { return step / std::sqrt(6.0); }

/// User positions with their noiseless fingerprints (row-major, dims per row).
struct SampleSet {
  std::vector<Vec2> positions;
  std::vector<double> features;
  std::size_t dims{0};

  [[nodiscard]] std::size_t size() const { return positions.size(); }
  [[nodiscard]] std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * dims, dims);
  }
};

/// Monte Carlo trials: sampled positions plus one unit-normal draw per
/// feature, so every noise level reuses the same random numbers.
struct TrialSet {
  SampleSet samples;
  std::vector<double> unit_noise;

  [[nodiscard]] std::size_t size() const { return samples.size(); }
  [[nodiscard]] std::span<const double> noise_row(std::size_t i) const {
    return std::span<const double>(unit_noise).subspan(i * samples.dims, samples.dims);
  }
};

inline SampleSet select_pds(const SampleSet& s, std::span<const std::size_t> pds) {
  SampleSet out;
  out.positions = s.positions;
  out.dims = pds.size() * kFeaturesPerPd;
  out.features.reserve(s.size() * out.dims);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto r = s.row(i);
    for (const std::size_t p : pds)
      for (std::size_t f = 0; f < kFeaturesPerPd; ++f) out.features.push_back(r[p * kFeaturesPerPd + f]);
  }
  return out;
}

inline TrialSet select_pds(const TrialSet& t, std::span<const std::size_t> pds) {
  TrialSet out;
  out.samples = select_pds(t.samples, pds);
  out.unit_noise.reserve(t.size() * out.samples.dims);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto r = t.noise_row(i);
    for (const std::size_t p : pds)
      for (std::size_t f = 0; f < kFeaturesPerPd; ++f) out.unit_noise.push_back(r[p * kFeaturesPerPd + f]);
  }
  return out;
}

/// Indices 0..count-1: the first `count` PDs of the scene.
inline std::vector<std::size_t> first_pds(std::size_t count) {
  std::vector<std::size_t> v(count);
  for (std::size_t i = 0; i < count; ++i) v[i] = i;
  return v;
}

inline SampleSet sample_features(const ChannelModel& model, std::vector<Vec2> positions,
                                 double guard, unsigned threads = 0) {
  SampleSet s;
  s.dims = kFeaturesPerPd * model.pd_count();
  s.features.assign(positions.size() * s.dims, 0.0);
  s.positions = std::move(positions);
  parallel_for(s.size(), threads, [&](std::size_t i) {
    const std::vector<double> f = fingerprint_vector(model, s.positions[i], guard);
    std::copy(f.begin(), f.end(), s.features.begin() + static_cast<std::ptrdiff_t>(i * s.dims));
  });
  return s;
}

enum class PositionSampling { kUniform, kAnchors };

/// Trial j draws its position and noise from stream task_seed(seed, j).
/// kUniform samples the rectangle [lo, hi]; kAnchors picks grid anchors.
inline TrialSet make_trials(const ChannelModel& model, const GridSpec& grid, Vec2 lo, Vec2 hi,
                            std::size_t n, std::uint64_t seed, double guard,
                            PositionSampling sampling = PositionSampling::kUniform,
                            unsigned threads = 0) {
  if (n < 1) throw ConfigError("n_trials must be >= 1");
  const std::size_t dims = kFeaturesPerPd * model.pd_count();
  std::vector<Vec2> positions(n);
  TrialSet t;
  t.unit_noise.resize(n * dims);
  for (std::size_t j = 0; j < n; ++j) {
    std::mt19937_64 rng(task_seed(seed, j));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (sampling == PositionSampling::kUniform) {
      const double a = u(rng);
      const double b = u(rng);
      positions[j] = {lo.x + a * (hi.x - lo.x), lo.y + b * (hi.y - lo.y)};
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, grid.size() - 1);
      positions[j] = grid.point(pick(rng));
    }
    std::normal_distribution<double> z(0.0, 1.0);
    for (std::size_t d = 0; d < dims; ++d) t.unit_noise[j * dims + d] = z(rng);
  }
  t.samples = sample_features(model, std::move(positions), guard, threads);
  return t;
}

struct ErrorReport {
  double rms_m{0.0};
  double std_error_m{0.0};  // delta-method standard error of rms_m
  std::size_t n_trials{0};
  double p50_m{0.0};
  double p90_m{0.0};
  double p99_m{0.0};
  double max_m{0.0};
  std::string config_digest;
};

namespace detail {

inline double quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline bool inside(Vec2 p, Vec2 lo, Vec2 hi) {
  return p.x >= lo.x && p.y >= lo.y && p.x <= hi.x && p.y <= hi.y;
}

}  // namespace detail

/// RMS of |theta - theta_hat| over the trials lying inside the database
/// footprint: observation = noiseless features + noise, then classify.
inline ErrorReport evaluate_trials(const TrialSet& trials, const FingerprintDatabase& db,
                                   const NoiseModel& noise, ObservationSet set,
                                   Metric metric = Metric::kWhitened, unsigned threads = 0) {
  validate(noise);
  if (trials.samples.dims != db.dims())
    throw DimensionError("trial features do not match the database PDs");
  const CovarianceModel cov = CovarianceModel::from_noise(noise, db.pd_count());
  const std::vector<double> weights = distance_weights(cov, metric, set);
  const double s = std::sqrt(noise.sigma2);
  const double s_tau = std::sqrt(noise.sigma_tau2());
  const Vec2 lo = db.grid.origin;
  const Vec2 hi = db.grid.extent();

  std::vector<std::size_t> used;
  for (std::size_t j = 0; j < trials.size(); ++j)
    if (detail::inside(trials.samples.positions[j], lo, hi)) used.push_back(j);
  if (used.empty()) throw ConfigError("no trial falls inside the grid footprint");

  std::vector<double> err2(used.size());
  parallel_for(used.size(), threads, [&](std::size_t u) {
    const std::size_t j = used[u];
    std::vector<double> obs(trials.samples.row(j).begin(), trials.samples.row(j).end());
    const auto z = trials.noise_row(j);
    for (std::size_t d = 0; d < obs.size(); ++d) {
      if (std::isnan(obs[d])) continue;
      obs[d] += (d % kFeaturesPerPd == kDelaySlot ? s_tau : s) * z[d];
    }
    const Estimate est = classify_weighted(obs, db, weights);
    err2[u] = squared_norm(trials.samples.positions[j] - est.position);
  });

  ErrorReport r;
  r.n_trials = used.size();
  const auto n = static_cast<double>(used.size());
  const double mean = pairwise_sum(err2) / n;
  r.rms_m = std::sqrt(mean);
  std::vector<double> dev(err2.size());
  for (std::size_t i = 0; i < err2.size(); ++i) dev[i] = (err2[i] - mean) * (err2[i] - mean);
  const double var = used.size() > 1 ? pairwise_sum(dev) / (n - 1.0) : 0.0;
  r.std_error_m = r.rms_m > 0.0 ? std::sqrt(var / n) / (2.0 * r.rms_m) : 0.0;
  std::vector<double> e(err2.size());
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = std::sqrt(err2[i]);
  std::sort(e.begin(), e.end());
  r.p50_m = detail::quantile(e, 0.5);
  r.p90_m = detail::quantile(e, 0.9);
  r.p99_m = detail::quantile(e, 0.99);
  r.max_m = e.back();
  r.config_digest = to_hex(fnv1a(to_hex(db.scene_digest()) + json_io::to_json(db.grid).dump() +
                                 std::to_string(noise.sigma2) + "/" + std::to_string(noise.beta2) +
                                 to_string(set) + to_string(metric) +
                                 std::to_string(trials.size())));
  return r;
}

/// Monte Carlo RMS error with user positions uniform over the anchor footprint.
inline ErrorReport monte_carlo_rms(const ChannelModel& model, const FingerprintDatabase& db,
                                   const NoiseModel& noise, std::size_t n_trials,
                                   std::uint64_t seed, ObservationSet set,
                                   Metric metric = Metric::kWhitened,
                                   PositionSampling sampling = PositionSampling::kUniform,
                                   unsigned threads = 0) {
  if (!(model.scene() == db.scene)) throw ConfigError("database was built for a different scene");
  const TrialSet trials = make_trials(model, db.grid, db.grid.origin, db.grid.extent(), n_trials,
                                      seed, db.guard, sampling, threads);
  ErrorReport r = evaluate_trials(trials, db, noise, set, metric, threads);
  r.config_digest = to_hex(fnv1a(r.config_digest + "/" + std::to_string(seed)));
  return r;
}

struct LowerBoundReport {
  double rms_lb_m{0.0};
  std::vector<double> boundary_distances;  // whitened distance to the i/i' bisector, per sample
  std::size_t ties{0};                     // samples whose two nearest centers coincide
};

/// Midpoints of a (factor x factor) subdivision of every grid cell: a
/// deterministic uniform sample of the anchor footprint.
inline std::vector<Vec2> oversampled_positions(const GridSpec& grid, std::size_t factor) {
  if (factor < 1) throw ConfigError("oversampling factor must be >= 1");
  auto axis = [&](double origin, std::size_t n) {
    std::vector<double> v;
    if (n == 1) return std::vector<double>{origin};
    const std::size_t m = (n - 1) * factor;
    const double h = grid.step / static_cast<double>(factor);
    for (std::size_t i = 0; i < m; ++i) v.push_back(origin + (static_cast<double>(i) + 0.5) * h);
    return v;
  };
  std::vector<Vec2> out;
  for (const double x : axis(grid.origin.x, grid.n_x))
    for (const double y : axis(grid.origin.y, grid.n_y)) out.push_back({x, y});
  return out;
}

/// Two-nearest-centers bound: for each sample the wrong-center probability
/// is Q(sqrt(L' Sigma^-1 L / 2)) with L the offset to the bisector of the
/// two feature-space centers nearest to the noiseless fingerprint.
inline LowerBoundReport lower_bound_rms(const FingerprintDatabase& db, const NoiseModel& noise,
                                        const SampleSet& samples, ObservationSet set,
                                        unsigned threads = 0) {
  validate(noise);
  if (samples.size() == 0) throw ConfigError("lower bound needs at least one sample position");
  if (samples.dims != db.dims()) throw DimensionError("sample features do not match the database PDs");
  const CovarianceModel cov = CovarianceModel::from_noise(noise, db.pd_count());
  const std::vector<double> w = distance_weights(cov, Metric::kWhitened, set);

  LowerBoundReport r;
  r.boundary_distances.assign(samples.size(), 0.0);
  std::vector<double> cost(samples.size());
  std::vector<unsigned char> tie(samples.size(), 0);
  parallel_for(samples.size(), threads, [&](std::size_t s) {
    const auto f = samples.row(s);
    std::size_t i = 0, i2 = 0;
    double d_i = std::numeric_limits<double>::infinity();
    double d_i2 = d_i;
    for (std::size_t k = 0; k < db.size(); ++k) {
      const double d = weighted_distance2(f, db.entry(k), w);
      if (d < d_i) {
        d_i2 = d_i;
        i2 = i;
        d_i = d;
        i = k;
      } else if (d < d_i2) {
        d_i2 = d;
        i2 = k;
      }
    }
    const Vec2 theta = samples.positions[s];
    const double e_i = squared_norm(theta - db.grid.point(i));
    if (db.size() == 1) {
      cost[s] = e_i;
      r.boundary_distances[s] = std::numeric_limits<double>::infinity();
      return;
    }
    const double e_i2 = squared_norm(theta - db.grid.point(i2));
    const double sep = std::sqrt(weighted_distance2(db.entry(i), db.entry(i2), w));
    const double scale = std::max(std::sqrt(weighted_distance2(db.entry(i), std::vector<double>(db.dims(), 0.0), w)),
                                  std::sqrt(weighted_distance2(db.entry(i2), std::vector<double>(db.dims(), 0.0), w)));
    double wrong = 0.0;
    if (sep <= 1e-6 * scale) {
      tie[s] = 1;
      wrong = 0.5;
    } else {
      const double boundary = (d_i2 - d_i) / (2.0 * sep);
      r.boundary_distances[s] = boundary;
      wrong = cov.noise_free ? 0.0 : q_function(std::sqrt(boundary * boundary / 2.0));
    }
    cost[s] = e_i * (1.0 - wrong) + e_i2 * wrong;
  });
  for (const unsigned char t : tie) r.ties += t;
  r.rms_lb_m = std::sqrt(pairwise_sum(cost) / static_cast<double>(samples.size()));
  return r;
}

struct LinearFit {
  double slope{0.0};
  double intercept{0.0};
  double r2{0.0};
};

inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DimensionError("linear fit needs >= 2 paired points");
  const auto n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxx > 0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

/// Room-average LOS peak power of PD 0 over the database anchors; the SNR reference.
inline double mean_los_power(const FingerprintDatabase& db) {
  std::vector<double> v(db.size());
  for (std::size_t k = 0; k < db.size(); ++k) v[k] = db.entry(k)[kLosSlot];
  return pairwise_sum(v) / static_cast<double>(v.size());
}

struct SweepOptions {
  std::size_t n_trials{20000};
  std::uint64_t seed{0};
  Metric metric{Metric::kWhitened};
  std::size_t lb_oversample{4};
  bool lower_bound{true};
  unsigned threads{0};
};

struct SnrSweepRow {
  double snr_db{0.0};
  double sigma2{0.0};
  std::size_t pd_count{0};
  ObservationSet observations{ObservationSet::kThree};
  ErrorReport mc;
  LowerBoundReport lb;
};

struct SnrSweep {
  double reference_power{0.0};  // W
  std::vector<SnrSweepRow> rows;

  [[nodiscard]] const SnrSweepRow& at(double snr_db, std::size_t pds, ObservationSet set) const {
    for (const SnrSweepRow& r : rows)
      if (r.snr_db == snr_db && r.pd_count == pds && r.observations == set) return r;
    throw ConfigError("no sweep cell for the requested configuration");
  }
};

/// One MC report and one LB report per (SNR, PD count, observation set).
/// PD count q uses the first q PDs of the scene; all cells share trials.
inline SnrSweep sweep_snr(const ChannelModel& model, const GridSpec& grid,
                          std::span<const double> snr_list_db, std::span<const std::size_t> pd_counts,
                          std::span<const ObservationSet> sets, double beta2, double guard,
                          const SweepOptions& opt = {}) {
  if (snr_list_db.empty() || pd_counts.empty() || sets.empty())
    throw ConfigError("sweep lists must be non-empty");
  for (const std::size_t q : pd_counts)
    if (q < 1 || q > model.pd_count()) throw ConfigError("PD count outside 1.." + std::to_string(model.pd_count()));
  const FingerprintDatabase full = build_database(model, grid, guard, opt.threads);
  const TrialSet trials = make_trials(model, grid, grid.origin, grid.extent(), opt.n_trials, opt.seed,
                                      guard, PositionSampling::kUniform, opt.threads);
  SampleSet lb_samples;
  if (opt.lower_bound)
    lb_samples = sample_features(model, oversampled_positions(grid, opt.lb_oversample), guard, opt.threads);

  SnrSweep out;
  out.reference_power = mean_los_power(full);
  for (const std::size_t q : pd_counts) {
    const std::vector<std::size_t> pds = first_pds(q);
    const FingerprintDatabase db = full.subset(pds);
    const TrialSet t = select_pds(trials, pds);
    SampleSet lbs;
    if (opt.lower_bound) lbs = select_pds(lb_samples, pds);
    for (const double snr : snr_list_db) {
      const NoiseModel noise{sigma2_for_snr(out.reference_power, snr), beta2};
      for (const ObservationSet set : sets) {
        SnrSweepRow row;
        row.snr_db = snr;
        row.sigma2 = noise.sigma2;
        row.pd_count = q;
        row.observations = set;
        row.mc = evaluate_trials(t, db, noise, set, opt.metric, opt.threads);
        if (opt.lower_bound) row.lb = lower_bound_rms(db, noise, lbs, set, opt.threads);
        out.rows.push_back(std::move(row));
      }
    }
  }
  return out;
}

struct GridSweepRow {
  double step{0.0};
  std::size_t pd_count{0};
  double sigma2{0.0};
  double quantization_floor_m{0.0};
  ErrorReport mc;
};

struct GridSweep {
  std::vector<GridSweepRow> rows;
  std::vector<std::pair<std::size_t, LinearFit>> fits;  // RMS vs step, per PD count

  [[nodiscard]] const LinearFit& fit(std::size_t pds) const {
    for (const auto& [q, f] : fits)
      if (q == pds) return f;
    throw ConfigError("no fit for the requested PD count");
  }
};

/// MC RMS per (grid step, PD count) at a fixed SNR, with centered grids.
/// Trials are drawn once over the union of all footprints; each step keeps
/// the trials inside its own footprint, which stay uniform there.
inline GridSweep sweep_grid_step(const ChannelModel& model, std::span<const double> steps,
                                 std::span<const std::size_t> pd_counts, double snr_db, double beta2,
                                 double guard, ObservationSet set = ObservationSet::kThree,
                                 const SweepOptions& opt = {}) {
  if (steps.empty() || pd_counts.empty()) throw ConfigError("sweep lists must be non-empty");
  std::vector<GridSpec> grids;
  Vec2 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  Vec2 hi{-lo.x, -lo.y};
  for (const double s : steps) {
    if (!(s > 0.0)) throw ConfigError("grid steps must be > 0");
    grids.push_back(centered_grid(model.scene(), s));
    lo = {std::min(lo.x, grids.back().origin.x), std::min(lo.y, grids.back().origin.y)};
    hi = {std::max(hi.x, grids.back().extent().x), std::max(hi.y, grids.back().extent().y)};
  }
  const TrialSet trials = make_trials(model, grids.front(), lo, hi, opt.n_trials, opt.seed, guard,
                                      PositionSampling::kUniform, opt.threads);
  GridSweep out;
  std::vector<std::vector<double>> rms(pd_counts.size());
  for (const GridSpec& g : grids) {
    const FingerprintDatabase full = build_database(model, g, guard, opt.threads);
    const NoiseModel noise{sigma2_for_snr(mean_los_power(full), snr_db), beta2};
    for (std::size_t qi = 0; qi < pd_counts.size(); ++qi) {
      const std::vector<std::size_t> pds = first_pds(pd_counts[qi]);
      GridSweepRow row;
      row.step = g.step;
      row.pd_count = pd_counts[qi];
      row.sigma2 = noise.sigma2;
      row.quantization_floor_m = quantization_floor(g.step);
      row.mc = evaluate_trials(select_pds(trials, pds), full.subset(pds), noise, set, opt.metric,
                               opt.threads);
      rms[qi].push_back(row.mc.rms_m);
      out.rows.push_back(std::move(row));
    }
  }
  for (std::size_t qi = 0; qi < pd_counts.size(); ++qi)
    out.fits.emplace_back(pd_counts[qi], linear_fit(steps, rms[qi]));
  return out;
}

enum class ContourFeature { kPLos, kPSpp, kDelay };

struct ContourPoint {
  double x{0.0};
  double y{0.0};
  double value{0.0};  // dB re 1 W for powers, ns for the delay (NaN when absent)
};

inline std::vector<ContourPoint> export_contours(const FingerprintDatabase& db, ContourFeature feature,
                                                 std::size_t pd) {
  if (pd >= db.pd_count()) throw ConfigError("PD index out of range");
  std::vector<ContourPoint> out;
  out.reserve(db.size());
  for (std::size_t k = 0; k < db.size(); ++k) {
    const Vec2 c = db.grid.point(k);
    const auto row = db.entry(k);
    double v = 0.0;
    switch (feature) {
      case ContourFeature::kPLos: v = 10.0 * std::log10(row[pd * kFeaturesPerPd + kLosSlot]); break;
      case ContourFeature::kPSpp: v = 10.0 * std::log10(row[pd * kFeaturesPerPd + kSppSlot]); break;
      case ContourFeature::kDelay: v = row[pd * kFeaturesPerPd + kDelaySlot] * 1e9; break;
    }
    out.push_back({c.x, c.y, v});
  }
  return out;
}

}  // namespace vlcpos
