// SPDX-License-Identifier: Apache-2.0
//
// Noisy observations of the concatenated fingerprint and minimum-distance
// (maximum-likelihood under diagonal Gaussian noise) anchor classification.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vlcpos/errors.hpp"
#include "vlcpos/fingerprint_db.hpp"
#include "vlcpos/parallel.hpp"

namespace vlcpos {

/// Amplitude noise sigma^2 (W^2) on both power peaks and the peak-slope
/// constant beta^2 that turns it into delay jitter.
struct NoiseModel {
  double sigma2{0.0};
  double beta2{30.0};

  /// sigma_tau^2 = sigma^2 / beta^2, in s^2 with the conversion constant fixed to 1.
  [[nodiscard]] double sigma_tau2() const { return sigma2 / beta2; }

  bool operator==(const NoiseModel&) const = default;
};

inline void validate(const NoiseModel& n) {
  if (!(n.sigma2 >= 0.0) || !std::isfinite(n.sigma2)) throw ConfigError("sigma2 must be >= 0");
  if (!(n.beta2 > 0.0) || !std::isfinite(n.beta2)) throw ConfigError("beta2 must be > 0");
}

inline double jitter_variance(const NoiseModel& n) {
  validate(n);
  return n.sigma_tau2();
}

/// sigma^2 giving 10 log10(reference_power^2 / sigma^2) = snr_db.
inline double sigma2_for_snr(double reference_power, double snr_db) {
  return reference_power * reference_power * std::pow(10.0, -snr_db / 10.0);
}

/// Which features enter the distance: both powers only, or powers plus delay.
enum class ObservationSet { kTwo, kThree };
enum class Metric { kWhitened, kEuclidean };

inline std::string to_string(ObservationSet s) { return s == ObservationSet::kTwo ? "two_obs" : "three_obs"; }
inline std::string to_string(Metric m) { return m == Metric::kWhitened ? "whitened" : "euclidean"; }

/// Noisy (v1, v2, v3) per PD, concatenated in database PD order.
struct ObservationVector {
  std::vector<double> values;
};

/// Diagonal of the 3Q x 3Q noise covariance: (sigma^2, sigma^2, sigma_tau^2) per PD.
struct CovarianceModel {
  std::vector<double> diagonal;

  static CovarianceModel from_noise(const NoiseModel& n, std::size_t pd_count) {
    validate(n);
    CovarianceModel c;
    for (std::size_t p = 0; p < pd_count; ++p) {
      c.diagonal.push_back(n.sigma2);
      c.diagonal.push_back(n.sigma2);
      c.diagonal.push_back(n.sigma_tau2());
    }
    // Noise-free limit: keep the (1, 1, 1/beta^2) shape so whitening stays defined.
    if (n.sigma2 == 0.0) {
      for (std::size_t i = 0; i < c.diagonal.size(); ++i)
        c.diagonal[i] = i % kFeaturesPerPd == kDelaySlot ? 1.0 / n.beta2 : 1.0;
      c.noise_free = true;
    }
    return c;
  }

  static CovarianceModel from_diagonal(std::vector<double> d) {
    for (const double v : d)
      if (!(v > 0.0)) throw ConfigError("covariance diagonal entries must be > 0");
    CovarianceModel c;
    c.diagonal = std::move(d);
    return c;
  }

  /// True when built from sigma^2 = 0; diagonal then only carries the shape.
  bool noise_free{false};
};

/// Per-coordinate weights of the squared distance; zero drops a coordinate.
inline std::vector<double> distance_weights(const CovarianceModel& cov, Metric metric,
                                            ObservationSet set) {
  std::vector<double> w(cov.diagonal.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (set == ObservationSet::kTwo && i % kFeaturesPerPd == kDelaySlot) continue;
    w[i] = metric == Metric::kWhitened ? 1.0 / cov.diagonal[i] : 1.0;
  }
  return w;
}

/// Weighted squared distance; delay coordinates absent on either side are skipped.
inline double weighted_distance2(std::span<const double> a, std::span<const double> b,
                                 std::span<const double> w) {
  double sum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] == 0.0) continue;
    const double d = a[i] - b[i];
    if (std::isnan(d)) continue;
    sum += w[i] * d * d;
  }
  return sum;
}

/// Adds independent N(0, sigma^2), N(0, sigma^2), N(0, sigma_tau^2) per PD.
/// Absent delays stay absent.
template <typename Rng>
void add_observation_noise(std::span<double> features, const NoiseModel& noise, Rng& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  const double s = std::sqrt(noise.sigma2);
  const double s_tau = std::sqrt(noise.sigma_tau2());
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double z = unit(rng);
    if (std::isnan(features[i])) continue;
    features[i] += (i % kFeaturesPerPd == kDelaySlot ? s_tau : s) * z;
  }
}

inline ObservationVector synthesize_observation(const ChannelModel& model, Vec2 true_pos,
                                                const NoiseModel& noise, std::uint64_t seed,
                                                double guard) {
  validate(noise);
  const Vec3 at{true_pos.x, true_pos.y, model.scene().transmitter_height};
  if (!(at.x > 0.0 && at.y > 0.0 && at.x < model.scene().room_size.x &&
        at.y < model.scene().room_size.y))
    throw GeometryError("true position lies outside the room footprint");
  ObservationVector obs{fingerprint_vector(model, true_pos, guard)};
  if (noise.sigma2 > 0.0) {
    std::mt19937_64 rng(mix64(seed));
    add_observation_noise(std::span<double>(obs.values), noise, rng);
  }
  return obs;
}

struct Estimate {
  std::size_t anchor{0};
  Vec2 position;
  double distance2{0.0};
};

/// Nearest anchor under precomputed weights; ties keep the lowest index.
inline Estimate classify_weighted(std::span<const double> obs, const FingerprintDatabase& db,
                                  std::span<const double> weights) {
  if (obs.size() != db.dims() || weights.size() != db.dims())
    throw DimensionError("observation has " + std::to_string(obs.size()) +
                         " values, database expects " + std::to_string(db.dims()));
  Estimate best;
  best.distance2 = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < db.size(); ++k) {
    const double d2 = weighted_distance2(obs, db.entry(k), weights);
    if (d2 < best.distance2) {
      best.distance2 = d2;
      best.anchor = k;
    }
  }
  best.position = db.grid.point(best.anchor);
  return best;
}

inline Estimate classify(const ObservationVector& obs, const FingerprintDatabase& db,
                         const CovarianceModel& cov, Metric metric = Metric::kWhitened,
                         ObservationSet set = ObservationSet::kThree) {
  if (cov.diagonal.size() != db.dims())
    throw DimensionError("covariance has " + std::to_string(cov.diagonal.size()) +
                         " entries, database expects " + std::to_string(db.dims()));
  const std::vector<double> w = distance_weights(cov, metric, set);
  return classify_weighted(obs.values, db, w);
}

/// Timing statistics of the sub-bin peak detector under white amplitude noise.
struct PeakJitterReport {
  double beta{0.0};               // W/s^2, slope of v' at the noiseless crossing
  double sigma2{0.0};             // W^2 injected per bin
  double empirical_variance{0.0}; // s^2
  /// sigma^2 / beta^2 with time measured in sampling intervals, reported in s^2.
  double predicted_variance{0.0};
  std::size_t trials{0};

  [[nodiscard]] double ratio() const { return empirical_variance / predicted_variance; }
};

/// Adds N(0, sigma^2) to every bin of `ir`, re-locates the peak nearest
/// `peak_time` and compares the spread of the detected time with the
/// linearized prediction.
inline PeakJitterReport measure_peak_jitter(const ImpulseResponse& ir, double peak_time,
                                            double sigma2, std::size_t trials, std::uint64_t seed) {
  if (trials < 2) throw ConfigError("peak jitter needs at least two trials");
  PeakJitterReport r;
  r.beta = estimate_beta(ir, peak_time);
  r.sigma2 = sigma2;
  r.trials = trials;
  const double nominal = locate_peak(ir, peak_time);
  const double dt = ir.bin_width;
  const double beta_per_sample = r.beta * dt * dt;
  r.predicted_variance = sigma2 / (beta_per_sample * beta_per_sample) * dt * dt;

  std::vector<double> offsets(trials);
  const double sigma = std::sqrt(sigma2);
  for (std::size_t t = 0; t < trials; ++t) {
    std::mt19937_64 rng(task_seed(seed, t));
    std::normal_distribution<double> unit(0.0, 1.0);
    ImpulseResponse noisy = ir;
    for (double& v : noisy.power) v += sigma * unit(rng);
    offsets[t] = locate_peak(noisy, nominal) - nominal;
  }
  const double mean = pairwise_sum(offsets) / static_cast<double>(trials);
  for (double& o : offsets) o = (o - mean) * (o - mean);
  r.empirical_variance = pairwise_sum(offsets) / static_cast<double>(trials - 1);
  return r;
}

}  // namespace vlcpos
