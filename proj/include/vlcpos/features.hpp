// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <optional>

#include "vlcpos/channel.hpp"
#include "vlcpos/errors.hpp"

namespace vlcpos {

/// Per-PD feature triple: LOS peak, second power peak and their arrival gap.
struct Fingerprint {
  double p_los{0.0};                // W
  double p_spp{0.0};                // W, 0 when no diffuse peak was found
  std::optional<double> delta_tau;  // s, absent together with the SPP

  bool operator==(const Fingerprint&) const = default;
};

/// Bins of the two detected peaks.
struct PeakBins {
  std::size_t los{0};
  std::optional<std::size_t> spp;
};

/// Default exclusion window after the LOS bin. One bin is enough for an
/// ideal delta-shaped LOS arrival; anything wider clips the diffuse onset
/// for users standing close to a wall.
inline double default_guard(const RoomScene& scene) { return scene.bin_width; }

/// LOS = global maximum; SPP = maximum strictly later than t_los + guard.
/// Ties resolve to the earliest bin.
inline PeakBins find_peaks(const ImpulseResponse& ir, double guard) {
  if (!(guard >= ir.bin_width * (1.0 - 1e-9)))
    throw ConfigError("guard interval must be at least one bin wide");
  PeakBins peaks;
  double best = 0.0;
  for (std::size_t i = 0; i < ir.size(); ++i) {
    if (ir.power[i] > best) {
      best = ir.power[i];
      peaks.los = i;
    }
  }
  if (!(best > 0.0)) throw SignalError("impulse response has no positive bin");
  const auto skip = static_cast<std::size_t>(std::floor(guard / ir.bin_width + 1e-9));
  double spp = 0.0;
  for (std::size_t i = peaks.los + skip + 1; i < ir.size(); ++i) {
    if (ir.power[i] > spp) {
      spp = ir.power[i];
      peaks.spp = i;
    }
  }
  return peaks;
}

inline Fingerprint extract_fingerprint(const ImpulseResponse& ir, double guard) {
  const PeakBins peaks = find_peaks(ir, guard);
  Fingerprint fp;
  fp.p_los = ir.power[peaks.los];
  if (peaks.spp) {
    fp.p_spp = ir.power[*peaks.spp];
    fp.delta_tau = static_cast<double>(*peaks.spp - peaks.los) * ir.bin_width;
  }
  return fp;
}

namespace detail {

// Forward difference v[i+1] - v[i], located half a bin after sample i.
inline double step(const ImpulseResponse& ir, std::size_t i) { return ir.power[i + 1] - ir.power[i]; }

inline std::size_t nearest_bin(const ImpulseResponse& ir, double t) {
  const double f = std::round((t - ir.t0) / ir.bin_width);
  if (f < 0.0 || f >= static_cast<double>(ir.size()))
    throw SignalError("peak time lies outside the response");
  return static_cast<std::size_t>(f);
}

// Local maximum j (d[j-1] > 0 >= d[j]) of the forward-difference
// derivative closest to `center`; earlier candidates win ties.
inline std::size_t nearest_crossing(const ImpulseResponse& ir, std::size_t center) {
  const std::size_t n = ir.size();
  if (center == 0 || center + 1 >= n)
    throw SignalError("peak lies at the sequence boundary; not enough support for a slope");
  auto is_crossing = [&](std::size_t j) {
    return j >= 1 && j + 1 < n && step(ir, j - 1) > 0.0 && step(ir, j) <= 0.0;
  };
  for (std::size_t r = 0; r < n; ++r) {
    if (r <= center && is_crossing(center - r)) return center - r;
    if (is_crossing(center + r)) return center + r;
  }
  throw SignalError("no derivative zero crossing near the peak (flat response)");
}

}  // namespace detail

/// Slope beta of the sampled derivative v'(t) across its zero crossing
/// nearest `peak_time` (W/s^2; negative at a maximum).
///
/// v' is the forward difference (v[i+1] - v[i]) / dt, so a pulse sampled
/// as (0, A, 0) with spacing w gives exactly -2A/w^2.
inline double estimate_beta(const ImpulseResponse& ir, double peak_time) {
  const std::size_t j = detail::nearest_crossing(ir, detail::nearest_bin(ir, peak_time));
  const double dt = ir.bin_width;
  const double beta = (detail::step(ir, j) - detail::step(ir, j - 1)) / (dt * dt);
  if (beta == 0.0) throw SignalError("zero derivative slope at the peak");
  return beta;
}

/// Sub-bin peak time: linear interpolation of the derivative zero crossing
/// nearest `near_time`.
inline double locate_peak(const ImpulseResponse& ir, double near_time) {
  const std::size_t j = detail::nearest_crossing(ir, detail::nearest_bin(ir, near_time));
  const double before = detail::step(ir, j - 1);
  const double after = detail::step(ir, j);
  const double frac = before / (before - after);
  return ir.t0 + (static_cast<double>(j) - 0.5 + frac) * ir.bin_width;
}

}  // namespace vlcpos
