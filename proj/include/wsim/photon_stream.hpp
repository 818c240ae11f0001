#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "wsim/fitting.hpp"
#include "wsim/kinetics.hpp"

// Kinetic Monte Carlo (Gillespie) simulation of the emitter producing detector
// time-tag streams: exact exponential waiting times over the optical cycle,
// detection thinning, beamsplitter routing, Poisson background, Gaussian
// timing jitter, per-detector dead time, dark-state blinking and permanent
// photobleaching.  Pulsed mode builds TCSPC-style decay histograms.

namespace wsim {

struct TimeTag {
  std::int64_t t_ps = 0;          ///< picoseconds since stream start
  std::uint8_t channel = 0;       ///< detector id, 0 or 1
  std::uint8_t flags = 0;
  std::uint16_t pol_centideg = 0; ///< polarization tag, hundredths of a degree

  friend bool operator<(const TimeTag& a, const TimeTag& b) {
    return a.t_ps != b.t_ps ? a.t_ps < b.t_ps : a.channel < b.channel;
  }
  friend bool operator==(const TimeTag& a, const TimeTag& b) = default;
};

inline constexpr std::uint8_t kTagHasPol = 0x01;

struct TimeTagStream {
  std::vector<TimeTag> tags;  ///< strictly sorted by (t, channel)
  double duration_s = 0.0;
  std::uint64_t seed = 0;
  bool truncated = false;     ///< photobleached before the requested duration
  double bleach_time_s = -1.0;

  double mean_rate_cps() const {
    return duration_s > 0 ? static_cast<double>(tags.size()) / duration_s : 0.0;
  }
};

struct StreamConfig {
  ThreeLevelRates rates;
  PowerModel power_model;
  double duration_s = 1.0;
  double background_cps = 0.0;      ///< detected counts/s, split over channels
  double jitter_sigma_ps = 0.0;     ///< Gaussian instrument response
  std::int64_t dead_time_ps = 0;    ///< per detector, non-paralyzable
  double splitter_ratio = 0.5;      ///< fraction routed to channel 0
  double dark_rate = 0.0;           ///< excited -> dark entry, 1/s
  double dark_rate_per_uW = 0.0;    ///< power-proportional dark entry
  double dark_recovery = 0.0;       ///< dark -> ground, 1/s
  double bleach_rate = 0.0;         ///< 1/s above the power threshold, else 0
  double bleach_power_threshold_uW = 500.0;
  double power_uW = 0.0;            ///< operating power (bleach gate, dark scaling)
  std::optional<double> pol_angle_deg;  ///< tag emitter photons with this angle
  std::uint64_t seed = 0;

  void validate() const;
};

/// Full CW trajectory -> sorted, dead-time-filtered detector tags.
TimeTagStream simulate_stream(const StreamConfig& config);

/// Merge two tag streams (re-sorted, exact duplicates dropped).
TimeTagStream merge_streams(const TimeTagStream& a, const TimeTagStream& b);

std::vector<TimeTag> channel_tags(const TimeTagStream& stream, int channel);

struct DecayHistogram {
  std::int64_t bin_width_ps = 100;
  std::int64_t period_ps = 0;
  std::vector<std::int64_t> counts;
  std::int64_t total = 0;

  std::vector<double> centers_ns() const;
};

/// Pulsed excitation: per pulse the emitter is excited with pickup
/// probability, then relaxes with exact exponential delays; detected photon
/// delays are folded into the sync period.  Requires a period of at least
/// three excited-state lifetimes.
DecayHistogram simulate_pulsed(const StreamConfig& config, double pulse_period_ns,
                               double pickup_prob, std::int64_t bin_width_ps = 100);

/// Raw detected delays (ns, unfolded precision preserved by folding once),
/// without jitter or background when those are disabled in the config.
std::vector<double> pulsed_delays(const StreamConfig& config,
                                  double pulse_period_ns, double pickup_prob);

struct SaturationPoint {
  double power_uW = 0.0;
  double rate_cps = 0.0;
  std::int64_t counts = 0;
  double dwell_s = 0.0;
};

/// Mean detected rate versus excitation power; pump = sigma * P per point.
std::vector<SaturationPoint> saturation_series(const StreamConfig& base,
                                               std::span<const double> powers_uW,
                                               double dwell_s);

struct TimeTrace {
  double bin_s = 0.0;
  std::vector<std::int64_t> counts;
};

TimeTrace timetrace(const TimeTagStream& stream, double bin_s);

struct LifetimeFit {
  double tau_ns = 0.0;
  double tau_err_ns = 0.0;
  double amplitude = 0.0;
  double background = 0.0;
  double reduced_chi2 = 0.0;
  FitStatus status = FitStatus::invalid_data;
  bool ok() const { return status == FitStatus::converged; }
};

/// Single-exponential fit of a decay histogram.  The fit window defaults to
/// [peak + 2 bins, 0.95 * period].
LifetimeFit fit_lifetime(const DecayHistogram& hist, double fit_start_ns = -1.0,
                         double fit_stop_ns = -1.0);

struct SaturationFit {
  double i_sat_cps = 0.0, i_sat_err = 0.0;
  double p_sat_uW = 0.0, p_sat_err = 0.0;
  double reduced_chi2 = 0.0;
  double chi2 = 0.0;
  FitStatus status = FitStatus::invalid_data;
  bool ok() const { return status == FitStatus::converged; }
};

SaturationFit fit_saturation(std::span<const SaturationPoint> points);

}  // namespace wsim
