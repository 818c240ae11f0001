#include "wsim/photon_stream.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <tuple>

#include "wsim/rng.hpp"

namespace wsim {

void StreamConfig::validate() const {
  rates.validate();
  power_model.validate();
  if (duration_s <= 0) throw std::invalid_argument("duration must be > 0");
  if (background_cps < 0 || jitter_sigma_ps < 0 || dead_time_ps < 0 ||
      dark_rate < 0 || dark_rate_per_uW < 0 || dark_recovery < 0 ||
      bleach_rate < 0 || power_uW < 0)
    throw std::invalid_argument("stream config rates must be >= 0");
  if (splitter_ratio < 0 || splitter_ratio > 1)
    throw std::invalid_argument("splitter ratio must be in [0, 1]");
  if ((dark_rate > 0 || dark_rate_per_uW > 0) && dark_recovery <= 0)
    throw std::invalid_argument("dark state needs a recovery rate (blinking, not bleaching)");
}

namespace {

constexpr double kPsPerSecond = 1e12;

struct TagBuilder {
  std::vector<TimeTag>& tags;
  std::int64_t t_max_ps;
  double jitter_sigma_ps;
  std::uint16_t pol_centideg;
  bool has_pol;

  void add(double t_s, int channel, Rng& rng, bool tag_pol) {
    double t_ps = t_s * kPsPerSecond;
    if (jitter_sigma_ps > 0) t_ps += rng.normal() * jitter_sigma_ps;
    const auto t = static_cast<std::int64_t>(std::llround(t_ps));
    if (t < 0 || t > t_max_ps) return;  // jittered outside the record window
    TimeTag tag;
    tag.t_ps = t;
    tag.channel = static_cast<std::uint8_t>(channel);
    if (tag_pol && has_pol) {
      tag.flags = kTagHasPol;
      tag.pol_centideg = pol_centideg;
    }
    tags.push_back(tag);
  }
};

enum class EmitterState { ground, excited, shelved, dark };

void finalize_tags(std::vector<TimeTag>& tags, std::int64_t dead_time_ps) {
  // Total order (flags and pol included) keeps the survivor of a collision
  // deterministic; same-picosecond same-channel clicks are indistinguishable
  // to a detector and collapse to one tag even when their origins differ.
  std::sort(tags.begin(), tags.end(), [](const TimeTag& a, const TimeTag& b) {
    return std::tie(a.t_ps, a.channel, a.flags, a.pol_centideg) <
           std::tie(b.t_ps, b.channel, b.flags, b.pol_centideg);
  });
  tags.erase(std::unique(tags.begin(), tags.end(),
                         [](const TimeTag& a, const TimeTag& b) {
                           return a.t_ps == b.t_ps && a.channel == b.channel;
                         }),
             tags.end());
  if (dead_time_ps > 0) {
    std::array<std::int64_t, 2> last = {std::numeric_limits<std::int64_t>::min(),
                                        std::numeric_limits<std::int64_t>::min()};
    std::size_t kept = 0;
    for (const TimeTag& tag : tags) {
      const int ch = tag.channel;
      if (tag.t_ps - last[ch] < dead_time_ps && last[ch] != std::numeric_limits<std::int64_t>::min())
        continue;
      last[ch] = tag.t_ps;
      tags[kept++] = tag;
    }
    tags.resize(kept);
  }
}

std::uint16_t centideg(double angle_deg) {
  double a = std::fmod(angle_deg, 360.0);
  if (a < 0) a += 360.0;
  return static_cast<std::uint16_t>(std::lround(a * 100.0));
}

}  // namespace

TimeTagStream simulate_stream(const StreamConfig& cfg) {
  cfg.validate();
  TimeTagStream stream;
  stream.duration_s = cfg.duration_s;
  stream.seed = cfg.seed;

  Rng emitter_rng(derive_seed(cfg.seed, "emitter"));
  Rng detector_rng(derive_seed(cfg.seed, "detector"));
  Rng background_rng(derive_seed(cfg.seed, "background"));
  Rng bleach_rng(derive_seed(cfg.seed, "bleach"));

  const double eta = cfg.power_model.detection_efficiency;
  const double k12 = cfg.rates.pump;
  const double k21 = cfg.rates.decay;
  const double k23 = cfg.rates.shelve;
  const double k31 = cfg.rates.deshelve;
  const double dark_in = cfg.dark_rate + cfg.dark_rate_per_uW * cfg.power_uW;

  double emitter_stop = cfg.duration_s;
  if (cfg.bleach_rate > 0 && cfg.power_uW > cfg.bleach_power_threshold_uW) {
    const double t_bleach = bleach_rng.exponential(cfg.bleach_rate);
    if (t_bleach < cfg.duration_s) {
      emitter_stop = t_bleach;
      stream.truncated = true;
      stream.bleach_time_s = t_bleach;
    }
  }

  const Populations ss = steady_state(cfg.rates);
  const double expected =
      (eta * k21 * ss.excited + cfg.background_cps) * cfg.duration_s;
  stream.tags.reserve(static_cast<std::size_t>(expected * 1.05) + 64);

  TagBuilder builder{stream.tags,
                     static_cast<std::int64_t>(std::llround(cfg.duration_s * kPsPerSecond)),
                     cfg.jitter_sigma_ps,
                     cfg.pol_angle_deg ? centideg(*cfg.pol_angle_deg) : std::uint16_t{0},
                     cfg.pol_angle_deg.has_value()};

  // Emitter trajectory: exact exponential waiting time per state.
  EmitterState state = EmitterState::ground;
  double t = 0.0;
  while (true) {
    double rate_out = 0.0;
    switch (state) {
      case EmitterState::ground: rate_out = k12; break;
      case EmitterState::excited: rate_out = k21 + k23 + dark_in; break;
      case EmitterState::shelved: rate_out = k31; break;
      case EmitterState::dark: rate_out = cfg.dark_recovery; break;
    }
    if (rate_out <= 0) break;  // parked (no pump): nothing more will happen
    t += emitter_rng.exponential(rate_out);
    if (t >= emitter_stop) break;
    switch (state) {
      case EmitterState::ground:
        state = EmitterState::excited;
        break;
      case EmitterState::excited: {
        const double u = emitter_rng.uniform() * rate_out;
        if (u < k21) {
          state = EmitterState::ground;
          if (eta >= 1.0 || detector_rng.uniform() < eta) {
            const int ch = detector_rng.uniform() < cfg.splitter_ratio ? 0 : 1;
            builder.add(t, ch, detector_rng, /*tag_pol=*/true);
          }
        } else if (u < k21 + k23) {
          state = EmitterState::shelved;
        } else {
          state = EmitterState::dark;
        }
        break;
      }
      case EmitterState::shelved:
      case EmitterState::dark:
        state = EmitterState::ground;
        break;
    }
  }

  // Uncorrelated, unpolarized background over the full duration.
  if (cfg.background_cps > 0) {
    double tb = background_rng.exponential(cfg.background_cps);
    while (tb < cfg.duration_s) {
      const int ch = background_rng.uniform() < cfg.splitter_ratio ? 0 : 1;
      builder.add(tb, ch, background_rng, /*tag_pol=*/false);
      tb += background_rng.exponential(cfg.background_cps);
    }
  }

  finalize_tags(stream.tags, cfg.dead_time_ps);
  return stream;
}

TimeTagStream merge_streams(const TimeTagStream& a, const TimeTagStream& b) {
  TimeTagStream out;
  out.duration_s = std::max(a.duration_s, b.duration_s);
  out.seed = a.seed;
  out.truncated = a.truncated || b.truncated;
  out.tags.reserve(a.tags.size() + b.tags.size());
  out.tags.insert(out.tags.end(), a.tags.begin(), a.tags.end());
  out.tags.insert(out.tags.end(), b.tags.begin(), b.tags.end());
  finalize_tags(out.tags, 0);
  return out;
}

std::vector<TimeTag> channel_tags(const TimeTagStream& stream, int channel) {
  std::vector<TimeTag> out;
  for (const TimeTag& t : stream.tags)
    if (t.channel == channel) out.push_back(t);
  return out;
}

std::vector<double> DecayHistogram::centers_ns() const {
  std::vector<double> x(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i)
    x[i] = (static_cast<double>(i) + 0.5) * static_cast<double>(bin_width_ps) * 1e-3;
  return x;
}

namespace {

// Shared pulse walk; calls sink(delay_seconds) for every detected photon.
template <typename Sink>
void run_pulsed(const StreamConfig& cfg, double pulse_period_ns,
                double pickup_prob, Sink&& sink) {
  cfg.validate();
  if (pickup_prob < 0 || pickup_prob > 1)
    throw std::invalid_argument("pickup probability must be in [0, 1]");
  const double k21 = cfg.rates.decay;
  const double k23 = cfg.rates.shelve;
  const double lifetime_ns = 1e9 / (k21 + k23);
  if (pulse_period_ns < 3.0 * lifetime_ns)
    throw std::invalid_argument(
        "pulse period must exceed several excited-state lifetimes");

  Rng rng(derive_seed(cfg.seed, "pulsed"));
  Rng det(derive_seed(cfg.seed, "pulsed-detector"));
  const double period_s = pulse_period_ns * 1e-9;
  const auto n_pulses = static_cast<std::int64_t>(cfg.duration_s / period_s);
  const double eta = cfg.power_model.detection_efficiency;
  const double p_radiative = k21 / (k21 + k23);

  double shelved_until = -1.0;
  for (std::int64_t k = 0; k < n_pulses; ++k) {
    const double t_pulse = static_cast<double>(k) * period_s;
    if (t_pulse < shelved_until) continue;  // still parked in the metastable
    if (pickup_prob < 1.0 && !rng.bernoulli(pickup_prob)) continue;
    const double delay = rng.exponential(k21 + k23);
    // At most one emission per pulse: no re-excitation within the period.
    if (rng.uniform() < p_radiative) {
      if (eta >= 1.0 || det.uniform() < eta) sink(t_pulse, delay);
    } else {
      shelved_until = t_pulse + delay + rng.exponential(cfg.rates.deshelve);
    }
  }
}

}  // namespace

DecayHistogram simulate_pulsed(const StreamConfig& cfg, double pulse_period_ns,
                               double pickup_prob, std::int64_t bin_width_ps) {
  if (bin_width_ps <= 0) throw std::invalid_argument("bin width must be > 0");
  DecayHistogram hist;
  hist.bin_width_ps = bin_width_ps;
  hist.period_ps = static_cast<std::int64_t>(std::llround(pulse_period_ns * 1e3));
  const auto n_bins =
      static_cast<std::size_t>((hist.period_ps + bin_width_ps - 1) / bin_width_ps);
  hist.counts.assign(n_bins, 0);

  Rng det(derive_seed(cfg.seed, "pulsed-jitter"));
  const auto record = [&](double /*t_pulse*/, double delay_s) {
    double d_ps = delay_s * kPsPerSecond;
    if (cfg.jitter_sigma_ps > 0) d_ps += det.normal() * cfg.jitter_sigma_ps;
    auto folded = static_cast<std::int64_t>(std::llround(d_ps)) % hist.period_ps;
    if (folded < 0) folded += hist.period_ps;
    ++hist.counts[static_cast<std::size_t>(folded / bin_width_ps)];
    ++hist.total;
  };
  run_pulsed(cfg, pulse_period_ns, pickup_prob, record);

  // Uniform background floor folded into the period.
  if (cfg.background_cps > 0) {
    Rng bg(derive_seed(cfg.seed, "pulsed-background"));
    const auto n_bg = bg.poisson(cfg.background_cps * cfg.duration_s);
    for (std::int64_t i = 0; i < n_bg; ++i) {
      const auto b = static_cast<std::size_t>(bg.below(hist.counts.size()));
      ++hist.counts[b];
      ++hist.total;
    }
  }
  return hist;
}

std::vector<double> pulsed_delays(const StreamConfig& cfg, double pulse_period_ns,
                                  double pickup_prob) {
  std::vector<double> delays;
  run_pulsed(cfg, pulse_period_ns, pickup_prob,
             [&](double, double delay_s) { delays.push_back(delay_s * 1e9); });
  return delays;
}

std::vector<SaturationPoint> saturation_series(const StreamConfig& base,
                                               std::span<const double> powers_uW,
                                               double dwell_s) {
  if (dwell_s <= 0) throw std::invalid_argument("dwell must be > 0");
  std::vector<SaturationPoint> out;
  out.reserve(powers_uW.size());
  for (std::size_t i = 0; i < powers_uW.size(); ++i) {
    const double p = powers_uW[i];
    if (p <= 0) throw std::invalid_argument("powers must be > 0");
    StreamConfig cfg = base;
    cfg.rates.pump = base.power_model.pump_rate(p);
    cfg.power_uW = p;
    cfg.duration_s = dwell_s;
    cfg.seed = derive_seed(base.seed, "saturation", i);
    const TimeTagStream stream = simulate_stream(cfg);
    SaturationPoint pt;
    pt.power_uW = p;
    pt.counts = static_cast<std::int64_t>(stream.tags.size());
    pt.dwell_s = dwell_s;
    pt.rate_cps = static_cast<double>(pt.counts) / dwell_s;
    out.push_back(pt);
  }
  return out;
}

TimeTrace timetrace(const TimeTagStream& stream, double bin_s) {
  if (bin_s <= 0) throw std::invalid_argument("bin must be > 0");
  TimeTrace trace;
  trace.bin_s = bin_s;
  const auto n_bins = static_cast<std::size_t>(std::ceil(stream.duration_s / bin_s));
  trace.counts.assign(std::max<std::size_t>(n_bins, 1), 0);
  const double bin_ps = bin_s * kPsPerSecond;
  for (const TimeTag& tag : stream.tags) {
    auto b = static_cast<std::size_t>(static_cast<double>(tag.t_ps) / bin_ps);
    if (b >= trace.counts.size()) b = trace.counts.size() - 1;
    ++trace.counts[b];
  }
  return trace;
}

LifetimeFit fit_lifetime(const DecayHistogram& hist, double fit_start_ns,
                         double fit_stop_ns) {
  LifetimeFit out;
  if (hist.counts.empty() || hist.total == 0) return out;
  const std::vector<double> centers = hist.centers_ns();

  std::size_t peak = 0;
  for (std::size_t i = 1; i < hist.counts.size(); ++i)
    if (hist.counts[i] > hist.counts[peak]) peak = i;
  const double bin_ns = static_cast<double>(hist.bin_width_ps) * 1e-3;
  const double start =
      fit_start_ns >= 0 ? fit_start_ns : centers[peak] + 2.0 * bin_ns;
  const double stop = fit_stop_ns > 0
                          ? fit_stop_ns
                          : 0.95 * static_cast<double>(hist.period_ps) * 1e-3;

  FitProblem prob;
  prob.model = "exponential_decay";
  for (std::size_t i = 0; i < centers.size(); ++i) {
    if (centers[i] < start || centers[i] > stop) continue;
    prob.x.push_back(centers[i]);
    prob.y.push_back(static_cast<double>(hist.counts[i]));
  }
  if (prob.x.size() < 5) return out;
  prob.model_weighted_passes = 4;  // IRLS to the Poisson-MLE fixed point
  prob.bounds = {{0.0, std::numeric_limits<double>::infinity()},
                 {1e-6, std::numeric_limits<double>::infinity()},
                 {0.0, std::numeric_limits<double>::infinity()}};
  auto guess = initial_guess("exponential_decay", prob.x, prob.y);
  if (!guess) return out;
  for (double& g : (*guess)) g = std::max(g, 1e-6);
  prob.initial = *guess;

  const FitResult res = fit(prob);
  out.status = res.status;
  out.reduced_chi2 = res.reduced_chi2;
  if (res.params.size() == 3) {
    out.amplitude = res.params[0];
    out.tau_ns = res.params[1];
    out.background = res.params[2];
    out.tau_err_ns = res.errors.size() == 3 ? res.errors[1] : 0.0;
  }
  return out;
}

SaturationFit fit_saturation(std::span<const SaturationPoint> points) {
  SaturationFit out;
  if (points.size() < 3) return out;
  FitProblem prob;
  prob.model = "saturation";
  for (const auto& p : points) {
    prob.x.push_back(p.power_uW);
    prob.y.push_back(p.rate_cps);
    // Poisson error on the counted rate.
    prob.y_err.push_back(std::sqrt(std::max(static_cast<double>(p.counts), 1.0)) /
                         std::max(p.dwell_s, 1e-12));
  }
  prob.bounds = {{0.0, std::numeric_limits<double>::infinity()},
                 {0.0, std::numeric_limits<double>::infinity()}};
  const FitResult res = fit(prob);
  out.status = res.status;
  out.reduced_chi2 = res.reduced_chi2;
  out.chi2 = res.chi2;
  if (res.params.size() == 2) {
    out.i_sat_cps = res.params[0];
    out.p_sat_uW = res.params[1];
    out.i_sat_err = res.errors[0];
    out.p_sat_err = res.errors[1];
  }
  return out;
}

}  // namespace wsim
