#include "wsim/presets.hpp"

#include <cmath>

#include "wsim/kinetics.hpp"
#include "wsim/rng.hpp"

namespace wsim::presets {

StreamConfig g2_stream(std::uint64_t seed, double duration_s, bool with_shelving) {
  StreamConfig cfg;
  cfg.rates.pump = 2.0e7;
  cfg.rates.decay = 8.0e7;
  cfg.rates.shelve = with_shelving ? 8.0e6 : 0.0;
  cfg.rates.deshelve = with_shelving ? 1.0e7 : 0.0;
  cfg.power_model.detection_efficiency = 0.10;
  cfg.power_model.sigma = 1.0e7;
  cfg.duration_s = duration_s;
  cfg.jitter_sigma_ps = 50.0;
  cfg.splitter_ratio = 0.5;
  cfg.seed = seed;
  // Background pinned by the signal fraction rho: B = S (1/rho - 1).
  const double signal =
      detected_rate(cfg.rates, cfg.power_model, /*background=*/0.0);
  cfg.background_cps = signal * (1.0 / kG2SignalFraction - 1.0);
  return cfg;
}

G2Analysis g2_analysis() { return {}; }

PulsedPreset pulsed_lifetime(double tau_ns, std::uint64_t seed,
                             double target_photons) {
  PulsedPreset p;
  p.config.rates.pump = 0.0;  // pulsed excitation, no CW pump
  p.config.rates.decay = 1e9 / tau_ns;
  p.config.rates.shelve = 0.0;
  p.config.rates.deshelve = 0.0;
  p.config.power_model.detection_efficiency = 0.10;
  p.config.jitter_sigma_ps = 50.0;
  p.config.seed = seed;
  // Long lifetimes need room for the decay to reach the baseline, or the
  // offset-lifetime correlation biases the fit at finite statistics.
  p.period_ns = std::max(200.0, 10.0 * tau_ns);
  const double det_per_pulse =
      p.pickup_prob * p.config.power_model.detection_efficiency;
  const double n_pulses = target_photons / det_per_pulse;
  p.config.duration_s = n_pulses * p.period_ns * 1e-9;
  p.config.background_cps = 2000.0;
  return p;
}

SaturationPreset saturation(std::uint64_t seed, bool with_dark_state) {
  SaturationPreset s;
  s.base.rates.decay = 6.0e4;          // I_sat = eta * decay = 6 kcounts/s
  s.base.power_model.sigma = 3.0e4;    // P_sat = decay / sigma = 2 uW
  s.base.power_model.detection_efficiency = 0.10;
  s.base.seed = seed;
  if (with_dark_state) {
    s.base.dark_rate_per_uW = 0.05;
    s.base.dark_recovery = 0.5;
  }
  s.dwell_s = 10.0;
  s.powers_uW.reserve(12);
  for (int i = 0; i < 12; ++i)
    s.powers_uW.push_back(0.25 * std::pow(128.0, i / 11.0));  // 0.25 .. 32 uW
  return s;
}

PolarizationPreset polarization(int which_dipole) {
  PolarizationPreset p;
  p.theta0_deg = which_dipole == 0 ? 0.0 : 90.0;
  for (int a = 0; a <= 180; a += 10) p.angles_deg.push_back(a);
  return p;
}

SpectrumModel spectrum_model() { return {}; }

std::vector<double> spectrum_grid() {
  return energy_grid(0.80, 1.06, 0.00002);  // 0.02 meV steps resolve the ZPL
}

std::pair<double, double> zpl_window() { return {1.018 - 0.004, 1.018 + 0.004}; }

TemperatureLaw temperature_law() {
  TemperatureLaw law;
  law.shift_coeffs = {0.0, -2.0e-4, -3.0e-5};
  law.width_coeffs = {5.0e-4, 1.0e-4, 5.0e-7};
  law.gamma0_meV = 0.10;
  law.t_ref_K = 8.0;
  law.t_max_K = 50.0;
  return law;
}

std::vector<double> temperature_scan() {
  return {8.0, 15.0, 22.0, 29.0, 36.0, 43.0, 50.0};
}

namespace {

// Rejection-sampled positions with a minimum pairwise separation.
void place_emitters(EmitterField& field, int n, double margin_um,
                    double min_sep_um, double bright_lo, double bright_hi,
                    Rng& rng) {
  const auto axes = all_dipole_axes();
  int placed = 0;
  int attempts = 0;
  while (placed < n && attempts < 100000) {
    ++attempts;
    const double x = rng.uniform(margin_um, field.width_um - margin_um);
    const double y = rng.uniform(margin_um, field.height_um - margin_um);
    bool ok = true;
    for (const auto& e : field.emitters)
      if (std::hypot(e.x_um - x, e.y_um - y) < min_sep_um) {
        ok = false;
        break;
      }
    if (!ok) continue;
    Emitter e;
    e.x_um = x;
    e.y_um = y;
    e.brightness_cps = rng.uniform(bright_lo, bright_hi);
    e.dipole = axes[static_cast<std::size_t>(rng.below(4))];
    field.emitters.push_back(e);
    ++placed;
  }
}

}  // namespace

EmitterField sparse_field(std::uint64_t seed, int n_emitters) {
  EmitterField field;
  field.width_um = 100.0;
  field.height_um = 100.0;
  field.background_cps = 1000.0;
  Rng rng(derive_seed(seed, "sparse-field"));
  place_emitters(field, n_emitters, 3.0, 5.0, 3000.0, 6000.0, rng);
  return field;
}

EmitterField implanted_field(std::uint64_t seed) {
  EmitterField field;
  field.width_um = 100.0;
  field.height_um = 100.0;
  field.background_cps = 1000.0;
  Rng rng(derive_seed(seed, "implanted-field"));
  const auto axes = all_dipole_axes();
  // Dense implanted square: ensemble of overlapping emitters.
  for (int i = 0; i < 900; ++i) {
    Emitter e;
    e.x_um = rng.uniform(35.0, 65.0);
    e.y_um = rng.uniform(35.0, 65.0);
    e.brightness_cps = rng.uniform(1000.0, 3000.0);
    e.dipole = axes[static_cast<std::size_t>(rng.below(4))];
    field.emitters.push_back(e);
  }
  // Isolated singles at the periphery.
  Rng rng2(derive_seed(seed, "implanted-periphery"));
  int placed = 0;
  int attempts = 0;
  while (placed < 12 && attempts < 100000) {
    ++attempts;
    const double x = rng2.uniform(3.0, 97.0);
    const double y = rng2.uniform(3.0, 97.0);
    if (x > 30.0 && x < 70.0 && y > 30.0 && y < 70.0) continue;
    bool ok = true;
    for (const auto& e : field.emitters)
      if (std::hypot(e.x_um - x, e.y_um - y) < 5.0) {
        ok = false;
        break;
      }
    if (!ok) continue;
    Emitter e;
    e.x_um = x;
    e.y_um = y;
    e.brightness_cps = rng2.uniform(3000.0, 6000.0);
    e.dipole = axes[static_cast<std::size_t>(rng2.below(4))];
    field.emitters.push_back(e);
    ++placed;
  }
  return field;
}

ScanGeometry scan_geometry() {
  ScanGeometry g;
  g.psf_sigma_um = diffraction_psf_sigma_um();
  return g;
}

}  // namespace wsim::presets
