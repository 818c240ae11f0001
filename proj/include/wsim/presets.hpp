#pragma once

#include <cstdint>
#include <vector>

#include "wsim/photon_stream.hpp"
#include "wsim/scan.hpp"
#include "wsim/spectra.hpp"

// Canned parameter sets that regenerate each figure-style pipeline end to
// end.  The emitter rates are plausible defaults for a nanosecond-lifetime
// color center with a metastable shelving level; they are not tied to any
// particular measured defect.

namespace wsim::presets {

/// Antibunching pipeline: three-level emitter diluted with uncorrelated
/// background at signal fraction 0.938, so the mixed g2(0) is 0.12.
StreamConfig g2_stream(std::uint64_t seed, double duration_s = 0.8,
                       bool with_shelving = true);

struct G2Analysis {
  std::int64_t bin_width_ps = 1000;
  std::int64_t tau_min_ps = -300'000;
  std::int64_t tau_max_ps = 300'000;
};
G2Analysis g2_analysis();

/// Signal fraction of the g2_stream preset.
inline constexpr double kG2SignalFraction = 0.938;

struct PulsedPreset {
  StreamConfig config;
  double period_ns = 200.0;
  double pickup_prob = 0.9;
  std::int64_t bin_width_ps = 200;
};

/// Time-resolved PL at the given excited-state lifetime (pure radiative
/// decay); duration sized for roughly `target_photons` detections.
PulsedPreset pulsed_lifetime(double tau_ns, std::uint64_t seed,
                             double target_photons = 2e5);

struct SaturationPreset {
  StreamConfig base;
  std::vector<double> powers_uW;
  double dwell_s = 10.0;
};

/// Two-level saturation generator with P_sat = 2 uW and I_sat = 6 kcounts/s;
/// with_dark_state couples a power-fed dark state that wrecks the standard
/// saturation shape.
SaturationPreset saturation(std::uint64_t seed, bool with_dark_state = false);

struct PolarizationPreset {
  double theta0_deg = 0.0;
  double i_max_cps = 2000.0;
  double visibility = 0.97;
  double dwell_s = 5.0;
  std::vector<double> angles_deg;  ///< 0..180 in 10 deg steps
};

/// Single-dipole diagram for one of the two projected orientations (0 or 1).
PolarizationPreset polarization(int which_dipole = 0);

inline constexpr int kOrientationSampleSize = 47;

/// Spectrum model with the default ZPL at 1.018 eV, 40% Debye-Waller
/// fraction and the 70 meV LVM replica.
SpectrumModel spectrum_model();
std::vector<double> spectrum_grid();
/// ZPL integration window for Debye-Waller extraction (eV).
std::pair<double, double> zpl_window();

TemperatureLaw temperature_law();
std::vector<double> temperature_scan();  ///< 8..50 K

/// Sparse field at the nominal areal density: a dozen well-separated
/// emitters in 100 x 100 um^2.
EmitterField sparse_field(std::uint64_t seed, int n_emitters = 12);

/// Implanted-square morphology: a dense 30 x 30 um^2 block plus isolated
/// emitters at the periphery.
EmitterField implanted_field(std::uint64_t seed);

struct ScanGeometry {
  double psf_sigma_um = 0.3103;  ///< diffraction estimate at 1218 nm, NA 0.85
  double pitch_um = 0.5;
  double dwell_s = 1.0;
};
ScanGeometry scan_geometry();

}  // namespace wsim::presets
