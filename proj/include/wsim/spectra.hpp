#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wsim/fitting.hpp"

// Synthetic and fitted PL spectra: Lorentzian ZPL broadened by a
// width-additive (Lorentzian) instrument response, structured phonon sideband
// with a local-vibrational-mode replica, Debye-Waller fraction, inhomogeneous
// ZPL statistics and polynomial temperature laws for shift and width.

namespace wsim {

/// 1 eV <-> 1239.842 nm.
double ev_to_nm(double energy_eV);
double nm_to_ev(double wavelength_nm);

struct TemperatureLaw {
  /// dE(T) = sum_i shift[i] * (T - t_ref)^(i+1), meV (red-shift: <= 0).
  std::vector<double> shift_coeffs;
  /// Observed ZPL width Gamma(T) = gamma0 + sum_i width[i] * (T - t_ref)^(i+1),
  /// meV; never below the instrument resolution.
  std::vector<double> width_coeffs;
  double gamma0_meV = 0.10;
  double t_ref_K = 8.0;
  double t_max_K = 50.0;

  /// Rejects coefficients that break red-shift/broadening monotonicity over
  /// [t_ref, t_max] or push the width below the instrument resolution.
  void validate(double instrument_resolution_meV = 0.10) const;
};

/// (dE_meV, gamma_meV) at temperature T; throws below the reference point.
std::pair<double, double> temperature_response(const TemperatureLaw& law,
                                               double temperature_K);

struct SidebandComponent {
  double offset_meV = 0.0;  ///< below the ZPL
  double sigma_meV = 1.0;
  double weight = 0.0;      ///< relative within the sideband
};

struct SpectrumModel {
  double zpl_energy_eV = 1.018;
  double zpl_fwhm_meV = 0.02;       ///< intrinsic width; observed adds instrument
  double debye_waller = 0.40;       ///< ZPL fraction of total emission
  double lvm_offset_meV = 70.0;     ///< local vibrational mode replica position
  double lvm_sigma_meV = 1.2;
  double lvm_weight = 0.25;         ///< relative weight within the sideband
  std::vector<SidebandComponent> broad = {{35.0, 12.0, 0.45}, {110.0, 35.0, 0.30}};
  double instrument_fwhm_meV = 0.10;
  std::optional<TemperatureLaw> temperature;

  void validate() const;
};

struct Spectrum {
  std::vector<double> energies_eV;  ///< strictly ascending
  std::vector<double> intensities;
};

std::vector<double> energy_grid(double e_min_eV, double e_max_eV, double step_eV);

/// Spectral density sampled on the grid, scaled by amplitude (so the total
/// integral is amplitude counts*eV).  ZPL carries fraction dw of the area,
/// the sideband the rest; the temperature law (when present) shifts and
/// broadens the ZPL.
Spectrum synth_spectrum(const SpectrumModel& model, double temperature_K,
                        std::span<const double> grid_eV, double amplitude = 1.0);

Spectrum add_poisson_noise(const Spectrum& spectrum, std::uint64_t seed);

struct ZplFit {
  double energy_eV = 0.0, energy_err_eV = 0.0;
  double fwhm_meV = 0.0, fwhm_err_meV = 0.0;
  double amplitude = 0.0;
  double offset = 0.0;
  bool low_confidence = false;  ///< amplitude below 3x the noise floor
  double reduced_chi2 = 0.0;
  FitStatus status = FitStatus::invalid_data;
  bool ok() const { return status == FitStatus::converged; }
};

/// Lorentzian least squares inside [window_lo, window_hi] (eV).
ZplFit fit_zpl(const Spectrum& spectrum, double window_lo_eV, double window_hi_eV);

struct DebyeWaller {
  double fraction = 0.0;
  bool valid = false;
};

/// integral(zpl window) / integral(total), trapezoidal, after subtracting a
/// constant baseline per sample.
DebyeWaller debye_waller(const Spectrum& spectrum, double window_lo_eV,
                         double window_hi_eV, double baseline = 0.0);

/// Inhomogeneous ZPL positions: Gaussian of sigma = spread/4 truncated at
/// +- spread/2 around 1.018 eV, so any sample spans at most `spread`.
std::vector<double> sample_inhomogeneous_zpl(int n, double spread_meV,
                                             std::uint64_t seed,
                                             double center_eV = 1.018);

struct TemperatureFit {
  TemperatureLaw law;
  std::vector<double> shift_errs;
  std::vector<double> width_errs;  ///< errors for (gamma0, width coefficients)
  FitStatus status = FitStatus::invalid_data;
  bool ok() const { return status == FitStatus::converged; }
};

/// Polynomial least squares of measured (T, dE) and (T, gamma) series.
/// Shift has no constant term (dE(t_ref) = 0 by construction); the width
/// series fits gamma0 as intercept.  Needs at least degree + 2 points.
TemperatureFit fit_temperature(std::span<const double> temperatures_K,
                               std::span<const double> shifts_meV,
                               std::span<const double> widths_meV, int degree = 3,
                               double t_ref_K = 8.0);

/// Spectrum CSV: energy_eV, intensity [, wavelength_nm].
void write_spectrum_csv(const Spectrum& spectrum, const std::string& path,
                        bool wavelength_column = false);

}  // namespace wsim
