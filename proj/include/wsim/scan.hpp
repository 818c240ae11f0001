#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wsim/dipole.hpp"

// Confocal raster-scan simulation: emitters imaged through an isotropic
// Gaussian PSF onto a pixel grid, Poisson counting noise, local-maximum
// hotspot detection with deduplication inside one PSF fwhm.

namespace wsim {

struct Emitter {
  double x_um = 0.0, y_um = 0.0;
  double brightness_cps = 0.0;  ///< detected peak rate with the PSF centered
  DipoleAxis dipole = DipoleAxis::p111;
  double zpl_eV = 1.018;
};

struct EmitterField {
  std::vector<Emitter> emitters;
  double width_um = 100.0, height_um = 100.0;
  double background_cps = 0.0;

  void validate() const;
};

/// Gaussian sigma of the diffraction-limited PSF: fwhm = 0.51 lambda / NA.
double diffraction_psf_sigma_um(double wavelength_nm = 1218.0,
                                double numerical_aperture = 0.85);

struct ScanMap {
  int nx = 0, ny = 0;
  double pitch_um = 0.0;
  double dwell_s = 0.0;
  double psf_sigma_um = 0.0;
  bool undersampled = false;          ///< pitch > 2 sigma (Nyquist warning)
  std::vector<double> expected;       ///< row-major expected counts
  std::vector<std::int64_t> counts;   ///< Poisson samples (empty in no-noise maps)

  double pixel_x_um(int ix) const { return (ix + 0.5) * pitch_um; }
  double pixel_y_um(int iy) const { return (iy + 0.5) * pitch_um; }
  std::size_t index(int ix, int iy) const {
    return static_cast<std::size_t>(iy) * nx + ix;
  }
  double value(int ix, int iy) const {
    return counts.empty() ? expected[index(ix, iy)]
                          : static_cast<double>(counts[index(ix, iy)]);
  }
};

/// Deterministic expectation map: dwell * (background + sum of PSF-weighted
/// emitter rates) per pixel.
ScanMap expected_scan(const EmitterField& field, double psf_sigma_um,
                      double pitch_um, double dwell_s);

/// Poisson-sampled map; rows draw from independent sub-streams of the seed.
ScanMap simulate_scan(const EmitterField& field, double psf_sigma_um,
                      double pitch_um, double dwell_s, std::uint64_t seed);

struct Hotspot {
  double x_um = 0.0, y_um = 0.0;
  double peak_counts = 0.0;
  double significance = 0.0;  ///< (peak - background) / sqrt(background)
};

/// Local maxima above median + threshold_sigma * sqrt(median), deduplicated
/// within one PSF fwhm, brightest first.
std::vector<Hotspot> detect_hotspots(const ScanMap& map, double threshold_sigma);

void write_map_csv(const ScanMap& map, const std::string& path);
void write_map_pgm(const ScanMap& map, const std::string& path);
void write_hotspots_csv(const std::vector<Hotspot>& hotspots,
                        const std::string& path);

}  // namespace wsim
