#include "wsim/scan.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "wsim/rng.hpp"

namespace wsim {

void EmitterField::validate() const {
  if (width_um <= 0 || height_um <= 0)
    throw std::invalid_argument("field extent must be positive");
  if (background_cps < 0)
    throw std::invalid_argument("background must be >= 0");
  for (const auto& e : emitters) {
    if (e.brightness_cps < 0)
      throw std::invalid_argument("emitter brightness must be >= 0");
    if (e.x_um < 0 || e.x_um > width_um || e.y_um < 0 || e.y_um > height_um)
      throw std::invalid_argument("emitter outside the field extent");
  }
}

double diffraction_psf_sigma_um(double wavelength_nm, double numerical_aperture) {
  const double fwhm_nm = 0.51 * wavelength_nm / numerical_aperture;
  return fwhm_nm / 2.3548200450309493 * 1e-3;
}

ScanMap expected_scan(const EmitterField& field, double psf_sigma_um,
                      double pitch_um, double dwell_s) {
  field.validate();
  if (psf_sigma_um <= 0 || pitch_um <= 0 || dwell_s <= 0)
    throw std::invalid_argument("psf sigma, pitch and dwell must be > 0");

  ScanMap map;
  map.nx = static_cast<int>(std::ceil(field.width_um / pitch_um));
  map.ny = static_cast<int>(std::ceil(field.height_um / pitch_um));
  map.pitch_um = pitch_um;
  map.dwell_s = dwell_s;
  map.psf_sigma_um = psf_sigma_um;
  map.undersampled = pitch_um > 2.0 * psf_sigma_um;
  map.expected.assign(static_cast<std::size_t>(map.nx) * map.ny,
                      field.background_cps * dwell_s);

  const double inv2s2 = 1.0 / (2.0 * psf_sigma_um * psf_sigma_um);
  const double reach = 5.0 * psf_sigma_um;
  for (const auto& e : field.emitters) {
    const int ix0 = std::max(0, static_cast<int>((e.x_um - reach) / pitch_um));
    const int ix1 = std::min(map.nx - 1, static_cast<int>((e.x_um + reach) / pitch_um));
    const int iy0 = std::max(0, static_cast<int>((e.y_um - reach) / pitch_um));
    const int iy1 = std::min(map.ny - 1, static_cast<int>((e.y_um + reach) / pitch_um));
    for (int iy = iy0; iy <= iy1; ++iy) {
      const double dy = map.pixel_y_um(iy) - e.y_um;
      for (int ix = ix0; ix <= ix1; ++ix) {
        const double dx = map.pixel_x_um(ix) - e.x_um;
        map.expected[map.index(ix, iy)] +=
            e.brightness_cps * dwell_s * std::exp(-(dx * dx + dy * dy) * inv2s2);
      }
    }
  }
  return map;
}

ScanMap simulate_scan(const EmitterField& field, double psf_sigma_um,
                      double pitch_um, double dwell_s, std::uint64_t seed) {
  ScanMap map = expected_scan(field, psf_sigma_um, pitch_um, dwell_s);
  map.counts.resize(map.expected.size());
  for (int iy = 0; iy < map.ny; ++iy) {
    Rng rng(derive_seed(seed, "scan-row", static_cast<std::uint64_t>(iy)));
    for (int ix = 0; ix < map.nx; ++ix) {
      const std::size_t i = map.index(ix, iy);
      map.counts[i] = rng.poisson(map.expected[i]);
    }
  }
  return map;
}

namespace {

double median_value(const ScanMap& map) {
  std::vector<double> v(map.expected.size());
  for (int iy = 0; iy < map.ny; ++iy)
    for (int ix = 0; ix < map.nx; ++ix)
      v[map.index(ix, iy)] = map.value(ix, iy);
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  return v[mid];
}

}  // namespace

std::vector<Hotspot> detect_hotspots(const ScanMap& map, double threshold_sigma) {
  if (map.nx < 3 || map.ny < 3)
    throw std::invalid_argument("map must be at least 3x3 pixels");
  const double background = median_value(map);
  const double noise = std::sqrt(std::max(background, 1.0));
  const double threshold = background + threshold_sigma * noise;

  std::vector<Hotspot> peaks;
  for (int iy = 0; iy < map.ny; ++iy) {
    for (int ix = 0; ix < map.nx; ++ix) {
      const double v = map.value(ix, iy);
      if (v <= threshold) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int jx = ix + dx, jy = iy + dy;
          if (jx < 0 || jx >= map.nx || jy < 0 || jy >= map.ny) continue;
          const double w = map.value(jx, jy);
          // Strict on one side of the tie so plateaus yield a single peak.
          if (w > v || (w == v && (dy < 0 || (dy == 0 && dx < 0)))) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max)
        peaks.push_back({map.pixel_x_um(ix), map.pixel_y_um(iy), v,
                         (v - background) / noise});
    }
  }

  std::sort(peaks.begin(), peaks.end(), [](const Hotspot& a, const Hotspot& b) {
    return a.peak_counts > b.peak_counts;
  });
  const double min_sep = 2.3548200450309493 * map.psf_sigma_um;
  std::vector<Hotspot> keep;
  for (const auto& p : peaks) {
    bool merged = false;
    for (const auto& q : keep)
      if (std::hypot(p.x_um - q.x_um, p.y_um - q.y_um) < min_sep) {
        merged = true;
        break;
      }
    if (!merged) keep.push_back(p);
  }
  return keep;
}

void write_map_csv(const ScanMap& map, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  char cell[40];
  for (int iy = 0; iy < map.ny; ++iy) {
    for (int ix = 0; ix < map.nx; ++ix) {
      std::snprintf(cell, sizeof cell, "%.10g", map.value(ix, iy));
      f << cell << (ix + 1 < map.nx ? "," : "\n");
    }
  }
}

void write_map_pgm(const ScanMap& map, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  double vmax = 1.0;
  for (int iy = 0; iy < map.ny; ++iy)
    for (int ix = 0; ix < map.nx; ++ix) vmax = std::max(vmax, map.value(ix, iy));
  f << "P2\n" << map.nx << " " << map.ny << "\n255\n";
  for (int iy = 0; iy < map.ny; ++iy) {
    for (int ix = 0; ix < map.nx; ++ix) {
      const int g = static_cast<int>(std::lround(255.0 * map.value(ix, iy) / vmax));
      f << g << (ix + 1 < map.nx ? " " : "\n");
    }
  }
}

void write_hotspots_csv(const std::vector<Hotspot>& hotspots,
                        const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << "x_um,y_um,peak_counts,significance\n";
  char line[120];
  for (const auto& h : hotspots) {
    std::snprintf(line, sizeof line, "%.10g,%.10g,%.10g,%.10g\n", h.x_um, h.y_um,
                  h.peak_counts, h.significance);
    f << line;
  }
}

}  // namespace wsim
