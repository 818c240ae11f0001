#include "wsim/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "wsim/rng.hpp"

namespace wsim {

double ev_to_nm(double energy_eV) { return 1239.842 / energy_eV; }
double nm_to_ev(double wavelength_nm) { return 1239.842 / wavelength_nm; }

void TemperatureLaw::validate(double instrument_resolution_meV) const {
  if (gamma0_meV < instrument_resolution_meV)
    throw std::invalid_argument("width law starts below the instrument resolution");
  if (t_max_K <= t_ref_K) throw std::invalid_argument("empty temperature range");
  double prev_shift = 0.0;
  double prev_width = gamma0_meV;
  const int steps = 200;
  for (int i = 1; i <= steps; ++i) {
    const double t = t_ref_K + (t_max_K - t_ref_K) * i / steps;
    const auto [shift, width] = temperature_response(*this, t);
    if (shift > prev_shift + 1e-12)
      throw std::invalid_argument("shift law is not a monotone red-shift");
    if (width < prev_width - 1e-12)
      throw std::invalid_argument("width law is not monotonically broadening");
    if (width < instrument_resolution_meV)
      throw std::invalid_argument("width law dips below the instrument resolution");
    prev_shift = shift;
    prev_width = width;
  }
}

std::pair<double, double> temperature_response(const TemperatureLaw& law,
                                               double temperature_K) {
  if (temperature_K < law.t_ref_K)
    throw std::invalid_argument("temperature below the reference point");
  const double u = temperature_K - law.t_ref_K;
  double shift = 0.0, un = u;
  for (double c : law.shift_coeffs) {
    shift += c * un;
    un *= u;
  }
  double width = law.gamma0_meV;
  un = u;
  for (double c : law.width_coeffs) {
    width += c * un;
    un *= u;
  }
  return {shift, width};
}

void SpectrumModel::validate() const {
  if (debye_waller < 0 || debye_waller > 1)
    throw std::invalid_argument("Debye-Waller fraction must be in [0, 1]");
  if (zpl_fwhm_meV <= 0 || zpl_energy_eV <= 0)
    throw std::invalid_argument("ZPL energy and width must be > 0");
  if (instrument_fwhm_meV < 0 || lvm_sigma_meV <= 0 || lvm_weight < 0)
    throw std::invalid_argument("invalid sideband parameters");
  for (const auto& c : broad)
    if (c.sigma_meV <= 0 || c.weight < 0)
      throw std::invalid_argument("invalid sideband component");
  if (temperature) temperature->validate(instrument_fwhm_meV);
}

std::vector<double> energy_grid(double e_min_eV, double e_max_eV, double step_eV) {
  if (step_eV <= 0 || e_max_eV <= e_min_eV)
    throw std::invalid_argument("invalid energy grid");
  std::vector<double> g;
  const auto n = static_cast<std::size_t>((e_max_eV - e_min_eV) / step_eV) + 1;
  g.reserve(n);
  for (std::size_t i = 0; i < n; ++i) g.push_back(e_min_eV + step_eV * i);
  return g;
}

namespace {

double gauss_area1(double x, double sigma) {
  return std::exp(-0.5 * x * x / (sigma * sigma)) /
         (sigma * std::sqrt(2.0 * std::numbers::pi));
}

double lorentz_area1(double x, double fwhm) {
  return (2.0 / (std::numbers::pi * fwhm)) / (1.0 + 4.0 * x * x / (fwhm * fwhm));
}

}  // namespace

Spectrum synth_spectrum(const SpectrumModel& model, double temperature_K,
                        std::span<const double> grid_eV, double amplitude) {
  model.validate();
  if (temperature_K < 0) throw std::invalid_argument("temperature must be >= 0");
  for (std::size_t i = 1; i < grid_eV.size(); ++i)
    if (grid_eV[i] <= grid_eV[i - 1])
      throw std::invalid_argument("energy grid must be strictly ascending");

  // Width-additive Lorentzian instrument response, so resolution-limited
  // lines keep a fitted width at or above the instrument figure.
  double zpl_eV = model.zpl_energy_eV;
  double observed_fwhm_meV = model.zpl_fwhm_meV + model.instrument_fwhm_meV;
  if (model.temperature) {
    const auto [shift, width] = temperature_response(
        *model.temperature, std::max(temperature_K, model.temperature->t_ref_K));
    zpl_eV += shift * 1e-3;
    observed_fwhm_meV = std::max(width, model.instrument_fwhm_meV + 1e-6);
  }
  const double zpl_fwhm_eV = observed_fwhm_meV * 1e-3;

  // Sideband components, instrument response added in quadrature.
  struct Line {
    double center_eV, sigma_eV, weight;
  };
  std::vector<Line> sideband;
  const double inst_sigma_meV = model.instrument_fwhm_meV / 2.3548200450309493;
  double wsum = model.lvm_weight;
  for (const auto& c : model.broad) wsum += c.weight;
  if (wsum <= 0) wsum = 1.0;
  sideband.push_back({zpl_eV - model.lvm_offset_meV * 1e-3,
                      std::hypot(model.lvm_sigma_meV, inst_sigma_meV) * 1e-3,
                      model.lvm_weight / wsum});
  for (const auto& c : model.broad)
    sideband.push_back({zpl_eV - c.offset_meV * 1e-3,
                        std::hypot(c.sigma_meV, inst_sigma_meV) * 1e-3,
                        c.weight / wsum});

  Spectrum s;
  s.energies_eV.assign(grid_eV.begin(), grid_eV.end());
  s.intensities.reserve(grid_eV.size());
  const double dw = model.debye_waller;
  for (double e : grid_eV) {
    double density = dw * lorentz_area1(e - zpl_eV, zpl_fwhm_eV);
    for (const auto& line : sideband)
      density += (1.0 - dw) * line.weight * gauss_area1(e - line.center_eV,
                                                        line.sigma_eV);
    s.intensities.push_back(amplitude * density);
  }
  return s;
}

Spectrum add_poisson_noise(const Spectrum& spectrum, std::uint64_t seed) {
  Spectrum out = spectrum;
  Rng rng(derive_seed(seed, "spectrum-noise"));
  for (double& v : out.intensities)
    v = static_cast<double>(rng.poisson(std::max(v, 0.0)));
  return out;
}

ZplFit fit_zpl(const Spectrum& spectrum, double window_lo_eV,
               double window_hi_eV) {
  ZplFit out;
  if (window_hi_eV <= window_lo_eV)
    throw std::invalid_argument("empty fit window");

  // Fit in meV relative to the window center for conditioning.
  const double mid = 0.5 * (window_lo_eV + window_hi_eV);
  FitProblem prob;
  prob.model = "lorentzian";
  for (std::size_t i = 0; i < spectrum.energies_eV.size(); ++i) {
    const double e = spectrum.energies_eV[i];
    if (e < window_lo_eV || e > window_hi_eV) continue;
    prob.x.push_back((e - mid) * 1e3);
    prob.y.push_back(spectrum.intensities[i]);
  }
  if (prob.x.size() < 6) return out;
  const FitResult res = fit(prob);
  out.status = res.status;
  out.reduced_chi2 = res.reduced_chi2;
  if (res.params.size() == 4) {
    out.amplitude = res.params[0];
    out.energy_eV = mid + res.params[1] * 1e-3;
    out.energy_err_eV = res.errors[1] * 1e-3;
    out.fwhm_meV = std::fabs(res.params[2]);
    out.fwhm_err_meV = res.errors[2];
    out.offset = res.params[3];
    const double noise_floor = std::sqrt(std::max(out.offset, 1.0));
    out.low_confidence = out.amplitude < 3.0 * noise_floor;
  }
  return out;
}

namespace {

double trapezoid(std::span<const double> x, std::span<const double> y,
                 double lo, double hi, double baseline) {
  double area = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double a = std::max(x[i - 1], lo);
    const double b = std::min(x[i], hi);
    if (b <= a) continue;
    // Linear interpolation of the integrand onto [a, b].
    const double dx = x[i] - x[i - 1];
    const double ya = y[i - 1] + (y[i] - y[i - 1]) * (a - x[i - 1]) / dx - baseline;
    const double yb = y[i - 1] + (y[i] - y[i - 1]) * (b - x[i - 1]) / dx - baseline;
    area += 0.5 * (ya + yb) * (b - a);
  }
  return area;
}

}  // namespace

DebyeWaller debye_waller(const Spectrum& spectrum, double window_lo_eV,
                         double window_hi_eV, double baseline) {
  DebyeWaller out;
  if (spectrum.energies_eV.size() < 2) return out;
  const double total =
      trapezoid(spectrum.energies_eV, spectrum.intensities,
                spectrum.energies_eV.front(), spectrum.energies_eV.back(), baseline);
  if (total <= 0) return out;
  const double zpl = trapezoid(spectrum.energies_eV, spectrum.intensities,
                               window_lo_eV, window_hi_eV, baseline);
  out.fraction = zpl / total;
  out.valid = true;
  return out;
}

std::vector<double> sample_inhomogeneous_zpl(int n, double spread_meV,
                                             std::uint64_t seed, double center_eV) {
  if (n < 1) throw std::invalid_argument("need at least one sample");
  if (spread_meV <= 0) throw std::invalid_argument("spread must be > 0");
  Rng rng(derive_seed(seed, "zpl-inhomogeneous"));
  std::vector<double> out;
  out.reserve(n);
  const double sigma = spread_meV / 4.0;
  const double cut = spread_meV / 2.0;
  for (int i = 0; i < n; ++i) {
    double d;
    do {
      d = rng.normal() * sigma;
    } while (std::fabs(d) > cut);
    out.push_back(center_eV + d * 1e-3);
  }
  return out;
}

TemperatureFit fit_temperature(std::span<const double> temperatures_K,
                               std::span<const double> shifts_meV,
                               std::span<const double> widths_meV, int degree,
                               double t_ref_K) {
  TemperatureFit out;
  if (degree < 0) throw std::invalid_argument("degree must be >= 0");
  const auto n = temperatures_K.size();
  if (shifts_meV.size() != n || widths_meV.size() != n)
    throw std::invalid_argument("series lengths differ");
  if (n < static_cast<std::size_t>(degree) + 2) return out;

  const int nrows = static_cast<int>(n);
  // Shift: no constant term -> columns u, u^2, ..., u^degree.
  std::vector<double> design;
  if (degree >= 1) {
    design.reserve(n * degree);
    for (std::size_t i = 0; i < n; ++i) {
      double un = 1.0;
      const double u = temperatures_K[i] - t_ref_K;
      for (int d = 0; d < degree; ++d) {
        un *= u;
        design.push_back(un);
      }
    }
  }
  LinearFit shift_fit;
  if (degree >= 1) {
    shift_fit = linear_least_squares(design, nrows, degree, shifts_meV);
    if (shift_fit.status != FitStatus::converged) {
      out.status = shift_fit.status;
      return out;
    }
  } else {
    shift_fit.status = FitStatus::converged;  // degree-0 law: identically zero
  }

  // Width: intercept (gamma0) plus the same powers.
  std::vector<double> wdesign;
  wdesign.reserve(n * (degree + 1));
  for (std::size_t i = 0; i < n; ++i) {
    const double u = temperatures_K[i] - t_ref_K;
    double un = 1.0;
    wdesign.push_back(1.0);
    for (int d = 0; d < degree; ++d) {
      un *= u;
      wdesign.push_back(un);
    }
  }
  const LinearFit width_fit =
      linear_least_squares(wdesign, nrows, degree + 1, widths_meV);
  if (width_fit.status != FitStatus::converged) {
    out.status = width_fit.status;
    return out;
  }

  out.law.t_ref_K = t_ref_K;
  out.law.t_max_K = *std::max_element(temperatures_K.begin(), temperatures_K.end());
  out.law.shift_coeffs = shift_fit.coeffs;
  out.law.gamma0_meV = width_fit.coeffs[0];
  out.law.width_coeffs.assign(width_fit.coeffs.begin() + 1, width_fit.coeffs.end());
  out.shift_errs = shift_fit.errors;
  out.width_errs = width_fit.errors;
  out.status = FitStatus::converged;
  return out;
}

void write_spectrum_csv(const Spectrum& spectrum, const std::string& path,
                        bool wavelength_column) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << (wavelength_column ? "energy_eV,intensity,wavelength_nm\n"
                          : "energy_eV,intensity\n");
  char line[120];
  for (std::size_t i = 0; i < spectrum.energies_eV.size(); ++i) {
    if (wavelength_column)
      std::snprintf(line, sizeof line, "%.10g,%.10g,%.10g\n",
                    spectrum.energies_eV[i], spectrum.intensities[i],
                    ev_to_nm(spectrum.energies_eV[i]));
    else
      std::snprintf(line, sizeof line, "%.10g,%.10g\n", spectrum.energies_eV[i],
                    spectrum.intensities[i]);
    f << line;
  }
}

}  // namespace wsim
