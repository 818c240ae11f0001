// wsim: simulate and analyze single-photon-emitter experiments from the
// command line.  One binary, subcommand style; parameters come from an
// optional JSON config file, figure presets, and flags (flags win).
//
// Exit codes: 0 ok, 2 config error, 3 input error, 4 fit non-convergence.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "wsim/correlator.hpp"
#include "wsim/dipole.hpp"
#include "wsim/kinetics.hpp"
#include "wsim/photon_stream.hpp"
#include "wsim/presets.hpp"
#include "wsim/rng.hpp"
#include "wsim/scan.hpp"
#include "wsim/spectra.hpp"
#include "wsim/timetag_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInput = 3;
constexpr int kExitFit = 4;

struct CliError {
  int code;
  std::string message;
};

[[noreturn]] void fail(int code, const std::string& message) {
  throw CliError{code, message};
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// --------------------------------------------------------------------------
// Config file handling: strict schema, unknown keys rejected.

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream f(path);
  if (!f) fail(kExitConfig, "config file not found: " + path);
  json cfg;
  try {
    f >> cfg;
  } catch (const json::parse_error& e) {
    fail(kExitConfig, "config parse error: " + std::string(e.what()));
  }
  if (!cfg.is_object()) fail(kExitConfig, "config root must be an object");
  return cfg;
}

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& where) {
  for (const auto& [key, _] : obj.items())
    if (!allowed.contains(key))
      fail(kExitConfig, "unknown config key '" + key + "' in " + where);
}

json section(const json& cfg, const std::string& name) {
  if (!cfg.contains(name)) return json::object();
  if (!cfg[name].is_object())
    fail(kExitConfig, "config section '" + name + "' must be an object");
  return cfg[name];
}

double num(const json& obj, const std::string& key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number())
    fail(kExitConfig, "config key '" + key + "' must be a number");
  return obj[key].get<double>();
}

std::int64_t integer(const json& obj, const std::string& key, std::int64_t fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_integer())
    fail(kExitConfig, "config key '" + key + "' must be an integer");
  return obj[key].get<std::int64_t>();
}

bool flag(const json& obj, const std::string& key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_boolean())
    fail(kExitConfig, "config key '" + key + "' must be a boolean");
  return obj[key].get<bool>();
}

std::string text(const json& obj, const std::string& key, const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_string())
    fail(kExitConfig, "config key '" + key + "' must be a string");
  return obj[key].get<std::string>();
}

// --------------------------------------------------------------------------

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 1;
  std::string preset;
  bool seed_from_flag = false;
  bool out_from_flag = false;

  json cfg;

  void resolve() {
    cfg = load_config(config_path);
    static const std::set<std::string> sections = {
        "seed",     "out",        "simulate", "g2",  "lifetime",
        "saturation", "polarization", "spectrum", "scan"};
    check_keys(cfg, sections, "config root");
    if (!seed_from_flag && cfg.contains("seed")) {
      if (!cfg["seed"].is_number_integer())
        fail(kExitConfig, "config key 'seed' must be an integer");
      seed = cfg["seed"].get<std::uint64_t>();
    }
    if (!out_from_flag && cfg.contains("out")) out_dir = text(cfg, "out", ".");
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) fail(kExitConfig, "cannot create output directory: " + out_dir);
  }

  std::string path(const std::string& name) const {
    return (fs::path(out_dir) / name).string();
  }

  void expect_preset(std::initializer_list<const char*> allowed) const {
    if (preset.empty()) return;
    for (const char* a : allowed)
      if (preset == a) return;
    fail(kExitConfig, "preset '" + preset + "' does not apply to this subcommand");
  }
};

void apply_stream_overrides(StreamConfig& sc, const json& j, const std::string& where) {
  check_keys(j,
             {"duration_s", "pump_per_s", "decay_per_s", "shelve_per_s",
              "deshelve_per_s", "detection_efficiency", "sigma_per_s_per_uW",
              "background_cps", "jitter_sigma_ps", "dead_time_ps",
              "splitter_ratio", "dark_rate_per_s", "dark_rate_per_s_per_uW",
              "dark_recovery_per_s", "bleach_rate_per_s",
              "bleach_power_threshold_uW", "power_uW", "pol_angle_deg"},
             where);
  sc.duration_s = num(j, "duration_s", sc.duration_s);
  sc.rates.pump = num(j, "pump_per_s", sc.rates.pump);
  sc.rates.decay = num(j, "decay_per_s", sc.rates.decay);
  sc.rates.shelve = num(j, "shelve_per_s", sc.rates.shelve);
  sc.rates.deshelve = num(j, "deshelve_per_s", sc.rates.deshelve);
  sc.power_model.detection_efficiency =
      num(j, "detection_efficiency", sc.power_model.detection_efficiency);
  sc.power_model.sigma = num(j, "sigma_per_s_per_uW", sc.power_model.sigma);
  sc.background_cps = num(j, "background_cps", sc.background_cps);
  sc.jitter_sigma_ps = num(j, "jitter_sigma_ps", sc.jitter_sigma_ps);
  sc.dead_time_ps = integer(j, "dead_time_ps", sc.dead_time_ps);
  sc.splitter_ratio = num(j, "splitter_ratio", sc.splitter_ratio);
  sc.dark_rate = num(j, "dark_rate_per_s", sc.dark_rate);
  sc.dark_rate_per_uW = num(j, "dark_rate_per_s_per_uW", sc.dark_rate_per_uW);
  sc.dark_recovery = num(j, "dark_recovery_per_s", sc.dark_recovery);
  sc.bleach_rate = num(j, "bleach_rate_per_s", sc.bleach_rate);
  sc.bleach_power_threshold_uW =
      num(j, "bleach_power_threshold_uW", sc.bleach_power_threshold_uW);
  sc.power_uW = num(j, "power_uW", sc.power_uW);
  if (j.contains("pol_angle_deg")) sc.pol_angle_deg = num(j, "pol_angle_deg", 0.0);
}

// --------------------------------------------------------------------------
// simulate

int cmd_simulate(const CommonArgs& args) {
  args.expect_preset({"fig1e"});
  StreamConfig sc = presets::g2_stream(args.seed);
  apply_stream_overrides(sc, section(args.cfg, "simulate"), "simulate");
  sc.seed = args.seed;
  try {
    sc.validate();
  } catch (const std::exception& e) {
    fail(kExitConfig, std::string("invalid stream config: ") + e.what());
  }
  const TimeTagStream stream = simulate_stream(sc);
  const std::string tag_path = args.path("tags.wttag");
  write_tag_file(stream, tag_path);
  write_metadata(stream_metadata(stream, sc), metadata_path(tag_path));
  std::printf("wrote %s (%zu records, %.6g s)\n", tag_path.c_str(),
              stream.tags.size(), stream.duration_s);
  return kExitOk;
}

// --------------------------------------------------------------------------
// g2

void write_g2_report(const std::string& path, const G2Fit& fit,
                     const SingleEmitterTest& verdict,
                     const SingleEmitterTest& raw_verdict) {
  std::ofstream f(path);
  f << "model: 1 + rho^2 (a exp(-|tau|/tau2) - (1+a) exp(-|tau|/tau1))\n";
  f << "status: " << to_string(fit.status) << "\n";
  f << "reduced_chi2: " << fmt(fit.reduced_chi2) << "\n";
  f << "chi2: " << fmt(fit.chi2) << "\n";
  f << "tau1_ns: " << fmt(fit.tau1_ns) << " +- " << fmt(fit.tau1_err) << "\n";
  f << "tau2_ns: " << fmt(fit.tau2_ns) << " +- " << fmt(fit.tau2_err) << "\n";
  f << "a: " << fmt(fit.a) << " +- " << fmt(fit.a_err) << "\n";
  f << "rho: " << fmt(fit.rho) << " +- " << fmt(fit.rho_err) << "\n";
  f << "g2_zero: " << fmt(fit.g2_zero) << " +- " << fmt(fit.g2_zero_err) << "\n";
  f << "single_emitter_fitted: "
    << (verdict.indeterminate ? "indeterminate" : verdict.passed ? "pass" : "fail")
    << " (margin " << fmt(verdict.margin) << ")\n";
  f << "single_emitter_raw_central_bin: "
    << (raw_verdict.indeterminate ? "indeterminate"
        : raw_verdict.passed      ? "pass"
                                  : "fail")
    << " (g2 " << fmt(raw_verdict.g2_zero) << ")\n";
}

int cmd_g2(const CommonArgs& args, const std::string& input, bool oracle) {
  args.expect_preset({"fig1e"});
  const json j = section(args.cfg, "g2");
  check_keys(j, {"input", "bin_width_ps", "tau_min_ns", "tau_max_ns", "oracle"},
             "g2");

  presets::G2Analysis analysis;
  if (args.preset != "fig1e") {
    analysis.tau_min_ps = -100'000;  // default window
    analysis.tau_max_ps = 100'000;
  }
  analysis.bin_width_ps = integer(j, "bin_width_ps", analysis.bin_width_ps);
  analysis.tau_min_ps =
      static_cast<std::int64_t>(num(j, "tau_min_ns", analysis.tau_min_ps * 1e-3) * 1e3);
  analysis.tau_max_ps =
      static_cast<std::int64_t>(num(j, "tau_max_ns", analysis.tau_max_ps * 1e-3) * 1e3);
  const bool use_oracle = oracle || flag(j, "oracle", false);

  std::string input_path = !input.empty() ? input : text(j, "input", "");
  TimeTagStream stream;
  if (input_path.empty()) {
    // No input file: generate the preset stream first.
    StreamConfig sc = presets::g2_stream(args.seed);
    apply_stream_overrides(sc, section(args.cfg, "simulate"), "simulate");
    sc.seed = args.seed;
    stream = simulate_stream(sc);
    const std::string tag_path = args.path("tags.wttag");
    write_tag_file(stream, tag_path);
    write_metadata(stream_metadata(stream, sc), metadata_path(tag_path));
  } else {
    try {
      stream = read_tag_file(input_path);
    } catch (const std::exception& e) {
      fail(kExitInput, e.what());
    }
  }

  CorrelationHistogram hist;
  try {
    hist = correlate_stream(stream, analysis.bin_width_ps, analysis.tau_min_ps,
                            analysis.tau_max_ps, use_oracle);
  } catch (const std::exception& e) {
    fail(kExitConfig, std::string("correlation setup: ") + e.what());
  }
  write_histogram_csv(hist, args.path("g2.csv"));

  const G2Fit g2fit = fit_g2(hist);
  const auto verdict = single_emitter_test(g2fit);
  const auto raw_verdict = single_emitter_test(hist);
  write_g2_report(args.path("g2_fit.txt"), g2fit, verdict, raw_verdict);
  std::printf("g2(0) = %s +- %s (%s)\n", fmt(g2fit.g2_zero).c_str(),
              fmt(g2fit.g2_zero_err).c_str(), std::string(to_string(g2fit.status)).c_str());
  return g2fit.ok() ? kExitOk : kExitFit;
}

// --------------------------------------------------------------------------
// lifetime

int cmd_lifetime(const CommonArgs& args) {
  args.expect_preset({"fig4b"});
  const json j = section(args.cfg, "lifetime");
  check_keys(j,
             {"tau_ns", "period_ns", "pickup_prob", "bin_width_ps",
              "target_photons", "background_cps", "jitter_sigma_ps"},
             "lifetime");

  std::vector<double> taus;
  if (args.preset == "fig4b")
    taus = {30.8, 12.7, 7.1};
  else
    taus = {num(j, "tau_ns", 12.7)};

  std::ofstream report(args.path("lifetime_fit.txt"));
  report << "model: A exp(-t/tau) + C\n";
  bool all_ok = true;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    auto preset = presets::pulsed_lifetime(
        taus[i], derive_seed(args.seed, "lifetime", i),
        num(j, "target_photons", 2e5));
    preset.period_ns = num(j, "period_ns", preset.period_ns);
    preset.pickup_prob = num(j, "pickup_prob", preset.pickup_prob);
    preset.bin_width_ps = integer(j, "bin_width_ps", preset.bin_width_ps);
    preset.config.background_cps =
        num(j, "background_cps", preset.config.background_cps);
    preset.config.jitter_sigma_ps =
        num(j, "jitter_sigma_ps", preset.config.jitter_sigma_ps);

    DecayHistogram hist;
    try {
      hist = simulate_pulsed(preset.config, preset.period_ns, preset.pickup_prob,
                             preset.bin_width_ps);
    } catch (const std::exception& e) {
      fail(kExitConfig, std::string("pulsed setup: ") + e.what());
    }
    const std::string name =
        taus.size() == 1 ? "lifetime.csv"
                         : "lifetime_" + std::to_string(i) + ".csv";
    {
      std::ofstream csv(args.path(name));
      csv << "time_ns,counts\n";
      const auto centers = hist.centers_ns();
      for (std::size_t b = 0; b < hist.counts.size(); ++b)
        csv << fmt(centers[b]) << "," << hist.counts[b] << "\n";
    }
    const LifetimeFit lf = fit_lifetime(hist);
    report << "generator_tau_ns: " << fmt(taus[i]) << "\n";
    report << "  status: " << to_string(lf.status) << "\n";
    report << "  tau_ns: " << fmt(lf.tau_ns) << " +- " << fmt(lf.tau_err_ns) << "\n";
    report << "  reduced_chi2: " << fmt(lf.reduced_chi2) << "\n";
    std::printf("tau %.4g ns -> fitted %.6g +- %.2g ns (%s)\n", taus[i], lf.tau_ns,
                lf.tau_err_ns, std::string(to_string(lf.status)).c_str());
    all_ok = all_ok && lf.ok();
  }
  return all_ok ? kExitOk : kExitFit;
}

// --------------------------------------------------------------------------
// saturation

int cmd_saturation(const CommonArgs& args) {
  args.expect_preset({"fig4a"});
  const json j = section(args.cfg, "saturation");
  check_keys(j, {"dwell_s", "dark_state"}, "saturation");

  const bool dark = flag(j, "dark_state", false);
  auto preset = presets::saturation(args.seed, dark);
  preset.dwell_s = num(j, "dwell_s", preset.dwell_s);

  const auto points =
      saturation_series(preset.base, preset.powers_uW, preset.dwell_s);
  {
    std::ofstream csv(args.path("saturation.csv"));
    csv << "power_uW,rate_cps,counts\n";
    for (const auto& p : points)
      csv << fmt(p.power_uW) << "," << fmt(p.rate_cps) << "," << p.counts << "\n";
  }
  const SaturationFit sf = fit_saturation(points);
  {
    std::ofstream report(args.path("saturation_fit.txt"));
    report << "model: I_sat / (1 + P_sat / P)\n";
    report << "status: " << to_string(sf.status) << "\n";
    report << "i_sat_cps: " << fmt(sf.i_sat_cps) << " +- " << fmt(sf.i_sat_err) << "\n";
    report << "p_sat_uW: " << fmt(sf.p_sat_uW) << " +- " << fmt(sf.p_sat_err) << "\n";
    report << "reduced_chi2: " << fmt(sf.reduced_chi2) << "\n";
    report << "dark_state: " << (dark ? "1" : "0") << "\n";
  }
  std::printf("I_sat = %s cps, P_sat = %s uW (%s)\n", fmt(sf.i_sat_cps).c_str(),
              fmt(sf.p_sat_uW).c_str(), std::string(to_string(sf.status)).c_str());
  return sf.ok() ? kExitOk : kExitFit;
}

// --------------------------------------------------------------------------
// polarization

int cmd_polarization(const CommonArgs& args) {
  args.expect_preset({"fig2"});
  const json j = section(args.cfg, "polarization");
  check_keys(j, {"i_max_cps", "visibility", "dwell_s", "n_emitters", "noise"},
             "polarization");
  const double dwell = num(j, "dwell_s", 5.0);
  const bool noise = flag(j, "noise", true);
  const int n_emitters =
      static_cast<int>(integer(j, "n_emitters", presets::kOrientationSampleSize));

  std::ofstream report(args.path("polarization_fit.txt"));
  report << "model: I_max [ (1-V)/(1+V) + 2V/(1+V) cos^2(theta - theta0) ]\n";
  bool all_ok = true;
  for (int which = 0; which < 2; ++which) {
    auto preset = presets::polarization(which);
    preset.i_max_cps = num(j, "i_max_cps", preset.i_max_cps);
    preset.visibility = num(j, "visibility", preset.visibility);
    auto diagram = malus_diagram(preset.theta0_deg, preset.i_max_cps * dwell,
                                 preset.visibility, preset.angles_deg);
    if (noise) {
      Rng rng(derive_seed(args.seed, "polarization", which));
      diagram.intensities = poisson_sample(diagram.intensities, rng);
    }
    write_diagram_csv(diagram,
                      args.path("polarization_dipole" + std::to_string(which) + ".csv"));
    const auto fitres = fit_polarization(diagram);
    report << "dipole" << which << ":\n";
    report << "  status: " << to_string(fitres.status) << "\n";
    report << "  theta0_deg: " << fmt(fitres.theta0_deg) << " +- "
           << fmt(fitres.theta0_err) << "\n";
    report << "  visibility: " << fmt(fitres.visibility) << " +- "
           << fmt(fitres.visibility_err) << "\n";
    all_ok = all_ok && fitres.ok();
  }

  // Unpolarized ensemble: equal-weight sum over the four axes.
  auto preset = presets::polarization(0);
  std::vector<double> total(preset.angles_deg.size(), 0.0);
  for (DipoleAxis axis : all_dipole_axes()) {
    const auto d = malus_diagram(project_to_001(axis), 0.25 * preset.i_max_cps * dwell,
                                 1.0, preset.angles_deg);
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += d.intensities[i];
  }
  PolarizationDiagram ensemble{preset.angles_deg, total};
  write_diagram_csv(ensemble, args.path("polarization_ensemble.csv"));
  const auto ens_fit = fit_polarization(ensemble);
  report << "ensemble:\n";
  report << "  status: " << to_string(ens_fit.status) << "\n";
  report << "  visibility: " << fmt(ens_fit.visibility) << "\n";

  const auto hist = orientation_histogram(n_emitters, derive_seed(args.seed, "orient"));
  {
    std::ofstream csv(args.path("orientation_histogram.csv"));
    csv << "angle_deg,count\n0," << hist.count_0deg << "\n90," << hist.count_90deg
        << "\n";
  }
  report << "orientation_histogram: n=" << hist.total() << " 0deg=" << hist.count_0deg
         << " 90deg=" << hist.count_90deg << "\n";
  std::printf("polarization outputs written to %s\n", args.out_dir.c_str());
  return all_ok ? kExitOk : kExitFit;
}

// --------------------------------------------------------------------------
// spectrum

int cmd_spectrum(const CommonArgs& args) {
  args.expect_preset({"fig3"});
  const json j = section(args.cfg, "spectrum");
  check_keys(j,
             {"zpl_energy_eV", "zpl_fwhm_meV", "debye_waller", "lvm_offset_meV",
              "temperature_K", "amplitude", "noise", "n_inhomogeneous",
              "spread_meV", "temperature_series"},
             "spectrum");

  SpectrumModel model = presets::spectrum_model();
  model.zpl_energy_eV = num(j, "zpl_energy_eV", model.zpl_energy_eV);
  model.zpl_fwhm_meV = num(j, "zpl_fwhm_meV", model.zpl_fwhm_meV);
  model.debye_waller = num(j, "debye_waller", model.debye_waller);
  model.lvm_offset_meV = num(j, "lvm_offset_meV", model.lvm_offset_meV);
  const double temperature = num(j, "temperature_K", 10.0);
  const double amplitude = num(j, "amplitude", 2.0e4);
  const bool noise = flag(j, "noise", false);
  const bool run_series = flag(j, "temperature_series", args.preset == "fig3");

  const auto grid = presets::spectrum_grid();
  Spectrum spectrum;
  try {
    spectrum = synth_spectrum(model, temperature, grid, amplitude);
  } catch (const std::exception& e) {
    fail(kExitConfig, std::string("spectrum setup: ") + e.what());
  }
  if (noise) spectrum = add_poisson_noise(spectrum, derive_seed(args.seed, "spectrum"));
  write_spectrum_csv(spectrum, args.path("spectrum.csv"), /*wavelength=*/true);

  const auto [wlo, whi] = presets::zpl_window();
  const auto zfit = fit_zpl(spectrum, wlo, whi);
  const auto dw = debye_waller(spectrum, wlo, whi);

  std::ofstream report(args.path("spectrum_fit.txt"));
  report << "zpl_fit_status: " << to_string(zfit.status) << "\n";
  report << "zpl_energy_eV: " << fmt(zfit.energy_eV) << " +- "
         << fmt(zfit.energy_err_eV) << "\n";
  report << "zpl_fwhm_meV: " << fmt(zfit.fwhm_meV) << " +- "
         << fmt(zfit.fwhm_err_meV) << "\n";
  report << "zpl_low_confidence: " << (zfit.low_confidence ? "1" : "0") << "\n";
  report << "debye_waller: " << (dw.valid ? fmt(dw.fraction) : "undefined") << "\n";

  const int n_inhom = static_cast<int>(integer(j, "n_inhomogeneous", 27));
  const double spread = num(j, "spread_meV", 1.0);
  const auto zpls =
      sample_inhomogeneous_zpl(n_inhom, spread, derive_seed(args.seed, "inhom"));
  {
    std::ofstream csv(args.path("zpl_positions.csv"));
    csv << "energy_eV\n";
    for (double e : zpls) csv << fmt(e) << "\n";
  }

  bool ok = zfit.ok();
  if (run_series) {
    const auto law = presets::temperature_law();
    const auto temps = presets::temperature_scan();
    Rng rng(derive_seed(args.seed, "temperature"));
    std::vector<double> shifts, widths;
    std::ofstream csv(args.path("temperature_series.csv"));
    csv << "temperature_K,zpl_shift_meV,zpl_fwhm_meV\n";
    for (double t : temps) {
      const auto [s, w] = temperature_response(law, t);
      shifts.push_back(s + 0.01 * rng.normal());
      widths.push_back(w + 0.005 * rng.normal());
      csv << fmt(t) << "," << fmt(shifts.back()) << "," << fmt(widths.back()) << "\n";
    }
    const auto tf = fit_temperature(temps, shifts, widths, 3);
    report << "temperature_fit_status: " << to_string(tf.status) << "\n";
    if (tf.ok()) {
      for (std::size_t i = 0; i < tf.law.shift_coeffs.size(); ++i)
        report << "shift_c" << (i + 1) << ": " << fmt(tf.law.shift_coeffs[i])
               << " +- " << fmt(tf.shift_errs[i]) << "\n";
      report << "gamma0_meV: " << fmt(tf.law.gamma0_meV) << " +- "
             << fmt(tf.width_errs[0]) << "\n";
      for (std::size_t i = 0; i < tf.law.width_coeffs.size(); ++i)
        report << "width_c" << (i + 1) << ": " << fmt(tf.law.width_coeffs[i])
               << " +- " << fmt(tf.width_errs[i + 1]) << "\n";
    }
    ok = ok && tf.ok();
  }
  std::printf("spectrum outputs written to %s\n", args.out_dir.c_str());
  return ok ? kExitOk : kExitFit;
}

// --------------------------------------------------------------------------
// scan

int cmd_scan(const CommonArgs& args) {
  args.expect_preset({"fig1a"});
  const json j = section(args.cfg, "scan");
  check_keys(j,
             {"field", "n_emitters", "psf_sigma_um", "pitch_um", "dwell_s",
              "threshold_sigma"},
             "scan");

  const std::string field_kind =
      text(j, "field", args.preset == "fig1a" ? "implanted" : "sparse");
  EmitterField field;
  if (field_kind == "implanted")
    field = presets::implanted_field(args.seed);
  else if (field_kind == "sparse")
    field = presets::sparse_field(
        args.seed, static_cast<int>(integer(j, "n_emitters", 12)));
  else
    fail(kExitConfig, "scan field must be 'implanted' or 'sparse'");

  auto geo = presets::scan_geometry();
  geo.psf_sigma_um = num(j, "psf_sigma_um", geo.psf_sigma_um);
  geo.pitch_um = num(j, "pitch_um", geo.pitch_um);
  geo.dwell_s = num(j, "dwell_s", geo.dwell_s);
  const double threshold = num(j, "threshold_sigma", 5.0);

  ScanMap map;
  try {
    map = simulate_scan(field, geo.psf_sigma_um, geo.pitch_um, geo.dwell_s,
                        derive_seed(args.seed, "scan"));
  } catch (const std::exception& e) {
    fail(kExitConfig, std::string("scan setup: ") + e.what());
  }
  if (map.undersampled)
    std::fprintf(stderr, "warning: pixel pitch exceeds 2 x PSF sigma (undersampled)\n");

  write_map_csv(map, args.path("scan.csv"));
  write_map_pgm(map, args.path("scan.pgm"));
  const auto spots = detect_hotspots(map, threshold);
  write_hotspots_csv(spots, args.path("hotspots.csv"));

  std::ofstream report(args.path("scan_report.txt"));
  report << "field: " << field_kind << "\n";
  report << "emitters: " << field.emitters.size() << "\n";
  report << "pixels: " << map.nx << "x" << map.ny << "\n";
  report << "threshold_sigma: " << fmt(threshold) << "\n";
  report << "hotspots: " << spots.size() << "\n";
  std::printf("scan: %zu hotspots at %.3g sigma\n", spots.size(), threshold);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"single-photon emitter simulation and analysis toolkit"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string g2_input;
  bool g2_oracle = false;

  const auto add_common = [&](CLI::App* sub, std::initializer_list<const char*> presets) {
    sub->add_option("--config", args.config_path, "JSON config file");
    sub->add_option("--seed", args.seed, "master seed")
        ->each([&](const std::string&) { args.seed_from_flag = true; });
    sub->add_option("--out", args.out_dir, "output directory")
        ->each([&](const std::string&) { args.out_from_flag = true; });
    std::set<std::string> names(presets.begin(), presets.end());
    sub->add_option("--preset", args.preset, "figure preset")
        ->check(CLI::IsMember(names));
  };

  auto* simulate = app.add_subcommand("simulate", "generate a time-tag stream");
  add_common(simulate, {"fig1e"});
  auto* g2 = app.add_subcommand("g2", "correlate a stream and fit g2(tau)");
  add_common(g2, {"fig1e"});
  g2->add_option("--input", g2_input, "WTTAG001 time-tag file");
  g2->add_flag("--oracle", g2_oracle, "use the brute-force reference correlator");
  auto* lifetime = app.add_subcommand("lifetime", "pulsed decay histogram and fit");
  add_common(lifetime, {"fig4b"});
  auto* saturation = app.add_subcommand("saturation", "PL saturation curve and fit");
  add_common(saturation, {"fig4a"});
  auto* polarization =
      app.add_subcommand("polarization", "emission polarization diagrams");
  add_common(polarization, {"fig2"});
  auto* spectrum = app.add_subcommand("spectrum", "PL spectrum, ZPL fit, DW fraction");
  add_common(spectrum, {"fig3"});
  auto* scan = app.add_subcommand("scan", "confocal raster scan and hotspots");
  add_common(scan, {"fig1a"});

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    args.resolve();
    if (simulate->parsed()) return cmd_simulate(args);
    if (g2->parsed()) return cmd_g2(args, g2_input, g2_oracle);
    if (lifetime->parsed()) return cmd_lifetime(args);
    if (saturation->parsed()) return cmd_saturation(args);
    if (polarization->parsed()) return cmd_polarization(args);
    if (spectrum->parsed()) return cmd_spectrum(args);
    if (scan->parsed()) return cmd_scan(args);
  } catch (const CliError& e) {
    std::fprintf(stderr, "error: %s\n", e.message.c_str());
    return e.code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  }
  return kExitConfig;
}
