#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "wsim/correlator.hpp"
#include "wsim/dipole.hpp"
#include "wsim/kinetics.hpp"
#include "wsim/photon_stream.hpp"
#include "wsim/scan.hpp"
#include "wsim/spectra.hpp"
#include "wsim/timetag_io.hpp"

// Edge cases and contract enforcement across modules.

using namespace wsim;
namespace fs = std::filesystem;

TEST_CASE("analytic g2 limit at zero pump is finite and well behaved") {
  const ThreeLevelRates rates{.pump = 0.0, .decay = 1e8, .shelve = 1e6, .deshelve = 1e7};
  CHECK(analytic_g2(rates, 0.0) == 0.0);
  for (double tau : {0.1, 1.0, 10.0, 1000.0}) {
    const double g = analytic_g2(rates, tau);
    CHECK(std::isfinite(g));
    CHECK(g >= 0.0);
  }
  CHECK(analytic_g2(rates, 1e6) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("correlate rejects unsorted streams and empty bin ranges") {
  std::vector<TimeTag> sorted{{100, 0, 0, 0}, {200, 0, 0, 0}};
  std::vector<TimeTag> unsorted{{200, 0, 0, 0}, {100, 0, 0, 0}};
  CHECK_THROWS_AS(correlate(unsorted, sorted, 1.0, 10, -100, 100),
                  std::invalid_argument);
  CHECK_THROWS_AS(correlate(sorted, unsorted, 1.0, 10, -100, 100),
                  std::invalid_argument);
  // No bin center inside the range.
  CHECK_THROWS_AS(correlate(sorted, sorted, 1.0, 1000, 1, 999),
                  std::invalid_argument);
  CHECK_THROWS_AS(correlate(sorted, sorted, 1.0, 0, -100, 100),
                  std::invalid_argument);
  CHECK_THROWS_AS(correlate(sorted, sorted, 1.0, 10, 100, -100),
                  std::invalid_argument);
}

TEST_CASE("fit_g2 requires enough bins to span dip and shoulder") {
  CorrelationHistogram hist;
  hist.bin_width_ps = 1000;
  hist.k_min = -5;
  hist.k_max = 5;
  hist.g2_valid = true;
  hist.raw.assign(11, 100);
  hist.g2.assign(11, 1.0);
  hist.g2_err.assign(11, 0.1);
  hist.rate_a_cps = hist.rate_b_cps = 1e5;
  hist.total_time_s = 1.0;
  CHECK_THROWS_AS(fit_g2(hist), std::invalid_argument);
}

TEST_CASE("stream config contract violations throw") {
  StreamConfig cfg;
  cfg.rates = {.pump = 1e6, .decay = 1e8};
  cfg.duration_s = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.duration_s = 1.0;
  cfg.splitter_ratio = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.splitter_ratio = 0.5;
  cfg.dark_rate = 1.0;  // blinking needs a recovery path
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.dark_recovery = 1.0;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("orientation histogram and zpl sampling reject degenerate sizes") {
  CHECK_THROWS_AS(orientation_histogram(0, 1), std::invalid_argument);
  CHECK_THROWS_AS(sample_inhomogeneous_zpl(0, 1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(sample_inhomogeneous_zpl(5, 0.0, 1), std::invalid_argument);
}

TEST_CASE("empty tag files round trip") {
  const auto path = (fs::temp_directory_path() / "wsim_empty.wttag").string();
  TimeTagStream empty;
  empty.duration_s = 1.0;
  write_tag_file(empty, path);
  const auto loaded = read_tag_file(path);
  CHECK(loaded.tags.empty());
  CHECK(fs::file_size(path) == 8);
  fs::remove(path);
}

TEST_CASE("pgm export carries a valid header and plateau grayscale") {
  EmitterField field;
  field.width_um = 5.0;
  field.height_um = 5.0;
  field.background_cps = 100.0;
  field.emitters.push_back({2.5, 2.5, 5000.0, DipoleAxis::p111, 1.018});
  const auto map = expected_scan(field, 0.31, 0.5, 1.0);
  const auto path = (fs::temp_directory_path() / "wsim_test.pgm").string();
  write_map_pgm(map, path);
  std::ifstream f(path);
  std::string magic;
  int nx = 0, ny = 0, maxval = 0;
  f >> magic >> nx >> ny >> maxval;
  CHECK(magic == "P2");
  CHECK(nx == map.nx);
  CHECK(ny == map.ny);
  CHECK(maxval == 255);
  int peak = 0, v = 0;
  while (f >> v) peak = std::max(peak, v);
  CHECK(peak == 255);  // brightest pixel maps to full scale
  fs::remove(path);
}

TEST_CASE("debye_waller flags an undefined fraction on non-positive totals") {
  Spectrum s;
  s.energies_eV = {1.0, 1.01, 1.02};
  s.intensities = {0.0, 0.0, 0.0};
  CHECK(!debye_waller(s, 1.0, 1.02).valid);
  Spectrum tiny;
  tiny.energies_eV = {1.0};
  tiny.intensities = {1.0};
  CHECK(!debye_waller(tiny, 0.9, 1.1).valid);
}

TEST_CASE("saturation curve and malus diagrams reject invalid parameters") {
  CHECK_THROWS_AS(saturation_curve(-1.0, 6000, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(saturation_curve(1.0, 0.0, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(saturation_curve(1.0, 6000, 0.0), std::invalid_argument);
  std::vector<double> angles{0, 45, 90};
  CHECK_THROWS_AS(malus_diagram(0.0, 100.0, 1.5, angles), std::invalid_argument);
  CHECK_THROWS_AS(malus_diagram(0.0, -5.0, 0.5, angles), std::invalid_argument);
}

TEST_CASE("emitter fields reject out-of-extent positions") {
  EmitterField field;
  field.width_um = 10.0;
  field.height_um = 10.0;
  field.emitters.push_back({12.0, 5.0, 100.0, DipoleAxis::p111, 1.018});
  CHECK_THROWS_AS(field.validate(), std::invalid_argument);
}
