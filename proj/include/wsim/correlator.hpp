#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wsim/fitting.hpp"
#include "wsim/photon_stream.hpp"

// Normalized second-order correlation g2(tau) between two sorted tag streams.
// Full cross-correlation (every ordered pair inside the delay window, not
// start-stop), accumulated by a sorted two-pointer sliding window in
// O(N * tags-per-window).  correlate_bruteforce is the O(N^2) reference; the
// two must agree bin-exactly.
//
// Bins are centered on multiples of the bin width; edge ties round away from
// zero on both sides, so the central bin sits symmetrically on tau = 0 and
// correlate(A,B) at +tau equals correlate(B,A) at -tau bin-exactly.

namespace wsim {

struct CorrelationHistogram {
  std::int64_t bin_width_ps = 1;
  std::int64_t k_min = 0;  ///< first bin center index (center at k * bin_width)
  std::int64_t k_max = -1;
  std::vector<std::int64_t> raw;  ///< coincidence counts per bin
  std::vector<double> g2;         ///< raw / (r_A r_B T w); zeros when invalid
  std::vector<double> g2_err;     ///< Poisson error sqrt(raw)/norm
  double rate_a_cps = 0.0;
  double rate_b_cps = 0.0;
  double total_time_s = 0.0;
  bool g2_valid = false;  ///< false when either stream is empty

  std::size_t size() const { return raw.size(); }
  double tau_ns(std::size_t i) const {
    return static_cast<double>(k_min + static_cast<std::int64_t>(i)) *
           static_cast<double>(bin_width_ps) * 1e-3;
  }
  /// Index of the bin centered on tau = 0; requires k_min <= 0 <= k_max.
  std::size_t center_index() const { return static_cast<std::size_t>(-k_min); }
};

/// Delay histogram of ordered pairs (t_b - t_a) within [tau_min, tau_max];
/// the histogram keeps every bin whose center lies inside the range.
CorrelationHistogram correlate(std::span<const TimeTag> a,
                               std::span<const TimeTag> b, double total_time_s,
                               std::int64_t bin_width_ps, std::int64_t tau_min_ps,
                               std::int64_t tau_max_ps);

/// O(N^2) reference with identical binning and normalization.
CorrelationHistogram correlate_bruteforce(std::span<const TimeTag> a,
                                          std::span<const TimeTag> b,
                                          double total_time_s,
                                          std::int64_t bin_width_ps,
                                          std::int64_t tau_min_ps,
                                          std::int64_t tau_max_ps);

/// HBT convenience: channel 0 versus channel 1 of one stream.
CorrelationHistogram correlate_stream(const TimeTagStream& stream,
                                      std::int64_t bin_width_ps,
                                      std::int64_t tau_min_ps,
                                      std::int64_t tau_max_ps,
                                      bool bruteforce = false);

struct G2Fit {
  double tau1_ns = 0.0, tau1_err = 0.0;
  double tau2_ns = 0.0, tau2_err = 0.0;
  double a = 0.0, a_err = 0.0;
  double rho = 0.0, rho_err = 0.0;
  double g2_zero = 1.0;      ///< fitted curve at tau = 0, i.e. 1 - rho^2
  double g2_zero_err = 0.0;
  double chi2 = 0.0;         ///< best residual, reported also on non-convergence
  double reduced_chi2 = 0.0;
  FitStatus status = FitStatus::invalid_data;
  bool ok() const { return status == FitStatus::converged; }

  double eval(double tau_ns) const;
  /// Maximum of the fitted curve over |tau| in (0, tau_max_ns].
  double max_value(double tau_max_ns) const;
};

/// Background-mixed three-level fit
///   g2(tau) = 1 + rho^2 [ a e^{-|tau|/tau2} - (1+a) e^{-|tau|/tau1} ].
/// Requires >= 20 valid bins.
G2Fit fit_g2(const CorrelationHistogram& hist);

struct SingleEmitterTest {
  bool passed = false;
  bool indeterminate = false;
  double g2_zero = 0.0;
  double sigma = 0.0;
  double margin = 0.0;  ///< 0.5 - g2_zero
};

/// True iff g2(0) + k sigma < 0.5 (single-photon emission threshold).
SingleEmitterTest single_emitter_test(double g2_zero, double sigma, double k = 2.0);
SingleEmitterTest single_emitter_test(const G2Fit& fit, double k = 2.0);
/// Raw variant using the central bin of the histogram.
SingleEmitterTest single_emitter_test(const CorrelationHistogram& hist,
                                      double k = 2.0);

/// Histogram CSV: tau_ps, raw, g2, g2_err.
void write_histogram_csv(const CorrelationHistogram& hist, const std::string& path);

}  // namespace wsim
