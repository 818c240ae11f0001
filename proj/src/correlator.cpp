#include "wsim/correlator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace wsim {

namespace {

// Bin index for a delay: |k| = (2|d| + w) / (2w), sign of d.  Bin k covers
// (k w - w/2, k w + w/2] for k > 0, mirrored for k < 0, open around the
// central bin, which keeps the histogram exactly mirror symmetric.
inline std::int64_t bin_index(std::int64_t delta, std::int64_t width) {
  const std::int64_t mag =
      (2 * (delta < 0 ? -delta : delta) + width) / (2 * width);
  return delta < 0 ? -mag : mag;
}

struct BinLayout {
  std::int64_t k_min, k_max;
  std::int64_t lo2, hi2;  // conservative scan window on 2*delta; the exact
                          // membership test is the bin_index range check
};

BinLayout make_layout(std::int64_t bin_width_ps, std::int64_t tau_min_ps,
                      std::int64_t tau_max_ps) {
  if (bin_width_ps <= 0) throw std::invalid_argument("bin width must be > 0");
  if (tau_max_ps < tau_min_ps)
    throw std::invalid_argument("empty delay range");
  const auto ceil_div = [](std::int64_t a, std::int64_t b) {
    return a >= 0 ? (a + b - 1) / b : -((-a) / b);
  };
  const auto floor_div = [](std::int64_t a, std::int64_t b) {
    return a >= 0 ? a / b : -((-a + b - 1) / b);
  };
  BinLayout l;
  l.k_min = ceil_div(tau_min_ps, bin_width_ps);
  l.k_max = floor_div(tau_max_ps, bin_width_ps);
  if (l.k_min > l.k_max)
    throw std::invalid_argument("delay range does not contain any bin center");
  l.lo2 = (2 * l.k_min - 2) * bin_width_ps;
  l.hi2 = (2 * l.k_max + 2) * bin_width_ps;
  return l;
}

void normalize(CorrelationHistogram& h, std::size_t n_a, std::size_t n_b) {
  const std::size_t n_bins = h.raw.size();
  h.g2.assign(n_bins, 0.0);
  h.g2_err.assign(n_bins, 0.0);
  if (h.total_time_s <= 0 || n_a == 0 || n_b == 0) {
    h.g2_valid = false;
    h.rate_a_cps = 0.0;
    h.rate_b_cps = 0.0;
    return;
  }
  h.rate_a_cps = static_cast<double>(n_a) / h.total_time_s;
  h.rate_b_cps = static_cast<double>(n_b) / h.total_time_s;
  const double norm = h.rate_a_cps * h.rate_b_cps * h.total_time_s *
                      static_cast<double>(h.bin_width_ps) * 1e-12;
  for (std::size_t i = 0; i < n_bins; ++i) {
    h.g2[i] = static_cast<double>(h.raw[i]) / norm;
    h.g2_err[i] =
        std::sqrt(std::max(static_cast<double>(h.raw[i]), 1.0)) / norm;
  }
  h.g2_valid = true;
}

}  // namespace

CorrelationHistogram correlate(std::span<const TimeTag> a,
                               std::span<const TimeTag> b, double total_time_s,
                               std::int64_t bin_width_ps, std::int64_t tau_min_ps,
                               std::int64_t tau_max_ps) {
  const auto by_time = [](const TimeTag& x, const TimeTag& y) {
    return x.t_ps < y.t_ps;
  };
  if (!std::is_sorted(a.begin(), a.end(), by_time) ||
      !std::is_sorted(b.begin(), b.end(), by_time))
    throw std::invalid_argument("correlate requires time-sorted streams");
  const BinLayout l = make_layout(bin_width_ps, tau_min_ps, tau_max_ps);
  CorrelationHistogram h;
  h.bin_width_ps = bin_width_ps;
  h.k_min = l.k_min;
  h.k_max = l.k_max;
  h.total_time_s = total_time_s;
  h.raw.assign(static_cast<std::size_t>(l.k_max - l.k_min + 1), 0);

  // Sliding window: for each tag in A, the B tags with 2(t_b - t_a) in
  // (lo2, hi2) form a contiguous run whose start only moves forward.
  std::size_t start = 0;
  for (const TimeTag& ta : a) {
    while (start < b.size() && 2 * (b[start].t_ps - ta.t_ps) <= l.lo2) ++start;
    for (std::size_t j = start; j < b.size(); ++j) {
      const std::int64_t delta = b[j].t_ps - ta.t_ps;
      if (2 * delta >= l.hi2) break;
      const std::int64_t k = bin_index(delta, bin_width_ps);
      if (k >= l.k_min && k <= l.k_max)
        ++h.raw[static_cast<std::size_t>(k - l.k_min)];
    }
  }
  normalize(h, a.size(), b.size());
  return h;
}

CorrelationHistogram correlate_bruteforce(std::span<const TimeTag> a,
                                          std::span<const TimeTag> b,
                                          double total_time_s,
                                          std::int64_t bin_width_ps,
                                          std::int64_t tau_min_ps,
                                          std::int64_t tau_max_ps) {
  const BinLayout l = make_layout(bin_width_ps, tau_min_ps, tau_max_ps);
  CorrelationHistogram h;
  h.bin_width_ps = bin_width_ps;
  h.k_min = l.k_min;
  h.k_max = l.k_max;
  h.total_time_s = total_time_s;
  h.raw.assign(static_cast<std::size_t>(l.k_max - l.k_min + 1), 0);

  for (const TimeTag& ta : a)
    for (const TimeTag& tb : b) {
      const std::int64_t k = bin_index(tb.t_ps - ta.t_ps, bin_width_ps);
      if (k >= l.k_min && k <= l.k_max)
        ++h.raw[static_cast<std::size_t>(k - l.k_min)];
    }
  normalize(h, a.size(), b.size());
  return h;
}

CorrelationHistogram correlate_stream(const TimeTagStream& stream,
                                      std::int64_t bin_width_ps,
                                      std::int64_t tau_min_ps,
                                      std::int64_t tau_max_ps, bool bruteforce) {
  const std::vector<TimeTag> a = channel_tags(stream, 0);
  const std::vector<TimeTag> b = channel_tags(stream, 1);
  return bruteforce ? correlate_bruteforce(a, b, stream.duration_s, bin_width_ps,
                                           tau_min_ps, tau_max_ps)
                    : correlate(a, b, stream.duration_s, bin_width_ps, tau_min_ps,
                                tau_max_ps);
}

double G2Fit::eval(double tau_ns) const {
  const double t = std::fabs(tau_ns);
  return 1.0 + rho * rho *
                   (a * std::exp(-t / tau2_ns) - (1.0 + a) * std::exp(-t / tau1_ns));
}

double G2Fit::max_value(double tau_max_ns) const {
  double best = 0.0;
  const int n = 2000;
  for (int i = 1; i <= n; ++i)
    best = std::max(best, eval(tau_max_ns * i / n));
  return best;
}

namespace {

// Mean of exp(-|tau|/T) over a bin of half-width h centered at tc; this is
// what an ideal coincidence histogram records, cusp included.
double bin_averaged_exp(double tc, double h, double T) {
  const double t = std::fabs(tc);
  if (t < h) return -std::expm1(-h / T) * T / h;  // central bin
  return -std::exp(-(t - h) / T) * std::expm1(-2.0 * h / T) * T / (2.0 * h);
}

}  // namespace

G2Fit fit_g2(const CorrelationHistogram& hist) {
  G2Fit out;
  if (!hist.g2_valid) return out;
  if (hist.size() < 20)
    throw std::invalid_argument(
        "fit_g2 needs at least 20 bins covering dip and shoulder");

  // Fit the bin-averaged model: evaluating the cusped curve at bin centers
  // would bias g2(0) and tau1 at fine statistics.
  const double half_bin_ns = static_cast<double>(hist.bin_width_ps) * 1e-3 / 2.0;
  Model averaged;
  averaged.n_params = 4;
  averaged.param_names = {"tau1", "tau2", "a", "rho"};
  averaged.eval = [half_bin_ns](double x, std::span<const double> p) {
    const double e1 = bin_averaged_exp(x, half_bin_ns, p[0]);
    const double e2 = bin_averaged_exp(x, half_bin_ns, p[1]);
    return 1.0 + p[3] * p[3] * (p[2] * e2 - (1.0 + p[2]) * e1);
  };

  FitProblem prob;
  prob.custom = &averaged;
  prob.x.reserve(hist.size());
  for (std::size_t i = 0; i < hist.size(); ++i) {
    prob.x.push_back(hist.tau_ns(i));
    prob.y.push_back(hist.g2[i]);
    prob.y_err.push_back(hist.g2_err[i]);
  }
  const double inf = std::numeric_limits<double>::infinity();
  prob.bounds = {{1e-6, inf}, {1e-6, inf}, {-inf, inf}, {0.0, 1.0}};
  auto guess = initial_guess("g2_three_level", prob.x, prob.y);
  if (!guess) return out;
  (*guess)[3] = std::clamp((*guess)[3], 1e-3, 1.0 - 1e-9);
  prob.initial = *guess;

  const FitResult res = fit(prob);
  out.status = res.status;
  out.chi2 = res.chi2;
  out.reduced_chi2 = res.reduced_chi2;
  if (res.params.size() == 4) {
    out.tau1_ns = res.params[0];
    out.tau2_ns = res.params[1];
    out.a = res.params[2];
    out.rho = res.params[3];
    out.tau1_err = res.errors[0];
    out.tau2_err = res.errors[1];
    out.a_err = res.errors[2];
    out.rho_err = res.errors[3];
    out.g2_zero = 1.0 - out.rho * out.rho;
    out.g2_zero_err = 2.0 * out.rho * out.rho_err;
  }
  return out;
}

SingleEmitterTest single_emitter_test(double g2_zero, double sigma, double k) {
  SingleEmitterTest t;
  if (!std::isfinite(g2_zero) || !std::isfinite(sigma)) {
    t.indeterminate = true;
    return t;
  }
  t.g2_zero = g2_zero;
  t.sigma = sigma;
  t.margin = 0.5 - g2_zero;
  t.passed = g2_zero + k * sigma < 0.5;
  return t;
}

SingleEmitterTest single_emitter_test(const G2Fit& fit, double k) {
  if (!fit.ok()) {
    SingleEmitterTest t;
    t.indeterminate = true;
    return t;
  }
  return single_emitter_test(fit.g2_zero, fit.g2_zero_err, k);
}

SingleEmitterTest single_emitter_test(const CorrelationHistogram& hist, double k) {
  SingleEmitterTest t;
  if (!hist.g2_valid || hist.k_min > 0 || hist.k_max < 0) {
    t.indeterminate = true;
    return t;
  }
  const std::size_t c = hist.center_index();
  return single_emitter_test(hist.g2[c], hist.g2_err[c], k);
}

void write_histogram_csv(const CorrelationHistogram& hist, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << "tau_ps,raw,g2,g2_err\n";
  char line[128];
  for (std::size_t i = 0; i < hist.size(); ++i) {
    const std::int64_t tau =
        (hist.k_min + static_cast<std::int64_t>(i)) * hist.bin_width_ps;
    std::snprintf(line, sizeof line, "%lld,%lld,%.10g,%.10g\n",
                  static_cast<long long>(tau),
                  static_cast<long long>(hist.raw[i]), hist.g2[i], hist.g2_err[i]);
    f << line;
  }
}

}  // namespace wsim
