#include "wsim/kinetics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace wsim {

void ThreeLevelRates::validate() const {
  if (pump < 0 || decay < 0 || shelve < 0 || deshelve < 0)
    throw std::invalid_argument("ThreeLevelRates: rates must be >= 0");
  if (decay <= 0)
    throw std::invalid_argument("ThreeLevelRates: radiative decay must be > 0");
  if (shelve > 0 && deshelve <= 0)
    throw std::invalid_argument(
        "ThreeLevelRates: shelving without deshelving would trap the emitter");
}

void PowerModel::validate() const {
  if (sigma <= 0) throw std::invalid_argument("PowerModel: sigma must be > 0");
  if (detection_efficiency <= 0 || detection_efficiency > 1)
    throw std::invalid_argument("PowerModel: detection efficiency in (0, 1]");
}

Populations steady_state(const ThreeLevelRates& rates) {
  rates.validate();
  if (rates.pump <= 0) return {1.0, 0.0, 0.0};
  const double occ2 = rates.pump / (rates.decay + rates.shelve);
  const double occ3 = rates.shelve > 0 ? occ2 * rates.shelve / rates.deshelve : 0.0;
  const double norm = 1.0 + occ2 + occ3;
  return {1.0 / norm, occ2 / norm, occ3 / norm};
}

namespace {

// Reduced dynamics of (p2, p3) after eliminating p1 by normalization:
//   d/dt (p2, p3) = M (p2, p3) + (pump, 0),
//   M = [[-(pump+decay+shelve), -pump], [shelve, -deshelve]].
// g2(t) is p2(t)/p2_ss from the ground state, which works out to
//   g2(t) = 1 - u(t) + cv * v(t)
// with h = tr(M)/2, q^2 = h^2 - det(M),
//   u(t) = e^{ht} cosh(qt),  v(t) = e^{ht} sinh(qt)/q,
//   cv = (pump / p2_ss) + h  (finite even as pump -> 0).
struct ReducedForm {
  double h, q2, cv;
};

ReducedForm reduced_form(const ThreeLevelRates& r) {
  const double sum3 = r.pump + r.decay + r.shelve;
  const double h = -0.5 * (sum3 + r.deshelve);
  const double det = sum3 * r.deshelve + r.pump * r.shelve;
  const double occ2 = r.pump / (r.decay + r.shelve);
  const double occ3 = r.shelve > 0 ? occ2 * r.shelve / r.deshelve : 0.0;
  const double norm = 1.0 + occ2 + occ3;
  // pump / p2_ss = norm * (decay + shelve), with the pump cancelled exactly.
  const double cv = norm * (r.decay + r.shelve) + h;
  return {h, h * h - det, cv};
}

}  // namespace

double analytic_g2(const ThreeLevelRates& rates, double tau_ns) {
  rates.validate();
  const double t = std::fabs(tau_ns) * 1e-9;
  if (t == 0.0) return 0.0;
  const auto [h, q2, cv] = reduced_form(rates);

  double u, v;
  const double qmag = std::sqrt(std::fabs(q2));
  if (q2 > 0 && qmag > 1e-9 * std::fabs(h)) {
    const double lam_slow = h + qmag;
    const double lam_fast = h - qmag;
    const double e_fast = std::exp(lam_fast * t);
    if (2.0 * qmag * t > 700.0) {  // slow mode dominates; fast one underflowed
      const double e_slow = std::exp(lam_slow * t);
      u = 0.5 * (e_slow + e_fast);
      v = (e_slow - e_fast) / (2.0 * qmag);
    } else {
      u = e_fast * (1.0 + 0.5 * std::expm1(2.0 * qmag * t));
      v = e_fast * std::expm1(2.0 * qmag * t) / (2.0 * qmag);
    }
  } else if (q2 < 0 && qmag > 1e-9 * std::fabs(h)) {
    // Complex eigenvalue pair: damped oscillation.
    u = std::exp(h * t) * std::cos(qmag * t);
    v = std::exp(h * t) * std::sin(qmag * t) / qmag;
  } else {
    // Confluent (near-degenerate) limit.
    u = std::exp(h * t);
    v = t * std::exp(h * t);
  }
  const double g2 = 1.0 - u + cv * v;
  return g2 > 0.0 ? g2 : 0.0;
}

G2Curve analytic_g2_curve(const ThreeLevelRates& rates,
                          const std::vector<double>& delays_ns) {
  G2Curve curve;
  curve.delays_ns = delays_ns;
  curve.values.reserve(delays_ns.size());
  for (double tau : delays_ns) curve.values.push_back(analytic_g2(rates, tau));
  return curve;
}

G2Form g2_closed_form(const ThreeLevelRates& rates) {
  rates.validate();
  const auto [h, q2, cv] = reduced_form(rates);
  G2Form form;
  if (q2 < 0) {
    form.oscillatory = true;
    return form;
  }
  const double q = std::sqrt(q2);
  const double lam_slow = h + q;
  const double lam_fast = h - q;
  form.tau1_ns = -1e9 / lam_fast;
  if (lam_slow < 0) {
    form.tau2_ns = -1e9 / lam_slow;
    form.a = q > 0 ? 0.5 * (cv / q - 1.0) : 0.0;
  } else {
    // Slow mode does not relax (no shelving cycle): pure two-level shape.
    form.tau2_ns = std::numeric_limits<double>::infinity();
    form.a = 0.0;
  }
  return form;
}

double background_mixed_g2(double g2_true, double signal_fraction) {
  if (signal_fraction < 0 || signal_fraction > 1)
    throw std::invalid_argument("signal fraction must be in [0, 1]");
  return 1.0 + signal_fraction * signal_fraction * (g2_true - 1.0);
}

double saturation_curve(double power_uW, double i_sat_cps, double p_sat_uW) {
  if (power_uW < 0) throw std::invalid_argument("power must be >= 0");
  if (i_sat_cps <= 0 || p_sat_uW <= 0)
    throw std::invalid_argument("saturation parameters must be > 0");
  if (power_uW == 0) return 0.0;
  return i_sat_cps / (1.0 + p_sat_uW / power_uW);
}

double detected_rate(const ThreeLevelRates& rates, const PowerModel& power,
                     double background_cps) {
  power.validate();
  if (background_cps < 0)
    throw std::invalid_argument("background rate must be >= 0");
  const Populations p = steady_state(rates);
  return power.detection_efficiency * rates.decay * p.excited + background_cps;
}

}  // namespace wsim
