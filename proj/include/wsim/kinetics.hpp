#pragma once

#include <vector>

// Analytic three-level emitter model: ground (1), radiative excited (2) and a
// metastable shelving level (3).  Everything here is closed form; the
// stochastic counterpart lives in photon_stream.

namespace wsim {

/// Transition rates of the optical cycle, all in 1/s.
struct ThreeLevelRates {
  double pump = 0.0;      ///< ground -> excited, power dependent
  double decay = 0.0;     ///< excited -> ground, radiative (1 / excited-state lifetime)
  double shelve = 0.0;    ///< excited -> metastable (intersystem crossing)
  double deshelve = 0.0;  ///< metastable -> ground

  /// Throws std::invalid_argument when rates are negative, decay is zero, or
  /// shelving is enabled without a deshelving path back.
  void validate() const;
};

struct PowerModel {
  double sigma = 1.0e7;                ///< pump rate per microwatt, 1/(s*uW)
  double detection_efficiency = 0.10;  ///< total detection efficiency, (0, 1]

  double pump_rate(double power_uW) const { return sigma * power_uW; }
  void validate() const;
};

struct Populations {
  double ground, excited, shelved;
};

struct G2Curve {
  std::vector<double> delays_ns;
  std::vector<double> values;
};

/// Decomposition g2(t) = 1 - (1+a) exp(-t/tau1) + a exp(-t/tau2).
/// Invalid when the rate matrix has complex eigenvalues (oscillatory) or the
/// slow mode does not decay (tau2 infinite, a = 0).
struct G2Form {
  double tau1_ns = 0.0;  ///< fast (antibunching) time constant
  double tau2_ns = 0.0;  ///< slow (bunching) time constant
  double a = 0.0;        ///< bunching amplitude
  bool oscillatory = false;
};

/// Steady-state occupation of the three levels.  pump == 0 gives (1, 0, 0).
Populations steady_state(const ThreeLevelRates& rates);

/// Normalized second-order correlation of the emitter at delay tau (ns).
/// Extended to negative delays by symmetry.  g2(0) == 0 exactly.
double analytic_g2(const ThreeLevelRates& rates, double tau_ns);

G2Curve analytic_g2_curve(const ThreeLevelRates& rates,
                          const std::vector<double>& delays_ns);

G2Form g2_closed_form(const ThreeLevelRates& rates);

/// Correlation of emitter light diluted by uncorrelated background:
/// 1 + rho^2 (g2_true - 1) with rho the signal fraction in [0, 1].
double background_mixed_g2(double g2_true, double signal_fraction);

/// I_sat / (1 + P_sat / P); returns 0 at P = 0.
double saturation_curve(double power_uW, double i_sat_cps, double p_sat_uW);

/// Detected count rate: efficiency * decay * p_excited + background.
double detected_rate(const ThreeLevelRates& rates, const PowerModel& power,
                     double background_cps);

}  // namespace wsim
