#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "support/oracles.hpp"
#include "wsim/kinetics.hpp"
#include "wsim/rng.hpp"

using namespace wsim;

namespace {

ThreeLevelRates random_rates(Rng& rng, bool with_shelving) {
  ThreeLevelRates r;
  // Log-uniform within 2 decades keeps the ODE oracle affordable.
  auto draw = [&](double lo, double hi) {
    return lo * std::pow(hi / lo, rng.uniform());
  };
  r.pump = draw(1e6, 1e8);
  r.decay = draw(1e6, 1e8);
  if (with_shelving) {
    r.shelve = draw(1e5, 1e7);
    r.deshelve = draw(1e6, 1e8);
  }
  return r;
}

}  // namespace

TEST_CASE("steady state: two-level symmetric case") {
  const auto p = steady_state({.pump = 5e6, .decay = 5e6});
  CHECK(p.excited == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p.shelved == 0.0);
}

TEST_CASE("steady state: no pumping parks the emitter in the ground state") {
  const auto p = steady_state({.pump = 0, .decay = 1e8, .shelve = 1e6, .deshelve = 1e5});
  CHECK(p.ground == 1.0);
  CHECK(p.excited == 0.0);
  CHECK(p.shelved == 0.0);
}

TEST_CASE("steady state matches the ODE long-time limit to 6 digits") {
  const ThreeLevelRates rates{.pump = 1e7, .decay = 1e8, .shelve = 1e6, .deshelve = 1e5};
  const auto ode = oracles::steady_state_ode(rates);
  const auto cf = steady_state(rates);
  CHECK(cf.ground == doctest::Approx(ode.ground).epsilon(1e-6));
  CHECK(cf.excited == doctest::Approx(ode.excited).epsilon(1e-6));
  CHECK(cf.shelved == doctest::Approx(ode.shelved).epsilon(1e-6));
}

TEST_CASE("steady state sums to one at machine precision for random rates") {
  Rng rng(11);
  for (int i = 0; i < 10000; ++i) {
    const auto r = random_rates(rng, i % 2 == 0);
    const auto p = steady_state(r);
    CHECK(std::fabs(p.ground + p.excited + p.shelved - 1.0) < 1e-14);
    CHECK(p.ground >= 0.0);
    CHECK(p.excited >= 0.0);
    CHECK(p.shelved >= 0.0);
    CHECK(p.ground <= 1.0);
  }
}

TEST_CASE("type invariants are enforced") {
  CHECK_THROWS(steady_state({.pump = 1e6, .decay = 0.0}));
  CHECK_THROWS(steady_state({.pump = 1e6, .decay = 1e8, .shelve = 1e6, .deshelve = 0.0}));
  CHECK_THROWS(steady_state({.pump = -1.0, .decay = 1e8}));
}

TEST_CASE("analytic g2 is zero at zero delay and symmetric") {
  const ThreeLevelRates rates{.pump = 2e7, .decay = 8e7, .shelve = 8e6, .deshelve = 1e7};
  CHECK(analytic_g2(rates, 0.0) == 0.0);
  CHECK(analytic_g2(rates, -12.5) == analytic_g2(rates, 12.5));
  const G2Curve curve = analytic_g2_curve(rates, {0.0, 5.0, 50.0, 500.0});
  REQUIRE(curve.values.size() == 4);
  for (std::size_t i = 0; i < curve.values.size(); ++i)
    CHECK(curve.values[i] == analytic_g2(rates, curve.delays_ns[i]));
  CHECK(curve.values.back() == doctest::Approx(1.0).epsilon(1e-2));
}

TEST_CASE("two-level reduction: g2 = 1 - exp(-(pump+decay) tau)") {
  const ThreeLevelRates rates{.pump = 3e7, .decay = 6e7};
  for (double tau : {0.5, 2.0, 10.0, 40.0}) {
    const double expected = 1.0 - std::exp(-(rates.pump + rates.decay) * tau * 1e-9);
    CHECK(analytic_g2(rates, tau) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("analytic g2 matches the conditional-intensity ODE oracle") {
  const ThreeLevelRates rates{.pump = 1e7, .decay = 1e8, .shelve = 1e6, .deshelve = 1e5};
  std::vector<double> delays;
  for (int i = 1; i <= 50; ++i) delays.push_back(0.4 * i * i);  // 0.4 .. 1000 ns
  const auto ode = oracles::g2_ode(rates, delays);
  for (std::size_t i = 0; i < delays.size(); ++i) {
    const double ours = analytic_g2(rates, delays[i]);
    CHECK(std::fabs(ours - ode[i]) / std::max(std::fabs(ode[i]), 1e-6) < 1e-6);
  }
}

TEST_CASE("analytic g2 equals the ODE oracle on random rate tuples") {
  Rng rng(13);
  std::vector<double> delays;
  for (int i = 1; i <= 25; ++i) delays.push_back(0.8 * i * i);
  for (int t = 0; t < 12; ++t) {
    const auto rates = random_rates(rng, true);
    const auto ode = oracles::g2_ode(rates, delays);
    for (std::size_t i = 0; i < delays.size(); ++i) {
      const double ours = analytic_g2(rates, delays[i]);
      CHECK(std::fabs(ours - ode[i]) / std::max(std::fabs(ode[i]), 1e-6) < 1e-6);
    }
  }
}

TEST_CASE("g2 stays below one without shelving, bunches with it") {
  Rng rng(17);
  for (int t = 0; t < 200; ++t) {
    const auto r2 = random_rates(rng, false);
    double peak = 0.0;
    for (int i = 1; i <= 200; ++i)
      peak = std::max(peak, analytic_g2(r2, 0.5 * i));
    CHECK(peak <= 1.0 + 1e-12);
  }
  for (int t = 0; t < 200; ++t) {
    auto r3 = random_rates(rng, true);
    r3.deshelve = std::min(r3.deshelve, 0.5 * r3.decay);  // slow recovery bunches
    const auto form = g2_closed_form(r3);
    if (form.oscillatory) continue;
    double peak = 0.0;
    for (int i = 1; i <= 400; ++i)
      peak = std::max(peak, analytic_g2(r3, form.tau2_ns * 0.02 * i));
    CHECK(peak > 1.0);
  }
}

TEST_CASE("closed form parameters reproduce the curve") {
  const ThreeLevelRates rates{.pump = 2e7, .decay = 8e7, .shelve = 8e6, .deshelve = 1e7};
  const auto form = g2_closed_form(rates);
  REQUIRE(!form.oscillatory);
  CHECK(form.tau1_ns < form.tau2_ns);
  CHECK(form.a > 0.0);
  for (double tau : {1.0, 5.0, 20.0, 80.0, 300.0}) {
    const double from_form = 1.0 - (1.0 + form.a) * std::exp(-tau / form.tau1_ns) +
                             form.a * std::exp(-tau / form.tau2_ns);
    CHECK(analytic_g2(rates, tau) == doctest::Approx(from_form).epsilon(1e-9));
  }
}

TEST_CASE("near-degenerate eigenvalues fall back to the confluent limit") {
  // pump == deshelve with tiny shelving makes the two eigenvalues collide.
  const ThreeLevelRates rates{.pump = 5e7, .decay = 5e7, .shelve = 1e-3, .deshelve = 1e8};
  for (double tau : {0.1, 1.0, 10.0, 100.0}) {
    const double g = analytic_g2(rates, tau);
    CHECK(std::isfinite(g));
    CHECK(g >= 0.0);
    CHECK(g <= 1.0 + 1e-9);
  }
}

TEST_CASE("background mixing") {
  CHECK(background_mixed_g2(0.0, 1.0) == 0.0);
  CHECK(background_mixed_g2(0.37, 0.0) == 1.0);
  CHECK(background_mixed_g2(5.0, 0.0) == 1.0);
  // rho = 0.938 dilutes a perfect antibunching dip to the 0.12 level.
  CHECK(background_mixed_g2(0.0, 0.938) == doctest::Approx(0.120156).epsilon(1e-6));
  CHECK_THROWS(background_mixed_g2(0.0, 1.5));
}

TEST_CASE("background mixing is affine in g2 and monotone in rho below one") {
  for (double rho : {0.1, 0.4, 0.9}) {
    const double a = background_mixed_g2(0.0, rho);
    const double b = background_mixed_g2(0.5, rho);
    const double c = background_mixed_g2(1.0, rho);
    CHECK(b == doctest::Approx(0.5 * (a + c)).epsilon(1e-12));
  }
  double prev = background_mixed_g2(0.3, 0.0);
  for (double rho = 0.1; rho <= 1.0; rho += 0.1) {
    const double v = background_mixed_g2(0.3, rho);
    CHECK(v < prev);  // deeper dip as the signal fraction grows
    prev = v;
  }
}

TEST_CASE("saturation curve") {
  CHECK(saturation_curve(0.0, 6000, 2.0) == 0.0);
  CHECK(saturation_curve(2.0, 6000, 2.0) == doctest::Approx(3000.0));
  CHECK(saturation_curve(30.0, 6000, 2.0) == doctest::Approx(5625.0));
  CHECK(saturation_curve(1e9, 6000, 2.0) == doctest::Approx(6000.0).epsilon(1e-6));
  double prev = -1.0;
  for (double p = 0.1; p < 100; p *= 1.3) {
    const double v = saturation_curve(p, 6000, 2.0);
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("detected rate") {
  PowerModel pm;
  pm.detection_efficiency = 1.0;
  CHECK(detected_rate({.pump = 0, .decay = 1e8}, pm, 0.0) == 0.0);
  const double half = detected_rate({.pump = 4e7, .decay = 4e7}, pm, 0.0);
  CHECK(half == doctest::Approx(2e7).epsilon(1e-12));
  pm.detection_efficiency = 0.10;
  const double with_bg = detected_rate({.pump = 4e7, .decay = 4e7}, pm, 500.0);
  CHECK(with_bg == doctest::Approx(2e6 + 500.0).epsilon(1e-12));
}
