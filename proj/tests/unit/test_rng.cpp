#include <cmath>
#include <vector>

#include "doctest.h"
#include "support/oracles.hpp"
#include "wsim/rng.hpp"

using namespace wsim;

TEST_CASE("identical seeds give identical sequences") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next() == b.next());
}

TEST_CASE("derived seeds differ by stream name and index") {
  const std::uint64_t master = 7;
  CHECK(derive_seed(master, "emitter") != derive_seed(master, "background"));
  CHECK(derive_seed(master, "row", 0) != derive_seed(master, "row", 1));
  CHECK(derive_seed(master, "row", 3) == derive_seed(master, "row", 3));
  CHECK(derive_seed(master, "emitter") != derive_seed(master + 1, "emitter"));
}

TEST_CASE("uniform moments") {
  Rng rng(1);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    s += u;
    s2 += u * u;
  }
  CHECK(std::fabs(s / n - 0.5) < 0.005);
  CHECK(std::fabs(s2 / n - 1.0 / 3.0) < 0.005);
}

TEST_CASE("exponential mean") {
  Rng rng(2);
  const double rate = 3.0e6;
  const int n = 100000;
  double s = 0;
  for (int i = 0; i < n; ++i) s += rng.exponential(rate);
  const double m = s / n;
  CHECK(std::fabs(m - 1.0 / rate) < 5.0 / rate / std::sqrt(double(n)));
}

TEST_CASE("normal moments") {
  Rng rng(3);
  const int n = 200000;
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  CHECK(std::fabs(oracles::mean(v)) < 0.01);
  CHECK(std::fabs(oracles::variance(v) - 1.0) < 0.02);
}

TEST_CASE("poisson matches mean and variance across regimes") {
  for (double lam : {0.3, 4.0, 25.0, 400.0, 5000.0}) {
    Rng rng(static_cast<std::uint64_t>(lam * 1000) + 5);
    const int n = 40000;
    std::vector<double> v(n);
    for (auto& x : v) x = static_cast<double>(rng.poisson(lam));
    const double m = oracles::mean(v);
    const double var = oracles::variance(v);
    const double se_mean = std::sqrt(lam / n);
    CHECK(std::fabs(m - lam) < 5 * se_mean);
    // Var(S^2) ~ lam^2 (2 + 1/lam) / n for Poisson.
    const double se_var = lam * std::sqrt((2.0 + 1.0 / lam) / n);
    CHECK(std::fabs(var - lam) < 5 * se_var);
  }
}

TEST_CASE("below is unbiased over small ranges") {
  Rng rng(9);
  std::array<int, 4> counts{};
  const int n = 400000;
  for (int i = 0; i < n; ++i) ++counts[rng.below(4)];
  for (int c : counts) CHECK(std::fabs(c - n / 4.0) < 5 * std::sqrt(n * 0.25 * 0.75));
}
