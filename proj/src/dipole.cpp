#include "wsim/dipole.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "wsim/rng.hpp"

namespace wsim {

std::array<double, 3> axis_vector(DipoleAxis axis) {
  const double s = 1.0 / std::sqrt(3.0);
  switch (axis) {
    case DipoleAxis::p111: return {s, s, s};
    case DipoleAxis::m111: return {-s, s, s};
    case DipoleAxis::p1m11: return {s, -s, s};
    case DipoleAxis::p11m1: return {s, s, -s};
  }
  return {s, s, s};
}

std::string axis_name(DipoleAxis axis) {
  switch (axis) {
    case DipoleAxis::p111: return "[111]";
    case DipoleAxis::m111: return "[-111]";
    case DipoleAxis::p1m11: return "[1-11]";
    case DipoleAxis::p11m1: return "[11-1]";
  }
  return "?";
}

double project_to_001(DipoleAxis axis) {
  // Drop the z component; (1,1,0)-type projections lie along [110] (0 deg),
  // (1,-1,0)-type along [-110] (90 deg, same modulo 180).
  const auto v = axis_vector(axis);
  return v[0] * v[1] > 0 ? 0.0 : 90.0;
}

PolarizationDiagram malus_diagram(double theta0_deg, double i_max,
                                  double visibility,
                                  std::span<const double> angles_deg) {
  if (visibility < 0 || visibility > 1)
    throw std::invalid_argument("visibility must be in [0, 1]");
  if (i_max < 0) throw std::invalid_argument("i_max must be >= 0");
  PolarizationDiagram d;
  d.angles_deg.assign(angles_deg.begin(), angles_deg.end());
  d.intensities.reserve(angles_deg.size());
  const double floor = (1.0 - visibility) / (1.0 + visibility);
  const double swing = 2.0 * visibility / (1.0 + visibility);
  const double deg = std::numbers::pi / 180.0;
  for (double th : angles_deg) {
    const double c = std::cos((th - theta0_deg) * deg);
    d.intensities.push_back(i_max * (floor + swing * c * c));
  }
  return d;
}

PolarizationFit fit_polarization(const PolarizationDiagram& diagram) {
  PolarizationFit out;
  const auto& x = diagram.angles_deg;
  const auto& y = diagram.intensities;
  if (x.size() != y.size() || x.size() < 6) return out;
  // Needs at least 6 distinct angles spanning 90 degrees or more.
  std::vector<double> distinct(x.begin(), x.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 6 || distinct.back() - distinct.front() < 90.0) return out;
  bool any = false;
  for (double v : y)
    if (v != 0.0) any = true;
  if (!any) return out;  // all-zero diagram carries no orientation signal

  FitProblem prob;
  prob.model = "cos_squared";
  prob.x = x;
  prob.y = y;
  auto guess = initial_guess("cos_squared", x, y);
  prob.initial = guess ? *guess
                       : std::vector<double>{*std::min_element(y.begin(), y.end()),
                                             0.0, 0.0};
  FitResult res = fit(prob);
  out.status = res.status;
  out.reduced_chi2 = res.reduced_chi2;
  if (res.params.size() != 3) return out;

  double offset = res.params[0], amp = res.params[1], theta0 = res.params[2];
  // cos^2 with negative amplitude is the orthogonal dipole: canonicalize.
  if (amp < 0) {
    offset += amp;
    amp = -amp;
    theta0 += 90.0;
  }
  theta0 = std::fmod(theta0, 180.0);
  if (theta0 < 0) theta0 += 180.0;

  out.theta0_deg = theta0;
  out.i_max = offset + amp;
  const double denom = 2.0 * offset + amp;
  out.visibility = denom != 0 ? amp / denom : 0.0;

  if (res.covariance.size() == 9) {
    const double va = res.covariance[0];       // var(offset)
    const double vb = res.covariance[4];       // var(amp)
    const double cab = res.covariance[1];      // cov(offset, amp)
    out.theta0_err = res.errors[2];
    out.i_max_err = std::sqrt(std::max(va + vb + 2.0 * cab, 0.0));
    if (denom != 0) {
      const double dvda = -2.0 * amp / (denom * denom);
      const double dvdb = 2.0 * offset / (denom * denom);
      out.visibility_err = std::sqrt(std::max(
          dvda * dvda * va + dvdb * dvdb * vb + 2.0 * dvda * dvdb * cab, 0.0));
    }
  }
  return out;
}

OrientationHistogram orientation_histogram(int n_emitters, std::uint64_t seed,
                                           bool stratified) {
  if (n_emitters < 1) throw std::invalid_argument("need at least one emitter");
  OrientationHistogram h;
  const auto axes = all_dipole_axes();
  Rng rng(derive_seed(seed, "dipole-orientation"));
  for (int i = 0; i < n_emitters; ++i) {
    const DipoleAxis axis =
        stratified ? axes[static_cast<std::size_t>(i) % 4]
                   : axes[static_cast<std::size_t>(rng.below(4))];
    if (project_to_001(axis) == 0.0)
      ++h.count_0deg;
    else
      ++h.count_90deg;
  }
  return h;
}

void write_diagram_csv(const PolarizationDiagram& diagram,
                       const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << "angle_deg,intensity\n";
  char line[80];
  for (std::size_t i = 0; i < diagram.angles_deg.size(); ++i) {
    std::snprintf(line, sizeof line, "%.10g,%.10g\n", diagram.angles_deg[i],
                  diagram.intensities[i]);
    f << line;
  }
}

}  // namespace wsim
