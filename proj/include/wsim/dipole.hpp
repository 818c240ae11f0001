#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wsim/fitting.hpp"

// Geometry of the <111> emission dipole observed along [001]: in-plane
// projections, Malus-law polarization diagrams and orientation statistics.
// Angle convention: 0 deg along [110], 90 deg along [-110]; intensity-only
// measurements make theta0 meaningful modulo 180 deg.

namespace wsim {

enum class DipoleAxis : std::uint8_t {
  p111,   // [111]
  m111,   // [-1 1 1]
  p1m11,  // [1 -1 1]
  p11m1,  // [1 1 -1]
};

constexpr std::array<DipoleAxis, 4> all_dipole_axes() {
  return {DipoleAxis::p111, DipoleAxis::m111, DipoleAxis::p1m11, DipoleAxis::p11m1};
}

/// Unit vector of the axis in cubic crystal coordinates.
std::array<double, 3> axis_vector(DipoleAxis axis);
std::string axis_name(DipoleAxis axis);

/// In-plane polarization angle of the axis projected on (001): 0 or 90 deg.
double project_to_001(DipoleAxis axis);

struct PolarizationDiagram {
  std::vector<double> angles_deg;
  std::vector<double> intensities;
};

/// Malus diagram I(theta) = I_max [ (1-V)/(1+V) + 2V/(1+V) cos^2(theta-theta0) ],
/// normalized so that (I_max - I_min)/(I_max + I_min) = V.
PolarizationDiagram malus_diagram(double theta0_deg, double i_max,
                                  double visibility,
                                  std::span<const double> angles_deg);

struct PolarizationFit {
  double theta0_deg = 0.0;  ///< canonical range [0, 180)
  double i_max = 0.0;
  double visibility = 0.0;
  double theta0_err = 0.0;
  double i_max_err = 0.0;
  double visibility_err = 0.0;
  double reduced_chi2 = 0.0;
  FitStatus status = FitStatus::invalid_data;
  bool ok() const { return status == FitStatus::converged; }
};

/// cos^2 fit of a measured diagram. All-zero intensity data fails with
/// status invalid_data instead of throwing.
PolarizationFit fit_polarization(const PolarizationDiagram& diagram);

struct OrientationHistogram {
  int count_0deg = 0;
  int count_90deg = 0;
  int total() const { return count_0deg + count_90deg; }
};

/// Projected-orientation histogram of n emitters with axes drawn uniformly
/// from the four <111> members. Stratified mode cycles through the axes
/// deterministically (n = 4 gives exactly (2, 2)).
OrientationHistogram orientation_histogram(int n_emitters, std::uint64_t seed,
                                           bool stratified = false);

/// CSV export with header "angle_deg,intensity".
void write_diagram_csv(const PolarizationDiagram& diagram,
                       const std::string& path);

}  // namespace wsim
