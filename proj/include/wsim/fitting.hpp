#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Shared nonlinear least-squares engine: Levenberg-Marquardt damping with a
// fixed lambda schedule, bounds by smooth parameter transformation, standard
// errors from the scaled inverse Gauss-Newton Hessian at the optimum.

namespace wsim {

enum class FitStatus {
  converged,
  max_iterations,
  singular,
  diverged,
  invalid_data,  ///< empty/degenerate input or no usable initial guess
};

std::string_view to_string(FitStatus status);

struct Model {
  int n_params = 0;
  std::vector<std::string> param_names;
  /// Model value at a single abscissa.
  std::function<double(double x, std::span<const double> p)> eval;
  /// Analytic gradient d f / d p (optional; finite differences otherwise).
  std::function<void(double x, std::span<const double> p, std::span<double> grad)>
      gradient;
  /// Deterministic initial-guess heuristic; nullopt on degenerate data.
  std::function<std::optional<std::vector<double>>(std::span<const double> x,
                                                   std::span<const double> y)>
      guess;
};

/// Registered model by name ("linear", "exponential_decay", "lorentzian",
/// "gaussian", "cos_squared", "saturation", "g2_three_level", "g2_two_level").
/// Throws std::invalid_argument for unknown names.
const Model& get_model(std::string_view name);
std::vector<std::string> registered_models();

/// Convenience: heuristic starting parameters for a registered model.
std::optional<std::vector<double>> initial_guess(std::string_view model,
                                                 std::span<const double> x,
                                                 std::span<const double> y);

struct Bounds {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

struct FitProblem {
  std::string model;            ///< registry name (ignored when custom is set)
  const Model* custom = nullptr;
  std::vector<double> x, y;
  std::vector<double> y_err;    ///< empty -> Poisson default sqrt(max(|y|, 1))
  std::vector<double> initial;  ///< empty -> registry guess
  std::vector<Bounds> bounds;   ///< empty -> all parameters free
  int max_iterations = 200;
  double gradient_tol = 1e-12;
  double step_tol = 1e-12;
  double cost_tol = 1e-12;
  /// Extra passes with sigma_i = sqrt(max(model_i, 1)) from the previous
  /// optimum.  Removes the low-count bias of sqrt(y) weights on Poisson data.
  int model_weighted_passes = 0;
};

struct FitResult {
  std::vector<double> params;
  std::vector<double> errors;      ///< standard errors (scaled covariance diagonal)
  std::vector<double> covariance;  ///< n x n, row major
  double chi2 = 0.0;
  double reduced_chi2 = 0.0;
  int dof = 0;
  int iterations = 0;
  FitStatus status = FitStatus::invalid_data;

  bool ok() const { return status == FitStatus::converged; }
};

FitResult fit(const FitProblem& problem);

/// Weighted linear least squares on an m x n design matrix (row major).
/// Covariance is scaled by the reduced chi-square, matching fit().
struct LinearFit {
  std::vector<double> coeffs;
  std::vector<double> errors;
  std::vector<double> covariance;
  double chi2 = 0.0;
  int dof = 0;
  FitStatus status = FitStatus::invalid_data;
};

LinearFit linear_least_squares(std::span<const double> design, int n_rows,
                               int n_cols, std::span<const double> y,
                               std::span<const double> y_err = {});

}  // namespace wsim
