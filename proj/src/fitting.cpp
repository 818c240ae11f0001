#include "wsim/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

namespace wsim {

std::string_view to_string(FitStatus status) {
  switch (status) {
    case FitStatus::converged: return "converged";
    case FitStatus::max_iterations: return "max-iterations";
    case FitStatus::singular: return "singular";
    case FitStatus::diverged: return "diverged";
    case FitStatus::invalid_data: return "invalid-data";
  }
  return "unknown";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Small dense linear algebra (n <= ~10): Cholesky solve and inverse.

bool cholesky_factor(std::vector<double>& a, int n) {
  for (int j = 0; j < n; ++j) {
    const double orig = a[j * n + j];
    double d = orig;
    for (int k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    // Relative pivot test: a vanishing remainder means a collinear column.
    if (!(d > 1e-13 * std::fabs(orig)) || !std::isfinite(d)) return false;
    const double dj = std::sqrt(d);
    a[j * n + j] = dj;
    for (int i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (int k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / dj;
    }
  }
  return true;
}

// Solves A x = b for SPD A; returns false when the factorization fails.
bool cholesky_solve(std::vector<double> a, int n, std::span<const double> b,
                    std::vector<double>& x) {
  if (!cholesky_factor(a, n)) return false;
  x.assign(b.begin(), b.end());
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < i; ++k) x[i] -= a[i * n + k] * x[k];
    x[i] /= a[i * n + i];
  }
  for (int i = n - 1; i >= 0; --i) {
    for (int k = i + 1; k < n; ++k) x[i] -= a[k * n + i] * x[k];
    x[i] /= a[i * n + i];
  }
  return true;
}

bool cholesky_inverse(std::vector<double> a, int n, std::vector<double>& inv) {
  if (!cholesky_factor(a, n)) return false;
  inv.assign(static_cast<std::size_t>(n) * n, 0.0);
  std::vector<double> col(n);
  for (int j = 0; j < n; ++j) {
    std::fill(col.begin(), col.end(), 0.0);
    col[j] = 1.0;
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < i; ++k) col[i] -= a[i * n + k] * col[k];
      col[i] /= a[i * n + i];
    }
    for (int i = n - 1; i >= 0; --i) {
      for (int k = i + 1; k < n; ++k) col[i] -= a[k * n + i] * col[k];
      col[i] /= a[i * n + i];
    }
    for (int i = 0; i < n; ++i) inv[i * n + j] = col[i];
  }
  return true;
}

// ---------------------------------------------------------------------------
// Bound handling: internal coordinates are unconstrained, external parameters
// follow logistic (two-sided) or exponential (one-sided) maps.

enum class BoundKind { free, lower, upper, box };

struct Transform {
  BoundKind kind = BoundKind::free;
  double lo = -kInf, hi = kInf;

  double external(double q) const {
    switch (kind) {
      case BoundKind::free: return q;
      case BoundKind::lower: return lo + std::exp(q);
      case BoundKind::upper: return hi - std::exp(q);
      case BoundKind::box: {
        const double s = 1.0 / (1.0 + std::exp(-q));
        return lo + (hi - lo) * s;
      }
    }
    return q;
  }

  double dext_dint(double q) const {
    switch (kind) {
      case BoundKind::free: return 1.0;
      case BoundKind::lower: return std::exp(q);
      case BoundKind::upper: return -std::exp(q);
      case BoundKind::box: {
        const double s = 1.0 / (1.0 + std::exp(-q));
        return (hi - lo) * s * (1.0 - s);
      }
    }
    return 1.0;
  }

  double internal(double p) const {
    switch (kind) {
      case BoundKind::free: return p;
      case BoundKind::lower: return std::log(std::max(p - lo, 1e-300));
      case BoundKind::upper: return std::log(std::max(hi - p, 1e-300));
      case BoundKind::box: {
        const double margin = 1e-9 * (hi - lo);
        const double c = std::clamp(p, lo + margin, hi - margin);
        return std::log((c - lo) / (hi - c));
      }
    }
    return p;
  }
};

std::vector<Transform> make_transforms(const FitProblem& prob, int n) {
  std::vector<Transform> out(n);
  if (prob.bounds.empty()) return out;
  if (static_cast<int>(prob.bounds.size()) != n)
    throw std::invalid_argument("fit: bounds size does not match parameter count");
  for (int j = 0; j < n; ++j) {
    const auto& b = prob.bounds[j];
    if (!(b.lower < b.upper))
      throw std::invalid_argument("fit: inconsistent bounds");
    const bool has_lo = std::isfinite(b.lower);
    const bool has_hi = std::isfinite(b.upper);
    out[j].lo = b.lower;
    out[j].hi = b.upper;
    out[j].kind = has_lo && has_hi   ? BoundKind::box
                  : has_lo           ? BoundKind::lower
                  : has_hi           ? BoundKind::upper
                                     : BoundKind::free;
  }
  return out;
}

// ---------------------------------------------------------------------------

struct Workspace {
  const Model* model;
  std::span<const double> x, y, w;  // w = 1/sigma
  std::vector<Transform> tf;
  int m, n;

  void externalize(std::span<const double> q, std::vector<double>& p) const {
    p.resize(n);
    for (int j = 0; j < n; ++j) p[j] = tf[j].external(q[j]);
  }

  // chi2 of internal point q; false when the model returned non-finite values.
  bool residuals(std::span<const double> q, std::vector<double>& r,
                 double& chi2) const {
    std::vector<double> p;
    externalize(q, p);
    r.resize(m);
    chi2 = 0.0;
    for (int i = 0; i < m; ++i) {
      const double f = model->eval(x[i], p);
      if (!std::isfinite(f)) return false;
      r[i] = (y[i] - f) * w[i];
      chi2 += r[i] * r[i];
    }
    return std::isfinite(chi2);
  }

  // J[i][j] = d r_i / d q_j (row major m x n).
  bool jacobian(std::span<const double> q, std::vector<double>& jac) const {
    jac.resize(static_cast<std::size_t>(m) * n);
    std::vector<double> p;
    externalize(q, p);
    if (model->gradient) {
      std::vector<double> g(n);
      for (int i = 0; i < m; ++i) {
        model->gradient(x[i], p, g);
        for (int j = 0; j < n; ++j) {
          const double v = -g[j] * tf[j].dext_dint(q[j]) * w[i];
          if (!std::isfinite(v)) return false;
          jac[i * static_cast<std::size_t>(n) + j] = v;
        }
      }
      return true;
    }
    // Central finite differences in internal coordinates (always in-domain).
    std::vector<double> qp(q.begin(), q.end());
    std::vector<double> fp(m), fm(m), pt;
    for (int j = 0; j < n; ++j) {
      const double h = 1e-6 * std::max(std::fabs(qp[j]), 1.0);
      const double saved = qp[j];
      qp[j] = saved + h;
      externalize(qp, pt);
      for (int i = 0; i < m; ++i) fp[i] = model->eval(x[i], pt);
      qp[j] = saved - h;
      externalize(qp, pt);
      for (int i = 0; i < m; ++i) fm[i] = model->eval(x[i], pt);
      qp[j] = saved;
      for (int i = 0; i < m; ++i) {
        const double v = -(fp[i] - fm[i]) / (2.0 * h) * w[i];
        if (!std::isfinite(v)) return false;
        jac[i * static_cast<std::size_t>(n) + j] = v;
      }
    }
    return true;
  }
};

}  // namespace

namespace {
FitResult fit_once(const FitProblem& problem);
}  // namespace

FitResult fit(const FitProblem& problem) {
  FitResult res = fit_once(problem);
  const Model& model = problem.custom ? *problem.custom : get_model(problem.model);
  for (int pass = 0; pass < problem.model_weighted_passes; ++pass) {
    if (res.status != FitStatus::converged) break;
    // Frozen-weight IRLS step: at its fixed point the weighted normal
    // equations are the Poisson maximum-likelihood score equations.
    FitProblem reweighted = problem;
    reweighted.initial = res.params;
    reweighted.y_err.resize(problem.x.size());
    for (std::size_t i = 0; i < problem.x.size(); ++i)
      reweighted.y_err[i] =
          std::sqrt(std::max(model.eval(problem.x[i], res.params), 0.1));
    reweighted.model_weighted_passes = 0;
    res = fit_once(reweighted);
  }
  return res;
}

namespace {

FitResult fit_once(const FitProblem& problem) {
  const Model& model = problem.custom ? *problem.custom : get_model(problem.model);
  const int n = model.n_params;
  const int m = static_cast<int>(problem.x.size());

  FitResult out;
  out.params.assign(n, 0.0);
  out.errors.assign(n, 0.0);
  if (problem.y.size() != problem.x.size() ||
      (!problem.y_err.empty() && problem.y_err.size() != problem.x.size()))
    throw std::invalid_argument("fit: data arrays must have equal length");
  if (m == 0) return out;  // invalid_data

  std::vector<double> p0 = problem.initial;
  if (p0.empty()) {
    std::optional<std::vector<double>> g;
    if (model.guess) g = model.guess(problem.x, problem.y);
    if (!g) return out;  // invalid_data
    p0 = std::move(*g);
  }
  if (static_cast<int>(p0.size()) != n)
    throw std::invalid_argument("fit: initial parameter count mismatch");

  std::vector<double> weights(m);
  for (int i = 0; i < m; ++i) {
    double s = problem.y_err.empty() ? std::sqrt(std::max(std::fabs(problem.y[i]), 1.0))
                                     : problem.y_err[i];
    if (!(s > 0)) throw std::invalid_argument("fit: y_err must be > 0");
    weights[i] = 1.0 / s;
  }

  Workspace ws{&model, problem.x, problem.y, weights, make_transforms(problem, n),
               m, n};

  std::vector<double> q(n);
  for (int j = 0; j < n; ++j) q[j] = ws.tf[j].internal(p0[j]);

  std::vector<double> r, jac, grad(n), hess, step, q_try, r_try;
  double chi2 = 0.0;
  if (!ws.residuals(q, r, chi2)) {
    out.status = FitStatus::diverged;
    return out;
  }

  double lambda = 1e-3;
  constexpr double kLambdaMax = 1e12;
  FitStatus status = FitStatus::max_iterations;
  int iter = 0;

  for (; iter < problem.max_iterations; ++iter) {
    if (!ws.jacobian(q, jac)) {
      status = FitStatus::diverged;
      break;
    }
    // grad = J^T r, hess = J^T J
    std::fill(grad.begin(), grad.end(), 0.0);
    hess.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < m; ++i) {
      const double* ji = &jac[i * static_cast<std::size_t>(n)];
      for (int a = 0; a < n; ++a) {
        grad[a] += ji[a] * r[i];
        for (int b = a; b < n; ++b) hess[a * n + b] += ji[a] * ji[b];
      }
    }
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < a; ++b) hess[a * n + b] = hess[b * n + a];

    double gmax = 0.0;
    for (double g : grad) gmax = std::max(gmax, std::fabs(g));
    if (gmax < problem.gradient_tol) {
      status = FitStatus::converged;
      break;
    }

    bool accepted = false;
    while (true) {
      std::vector<double> damped = hess;
      for (int a = 0; a < n; ++a)
        damped[a * n + a] += lambda * std::max(hess[a * n + a], 1e-30);
      std::vector<double> rhs(n);
      for (int a = 0; a < n; ++a) rhs[a] = -grad[a];
      if (!cholesky_solve(std::move(damped), n, rhs, step)) {
        lambda *= 10.0;
        if (lambda > kLambdaMax) {
          status = FitStatus::singular;
          break;
        }
        continue;
      }
      q_try.assign(q.begin(), q.end());
      for (int a = 0; a < n; ++a) q_try[a] += step[a];
      double chi2_try = 0.0;
      const bool finite = ws.residuals(q_try, r_try, chi2_try);
      if (finite && chi2_try <= chi2) {
        const double drop = chi2 - chi2_try;
        double qnorm = 0.0, snorm = 0.0;
        for (int a = 0; a < n; ++a) {
          qnorm += q[a] * q[a];
          snorm += step[a] * step[a];
        }
        q.swap(q_try);
        r.swap(r_try);
        const double chi2_prev = chi2;
        chi2 = chi2_try;
        lambda = std::max(lambda * 0.1, 1e-14);
        accepted = true;
        if (drop <= problem.cost_tol * std::max(chi2_prev, 1e-300) ||
            std::sqrt(snorm) <=
                problem.step_tol * (std::sqrt(qnorm) + problem.step_tol))
          status = FitStatus::converged;
        break;
      }
      lambda *= 10.0;
      if (lambda > kLambdaMax) {
        // No downhill direction left at maximum damping: numerically at a
        // minimum unless the model was returning non-finite values.
        status = finite ? FitStatus::converged : FitStatus::diverged;
        break;
      }
    }
    if (!accepted || status == FitStatus::converged ||
        status == FitStatus::singular || status == FitStatus::diverged)
      break;
  }

  out.iterations = iter;
  out.status = status;
  out.chi2 = chi2;
  out.dof = std::max(m - n, 0);
  out.reduced_chi2 = out.dof > 0 ? chi2 / out.dof : chi2;

  std::vector<double> p;
  ws.externalize(q, p);
  out.params = p;

  // Covariance from the Gauss-Newton Hessian at the final point, scaled by
  // the reduced chi-square and mapped back to external coordinates.
  if (status == FitStatus::converged || status == FitStatus::max_iterations) {
    if (ws.jacobian(q, jac)) {
      hess.assign(static_cast<std::size_t>(n) * n, 0.0);
      for (int i = 0; i < m; ++i) {
        const double* ji = &jac[i * static_cast<std::size_t>(n)];
        for (int a = 0; a < n; ++a)
          for (int b = a; b < n; ++b) hess[a * n + b] += ji[a] * ji[b];
      }
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < a; ++b) hess[a * n + b] = hess[b * n + a];
      std::vector<double> inv;
      bool ok = cholesky_inverse(hess, n, inv);
      if (!ok) {  // ridge fallback for flat directions
        double dmax = 0.0;
        for (int a = 0; a < n; ++a) dmax = std::max(dmax, hess[a * n + a]);
        for (int a = 0; a < n; ++a) hess[a * n + a] += 1e-10 * std::max(dmax, 1.0);
        ok = cholesky_inverse(hess, n, inv);
      }
      if (ok) {
        const double scale = out.dof > 0 ? out.chi2 / out.dof : 1.0;
        out.covariance.assign(static_cast<std::size_t>(n) * n, 0.0);
        for (int a = 0; a < n; ++a) {
          const double da = ws.tf[a].dext_dint(q[a]);
          for (int b = 0; b < n; ++b) {
            const double db = ws.tf[b].dext_dint(q[b]);
            out.covariance[a * n + b] = inv[a * n + b] * scale * da * db;
          }
        }
        for (int a = 0; a < n; ++a)
          out.errors[a] = std::sqrt(std::max(out.covariance[a * n + a], 0.0));
      }
    }
  }
  return out;
}

}  // namespace

LinearFit linear_least_squares(std::span<const double> design, int n_rows,
                               int n_cols, std::span<const double> y,
                               std::span<const double> y_err) {
  LinearFit out;
  if (n_rows <= 0 || n_cols <= 0 ||
      design.size() != static_cast<std::size_t>(n_rows) * n_cols ||
      y.size() != static_cast<std::size_t>(n_rows) ||
      (!y_err.empty() && y_err.size() != y.size()))
    throw std::invalid_argument("linear_least_squares: shape mismatch");

  std::vector<double> ata(static_cast<std::size_t>(n_cols) * n_cols, 0.0);
  std::vector<double> atb(n_cols, 0.0);
  for (int i = 0; i < n_rows; ++i) {
    const double w = y_err.empty() ? 1.0 : 1.0 / y_err[i];
    const double w2 = w * w;
    const double* row = &design[i * static_cast<std::size_t>(n_cols)];
    for (int a = 0; a < n_cols; ++a) {
      atb[a] += w2 * row[a] * y[i];
      for (int b = a; b < n_cols; ++b) ata[a * n_cols + b] += w2 * row[a] * row[b];
    }
  }
  for (int a = 0; a < n_cols; ++a)
    for (int b = 0; b < a; ++b) ata[a * n_cols + b] = ata[b * n_cols + a];

  std::vector<double> inv;
  if (!cholesky_inverse(ata, n_cols, inv)) {
    out.status = FitStatus::singular;
    return out;
  }
  out.coeffs.assign(n_cols, 0.0);
  for (int a = 0; a < n_cols; ++a)
    for (int b = 0; b < n_cols; ++b) out.coeffs[a] += inv[a * n_cols + b] * atb[b];

  out.chi2 = 0.0;
  for (int i = 0; i < n_rows; ++i) {
    const double w = y_err.empty() ? 1.0 : 1.0 / y_err[i];
    double f = 0.0;
    const double* row = &design[i * static_cast<std::size_t>(n_cols)];
    for (int a = 0; a < n_cols; ++a) f += row[a] * out.coeffs[a];
    const double r = (y[i] - f) * w;
    out.chi2 += r * r;
  }
  out.dof = std::max(n_rows - n_cols, 0);
  const double scale = out.dof > 0 ? out.chi2 / out.dof : 1.0;
  out.covariance.assign(static_cast<std::size_t>(n_cols) * n_cols, 0.0);
  out.errors.assign(n_cols, 0.0);
  for (int a = 0; a < n_cols; ++a) {
    for (int b = 0; b < n_cols; ++b)
      out.covariance[a * n_cols + b] = inv[a * n_cols + b] * scale;
    out.errors[a] = std::sqrt(std::max(out.covariance[a * n_cols + a], 0.0));
  }
  out.status = FitStatus::converged;
  return out;
}

// ---------------------------------------------------------------------------
// Model registry.

namespace {

bool is_flat(std::span<const double> y) {
  if (y.empty()) return true;
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  const double scale = std::max(std::fabs(*lo), std::fabs(*hi));
  return (*hi - *lo) <= 1e-12 * std::max(scale, 1.0);
}

std::optional<std::vector<double>> guess_linear(std::span<const double> x,
                                                std::span<const double> y) {
  if (x.size() < 2) return std::nullopt;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const auto n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double det = n * sxx - sx * sx;
  if (det == 0) return std::nullopt;
  return std::vector<double>{(n * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det};
}

std::optional<std::vector<double>> guess_exponential(std::span<const double> x,
                                                     std::span<const double> y) {
  if (x.size() < 4 || is_flat(y)) return std::nullopt;
  // Offset from the decayed tail, then log-linear regression on the rest.
  std::vector<std::size_t> order(x.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  const std::size_t tail = std::max<std::size_t>(1, order.size() / 10);
  double offset = 0.0;
  for (std::size_t i = order.size() - tail; i < order.size(); ++i)
    offset += y[order[i]];
  offset /= static_cast<double>(tail);

  double ymax = y[0];
  for (double v : y) ymax = std::max(ymax, v);

  // Regress only the bright part; the faint tail is dominated by the offset
  // estimate and by noise once logs are taken.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int used = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = y[i] - offset;
    if (v <= 0.05 * (ymax - offset) || v <= 0) continue;
    const double ly = std::log(v);
    sx += x[i];
    sy += ly;
    sxx += x[i] * x[i];
    sxy += x[i] * ly;
    ++used;
  }
  if (used < 3) return std::nullopt;
  const double det = used * sxx - sx * sx;
  if (det == 0) return std::nullopt;
  const double slope = (used * sxy - sx * sy) / det;
  const double intercept = (sxx * sy - sx * sxy) / det;
  if (slope >= 0) return std::nullopt;
  return std::vector<double>{std::exp(intercept), -1.0 / slope, offset};
}

std::optional<std::vector<double>> guess_peak(std::span<const double> x,
                                              std::span<const double> y,
                                              bool gaussian) {
  if (x.size() < 5 || is_flat(y)) return std::nullopt;
  std::size_t ipk = 0;
  for (std::size_t i = 1; i < y.size(); ++i)
    if (y[i] > y[ipk]) ipk = i;
  // Baseline from the window edges.
  const double base = 0.5 * (y.front() + y.back());
  const double amp = y[ipk] - base;
  if (amp <= 0) return std::nullopt;
  const double half = base + 0.5 * amp;
  double left = x.front(), right = x.back();
  for (std::size_t i = ipk; i-- > 0;)
    if (y[i] < half) {
      left = x[i];
      break;
    }
  for (std::size_t i = ipk + 1; i < y.size(); ++i)
    if (y[i] < half) {
      right = x[i];
      break;
    }
  double fwhm = std::fabs(right - left);
  if (fwhm <= 0) fwhm = std::fabs(x.back() - x.front()) / 10.0;
  if (gaussian)
    return std::vector<double>{amp, x[ipk], fwhm / 2.3548200450309493, base};
  return std::vector<double>{amp, x[ipk], fwhm, base};
}

std::optional<std::vector<double>> guess_cos_squared(std::span<const double> x,
                                                     std::span<const double> y) {
  if (x.size() < 4 || is_flat(y)) return std::nullopt;
  // Quadrature phase estimate on the 2-theta harmonic.
  const double deg = std::numbers::pi / 180.0;
  double c = 0, s = 0, mean = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    c += y[i] * std::cos(2.0 * x[i] * deg);
    s += y[i] * std::sin(2.0 * x[i] * deg);
    mean += y[i];
  }
  const auto n = static_cast<double>(x.size());
  mean /= n;
  const double amp2 = 2.0 * std::hypot(c, s) / n;  // amplitude of the harmonic
  const double theta0 = 0.5 * std::atan2(s, c) / deg;
  const double b = 2.0 * amp2;
  return std::vector<double>{std::max(mean - b / 2.0, 0.0), b, theta0};
}

std::optional<std::vector<double>> guess_saturation(std::span<const double> x,
                                                    std::span<const double> y) {
  if (x.size() < 3 || is_flat(y)) return std::nullopt;
  double ymax = 0;
  for (double v : y) ymax = std::max(ymax, v);
  if (ymax <= 0) return std::nullopt;
  const double i_sat = 1.2 * ymax;
  double p_sat = x.back();
  for (std::size_t i = 0; i < x.size(); ++i)
    if (y[i] >= 0.5 * i_sat) {
      p_sat = std::max(x[i], 1e-12);
      break;
    }
  return std::vector<double>{i_sat, p_sat};
}

std::optional<std::vector<double>> guess_g2(std::span<const double> x,
                                            std::span<const double> y,
                                            bool three_level) {
  if (x.size() < (three_level ? 8u : 4u) || is_flat(y)) return std::nullopt;
  double ymin = y[0], ymax = y[0];
  for (double v : y) {
    ymin = std::min(ymin, v);
    ymax = std::max(ymax, v);
  }
  const double rho2 = std::clamp(1.0 - ymin, 1e-4, 1.0);
  const double rho = std::sqrt(rho2);

  // Walk outward in |tau|: the dip refills halfway at about tau1 ln 2.
  std::vector<std::size_t> order(x.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::fabs(x[a]) < std::fabs(x[b]);
  });
  double tau1 = 0.0;
  const double tmax_abs = std::fabs(x[order.back()]);
  for (std::size_t idx : order) {
    const double t = std::fabs(x[idx]);
    if (t > 0 && y[idx] >= 1.0 - 0.5 * rho2) {
      tau1 = t / 0.6931;
      break;
    }
  }
  if (tau1 <= 0) tau1 = tmax_abs / 5.0;
  if (!three_level) return std::vector<double>{tau1, rho};
  const double a = std::max((ymax - 1.0) / rho2, 0.0);
  double t_peak = 3.0 * tau1;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (y[i] == ymax) t_peak = std::max(std::fabs(x[i]), t_peak);
  return std::vector<double>{tau1, t_peak, a, rho};
}

std::map<std::string, Model, std::less<>> build_registry() {
  std::map<std::string, Model, std::less<>> reg;
  const double deg = std::numbers::pi / 180.0;

  reg["linear"] = Model{
      2,
      {"slope", "intercept"},
      [](double x, std::span<const double> p) { return p[0] * x + p[1]; },
      [](double x, std::span<const double>, std::span<double> g) {
        g[0] = x;
        g[1] = 1.0;
      },
      guess_linear};

  reg["exponential_decay"] = Model{
      3,
      {"amplitude", "tau", "offset"},
      [](double x, std::span<const double> p) {
        return p[0] * std::exp(-x / p[1]) + p[2];
      },
      [](double x, std::span<const double> p, std::span<double> g) {
        const double e = std::exp(-x / p[1]);
        g[0] = e;
        g[1] = p[0] * e * x / (p[1] * p[1]);
        g[2] = 1.0;
      },
      guess_exponential};

  reg["lorentzian"] = Model{
      4,
      {"amplitude", "center", "fwhm", "offset"},
      [](double x, std::span<const double> p) {
        const double u = p[2] * p[2] / 4.0;
        const double v = (x - p[1]) * (x - p[1]);
        return p[0] * u / (v + u) + p[3];
      },
      [](double x, std::span<const double> p, std::span<double> g) {
        const double u = p[2] * p[2] / 4.0;
        const double d = x - p[1];
        const double v = d * d;
        const double den = v + u;
        g[0] = u / den;
        g[1] = p[0] * u * 2.0 * d / (den * den);
        g[2] = p[0] * (p[2] / 2.0) * v / (den * den);
        g[3] = 1.0;
      },
      [](std::span<const double> x, std::span<const double> y) {
        return guess_peak(x, y, false);
      }};

  reg["gaussian"] = Model{
      4,
      {"amplitude", "center", "sigma", "offset"},
      [](double x, std::span<const double> p) {
        const double z = (x - p[1]) / p[2];
        return p[0] * std::exp(-0.5 * z * z) + p[3];
      },
      [](double x, std::span<const double> p, std::span<double> g) {
        const double z = (x - p[1]) / p[2];
        const double e = std::exp(-0.5 * z * z);
        g[0] = e;
        g[1] = p[0] * e * z / p[2];
        g[2] = p[0] * e * z * z / p[2];
        g[3] = 1.0;
      },
      [](std::span<const double> x, std::span<const double> y) {
        return guess_peak(x, y, true);
      }};

  reg["cos_squared"] = Model{
      3,
      {"offset", "amplitude", "theta0"},
      [deg](double x, std::span<const double> p) {
        const double c = std::cos((x - p[2]) * deg);
        return p[0] + p[1] * c * c;
      },
      [deg](double x, std::span<const double> p, std::span<double> g) {
        const double u = (x - p[2]) * deg;
        const double c = std::cos(u);
        g[0] = 1.0;
        g[1] = c * c;
        g[2] = p[1] * std::sin(2.0 * u) * deg;
      },
      guess_cos_squared};

  reg["saturation"] = Model{
      2,
      {"i_sat", "p_sat"},
      [](double x, std::span<const double> p) { return p[0] * x / (x + p[1]); },
      [](double x, std::span<const double> p, std::span<double> g) {
        const double den = x + p[1];
        g[0] = x / den;
        g[1] = -p[0] * x / (den * den);
      },
      guess_saturation};

  reg["g2_three_level"] = Model{
      4,
      {"tau1", "tau2", "a", "rho"},
      [](double x, std::span<const double> p) {
        const double t = std::fabs(x);
        const double e1 = std::exp(-t / p[0]);
        const double e2 = std::exp(-t / p[1]);
        return 1.0 + p[3] * p[3] * (p[2] * e2 - (1.0 + p[2]) * e1);
      },
      [](double x, std::span<const double> p, std::span<double> g) {
        const double t = std::fabs(x);
        const double e1 = std::exp(-t / p[0]);
        const double e2 = std::exp(-t / p[1]);
        const double rho2 = p[3] * p[3];
        g[0] = -rho2 * (1.0 + p[2]) * e1 * t / (p[0] * p[0]);
        g[1] = rho2 * p[2] * e2 * t / (p[1] * p[1]);
        g[2] = rho2 * (e2 - e1);
        g[3] = 2.0 * p[3] * (p[2] * e2 - (1.0 + p[2]) * e1);
      },
      [](std::span<const double> x, std::span<const double> y) {
        return guess_g2(x, y, true);
      }};

  reg["g2_two_level"] = Model{
      2,
      {"tau1", "rho"},
      [](double x, std::span<const double> p) {
        return 1.0 - p[1] * p[1] * std::exp(-std::fabs(x) / p[0]);
      },
      [](double x, std::span<const double> p, std::span<double> g) {
        const double t = std::fabs(x);
        const double e = std::exp(-t / p[0]);
        g[0] = -p[1] * p[1] * e * t / (p[0] * p[0]);
        g[1] = -2.0 * p[1] * e;
      },
      [](std::span<const double> x, std::span<const double> y) {
        return guess_g2(x, y, false);
      }};

  return reg;
}

const std::map<std::string, Model, std::less<>>& registry() {
  static const auto reg = build_registry();
  return reg;
}

}  // namespace

const Model& get_model(std::string_view name) {
  const auto& reg = registry();
  auto it = reg.find(name);
  if (it == reg.end())
    throw std::invalid_argument("unknown model: " + std::string(name));
  return it->second;
}

std::vector<std::string> registered_models() {
  std::vector<std::string> names;
  for (const auto& [name, _] : registry()) names.push_back(name);
  return names;
}

std::optional<std::vector<double>> initial_guess(std::string_view model,
                                                 std::span<const double> x,
                                                 std::span<const double> y) {
  const Model& m = get_model(model);
  if (!m.guess) return std::nullopt;
  return m.guess(x, y);
}

}  // namespace wsim
