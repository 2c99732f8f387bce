#pragma once

// Limited-memory BFGS ascent with a strong-Wolfe line search.
//
// The objective is any callable `double(const Vector& x, Vector& grad)` that
// returns the value to maximize and writes its gradient.

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "piecewise/core.hpp"

namespace piecewise {

struct OptimizerSettings {
  int memory = 10;
  int max_iterations = 500;
  double gradient_tolerance = 1e-5;  // on the gradient max-norm
  double sufficient_decrease = 1e-4;
  double curvature = 0.9;
  int max_line_search_evaluations = 40;

  void validate() const {
    if (memory < 1) throw std::invalid_argument("optimizer memory must be >= 1");
    if (max_iterations < 0) throw std::invalid_argument("optimizer max_iterations must be >= 0");
    if (!(gradient_tolerance > 0)) throw std::invalid_argument("gradient tolerance must be > 0");
    if (!(sufficient_decrease > 0 && sufficient_decrease < curvature && curvature < 1))
      throw std::invalid_argument("Wolfe parameters must satisfy 0 < c1 < c2 < 1");
  }
};

struct OptimizationTrace {
  int iterations = 0;
  int evaluations = 0;
  double final_value = 0.0;
  double final_gradient_norm = 0.0;
  bool converged = false;
  std::vector<double> values;  // values[0] is the starting point, then one per accepted step
};

struct OptimizationResult {
  Vector theta;
  OptimizationTrace trace;
};

/// Thrown when the objective produces non-finite output or no step can be found.
class OptimizationError : public NumericalError {
 public:
  OptimizationError(const std::string& what, OptimizationTrace trace)
      : NumericalError(what), trace_(std::move(trace)) {}
  const OptimizationTrace& trace() const { return trace_; }

 private:
  OptimizationTrace trace_;
};

using IterationCallback = std::function<void(const OptimizationTrace&)>;

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double max_norm(std::span<const double> a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

/// Minimizer of the cubic interpolating (a, fa, da) and (b, fb, db), clamped into the
/// middle 80% of the interval; bisection when the cubic is degenerate.
inline double cubic_step(double a, double fa, double da, double b, double fb, double db) {
  const double lo = std::min(a, b), hi = std::max(a, b);
  const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - da * db;
  double t = 0.5 * (a + b);
  if (disc >= 0.0) {
    const double d2 = std::copysign(std::sqrt(disc), b - a);
    const double denom = db - da + 2.0 * d2;
    if (denom != 0.0) t = b - (b - a) * (db + d2 - d1) / denom;
  }
  const double margin = 0.1 * (hi - lo);
  if (!std::isfinite(t) || t < lo + margin || t > hi - margin) t = 0.5 * (a + b);
  return t;
}

}  // namespace detail

/// Maximizes `objective` from `theta0`. Stops when the gradient max-norm drops to the
/// tolerance (converged) or after max_iterations steps (not converged).
template <class Objective>
OptimizationResult maximize(Objective&& objective, Vector theta0, const OptimizerSettings& settings = {},
                            const IterationCallback& on_iteration = {}) {
  settings.validate();
  const std::size_t n = theta0.size();
  OptimizationResult result;
  OptimizationTrace& trace = result.trace;
  Vector x = std::move(theta0);
  Vector grad(n, 0.0);

  // Internally minimize f = -value.
  auto evaluate = [&](const Vector& at, Vector& g) {
    ++trace.evaluations;
    const double v = objective(at, g);
    if (!std::isfinite(v) || !all_finite(g)) {
      std::ostringstream msg;
      msg << "objective returned a non-finite " << (std::isfinite(v) ? "gradient" : "value")
          << " at evaluation " << trace.evaluations;
      throw OptimizationError(msg.str(), trace);
    }
    for (double& gi : g) gi = -gi;
    return -v;
  };

  double f = evaluate(x, grad);
  trace.values.push_back(-f);

  std::deque<std::pair<Vector, Vector>> history;  // (s, y) pairs, newest last
  Vector dir(n), x_new(n), g_new(n), alpha_buf;

  auto finish = [&](bool converged) {
    trace.final_value = -f;
    trace.final_gradient_norm = detail::max_norm(grad);
    trace.converged = converged;
    result.theta = x;
    return result;
  };

  // Strong-Wolfe line search along dir; on success x_new/g_new/f_new hold the new point.
  auto line_search = [&](double step0, double& f_new) -> bool {
    const double c1 = settings.sufficient_decrease, c2 = settings.curvature;
    const double d0 = detail::dot(grad, dir);
    if (!(d0 < 0.0)) return false;
    auto try_step = [&](double a, double& fa, double& da) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = x[i] + a * dir[i];
      fa = evaluate(x_new, g_new);
      da = detail::dot(g_new, dir);
    };
    double a_prev = 0.0, f_prev = f, d_prev = d0;
    double a = step0;
    double lo = 0, hi = 0, f_lo = f, d_lo = d0, f_hi = 0, d_hi = 0;
    bool bracketed = false;
    int evals = 0;
    while (evals < settings.max_line_search_evaluations) {
      double fa, da;
      try_step(a, fa, da);
      ++evals;
      if (fa > f + c1 * a * d0 || (evals > 1 && fa >= f_prev)) {
        lo = a_prev; f_lo = f_prev; d_lo = d_prev;
        hi = a; f_hi = fa; d_hi = da;
        bracketed = true;
        break;
      }
      if (std::abs(da) <= -c2 * d0) {
        f_new = fa;
        return true;
      }
      if (da >= 0.0) {
        lo = a; f_lo = fa; d_lo = da;
        hi = a_prev; f_hi = f_prev; d_hi = d_prev;
        bracketed = true;
        break;
      }
      a_prev = a; f_prev = fa; d_prev = da;
      a *= 2.0;
    }
    if (!bracketed) return false;

    while (evals < settings.max_line_search_evaluations && std::abs(hi - lo) > 1e-16 * std::max(1.0, lo)) {
      const double t = detail::cubic_step(lo, f_lo, d_lo, hi, f_hi, d_hi);
      double ft, dt;
      try_step(t, ft, dt);
      ++evals;
      if (ft > f + c1 * t * d0 || ft >= f_lo) {
        hi = t; f_hi = ft; d_hi = dt;
      } else {
        if (std::abs(dt) <= -c2 * d0) {
          f_new = ft;
          return true;
        }
        if (dt * (hi - lo) >= 0.0) {
          hi = lo; f_hi = f_lo; d_hi = d_lo;
        }
        lo = t; f_lo = ft; d_lo = dt;
      }
    }
    // Curvature condition never met: settle for the best sufficient-decrease point.
    if (lo > 0.0 && f_lo < f) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = x[i] + lo * dir[i];
      f_new = evaluate(x_new, g_new);
      return f_new < f;
    }
    return false;
  };

  for (;;) {
    if (detail::max_norm(grad) <= settings.gradient_tolerance) return finish(true);
    if (trace.iterations >= settings.max_iterations) return finish(false);

    // Two-loop recursion for dir = -H grad.
    dir = grad;
    alpha_buf.assign(history.size(), 0.0);
    for (std::size_t k = history.size(); k-- > 0;) {
      const auto& [s, y] = history[k];
      alpha_buf[k] = detail::dot(s, dir) / detail::dot(y, s);
      add_scaled(dir, y, -alpha_buf[k]);
    }
    if (!history.empty()) {
      const auto& [s, y] = history.back();
      const double gamma = detail::dot(s, y) / detail::dot(y, y);
      for (double& d : dir) d *= gamma;
    }
    for (std::size_t k = 0; k < history.size(); ++k) {
      const auto& [s, y] = history[k];
      const double beta = detail::dot(y, dir) / detail::dot(y, s);
      add_scaled(dir, s, alpha_buf[k] - beta);
    }
    for (double& d : dir) d = -d;

    double step0 = 1.0;
    if (history.empty()) step0 = std::min(1.0, 1.0 / std::sqrt(detail::dot(grad, grad)));

    double f_new = f;
    bool ok = line_search(step0, f_new);
    if (!ok && !history.empty()) {
      // Fall back to steepest descent with a fresh memory.
      history.clear();
      dir = grad;
      for (double& d : dir) d = -d;
      ok = line_search(std::min(1.0, 1.0 / std::sqrt(detail::dot(grad, grad))), f_new);
    }
    if (!ok) {
      finish(false);
      std::ostringstream msg;
      msg << "line search failed at iteration " << trace.iterations << " (value " << -f
          << ", gradient max-norm " << detail::max_norm(grad) << ")";
      throw OptimizationError(msg.str(), trace);
    }

    Vector s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = x_new[i] - x[i];
      y[i] = g_new[i] - grad[i];
    }
    const double sy = detail::dot(s, y);
    if (sy > 1e-12 * std::sqrt(detail::dot(s, s) * detail::dot(y, y))) {
      history.emplace_back(std::move(s), std::move(y));
      if (history.size() > static_cast<std::size_t>(settings.memory)) history.pop_front();
    }
    x.swap(x_new);
    grad.swap(g_new);
    f = f_new;
    ++trace.iterations;
    trace.values.push_back(-f);
    if (on_iteration) {
      trace.final_value = -f;
      trace.final_gradient_norm = detail::max_norm(grad);
      on_iteration(trace);
    }
  }
}

}  // namespace piecewise
