#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace lyap {

// ---------------------------------------------------------------------------
// Smoothed quasi-Newton minimization.
//
// Nonsmooth max/min structured objectives are passed in twice: the exact
// evaluation and a tau-smoothed surrogate (log-sum-exp in place of max).
// Minimization runs through a decreasing temperature schedule, warm-starting
// each stage, and the result always reports the best *exact* value seen, so
// the caller's bound stays valid no matter how the surrogate behaved.
// ---------------------------------------------------------------------------

struct OptimizerSettings {
  int max_iters = 500;  // per temperature stage
  double grad_tol = 1e-8;
  std::vector<double> temperatures = {1.0, 0.1, 0.01};  // strictly decreasing
  std::uint64_t seed = 0;                               // reserved for perturbations
  std::function<void(int, double)> on_accept;  // test hook: (iteration, smoothed value)
};

struct OptimizerResult {
  Eigen::VectorXd point;
  double value = std::numeric_limits<double>::quiet_NaN();  // exact objective at point
  double smoothed_value = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  double grad_norm = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
};

struct SmoothedObjective {
  std::function<double(const Eigen::VectorXd&)> exact;
  // returns the surrogate value at temperature tau and fills its gradient
  std::function<double(const Eigen::VectorXd&, double, Eigen::VectorXd&)> smoothed;
};

namespace detail {

// Two-point cubic interpolation step for backtracking (values relative to
// phi(0) = f0 with slope g0 < 0). Falls back to bisection on degeneracy.
inline double cubic_backtrack(double f0, double g0, double a1, double f1,
                              double a0, double fprev) {
  const double r1 = f1 - f0 - g0 * a1;
  const double r0 = fprev - f0 - g0 * a0;
  const double denom = a0 * a0 * a1 * a1 * (a1 - a0);
  if (denom == 0.0) return a1 / 2.0;
  const double a = (a0 * a0 * r1 - a1 * a1 * r0) / denom;
  const double b = (-a0 * a0 * a0 * r1 + a1 * a1 * a1 * r0) / denom;
  if (a == 0.0) {
    if (b == 0.0) return a1 / 2.0;
    return -g0 / (2.0 * b);
  }
  const double disc = b * b - 3.0 * a * g0;
  if (disc < 0.0) return a1 / 2.0;
  return (-b + std::sqrt(disc)) / (3.0 * a);
}

}  // namespace detail

inline OptimizerResult minimize_smoothed(const SmoothedObjective& f, Eigen::VectorXd x0,
                                         const OptimizerSettings& settings = {}) {
  if (settings.temperatures.empty())
    throw std::invalid_argument("temperature schedule is empty");
  for (std::size_t i = 0; i + 1 < settings.temperatures.size(); ++i)
    if (!(settings.temperatures[i] > settings.temperatures[i + 1]))
      throw std::invalid_argument("temperatures must be strictly decreasing");
  if (!(settings.grad_tol > 0.0)) throw std::invalid_argument("grad_tol must be positive");

  const Eigen::Index d = x0.size();
  Eigen::VectorXd x = std::move(x0);
  double best_exact = f.exact(x);
  if (!std::isfinite(best_exact))
    throw std::invalid_argument("objective is not finite at the start point");
  Eigen::VectorXd best_x = x;

  Eigen::VectorXd g(d), g_trial(d), p(d), s(d), yv(d), x_trial(d), hy(d);
  int total_iters = 0;
  bool converged = false;
  double shift = 0.0;
  bool shift_set = false;
  double last_grad_norm = std::numeric_limits<double>::quiet_NaN();
  const double c1 = 1e-4;

  for (double tau : settings.temperatures) {
    double fx = f.smoothed(x, tau, g);
    if (!shift_set) {
      // value shift at the start point; conditions the Armijo thresholds only
      shift = fx;
      shift_set = true;
    }
    fx -= shift;
    if (!std::isfinite(fx))
      throw std::invalid_argument("smoothed objective is not finite at the start point");
    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(d, d);
    bool stage_converged = false;

    for (int iter = 0; iter < settings.max_iters; ++iter) {
      last_grad_norm = g.norm();
      if (last_grad_norm <= settings.grad_tol) {
        stage_converged = true;
        break;
      }
      p.noalias() = -(h * g);
      double gp = g.dot(p);
      if (!(gp < 0.0)) {
        h.setIdentity();
        p = -g;
        gp = g.dot(p);
        if (!(gp < 0.0)) break;
      }

      double step = 1.0;
      double f_trial = std::numeric_limits<double>::quiet_NaN();
      double prev_step = 0.0, prev_f = 0.0;
      bool accepted = false;
      for (int ls = 0; ls < 60; ++ls) {
        x_trial = x + step * p;
        f_trial = f.smoothed(x_trial, tau, g_trial) - shift;
        if (std::isfinite(f_trial) && f_trial <= fx + c1 * step * gp) {
          accepted = true;
          break;
        }
        double next;
        if (ls == 0 || !std::isfinite(f_trial)) {
          const double denom = 2.0 * (f_trial - fx - gp * step);
          next = (std::isfinite(f_trial) && denom != 0.0)
                     ? -gp * step * step / denom
                     : step / 2.0;
        } else {
          next = detail::cubic_backtrack(fx, gp, step, f_trial, prev_step, prev_f);
        }
        if (!std::isfinite(next)) next = step / 2.0;
        prev_step = step;
        prev_f = f_trial;
        step = std::clamp(next, 0.1 * step, 0.5 * step);
      }
      if (!accepted) {
        if (!h.isIdentity(0.0)) {
          h.setIdentity();
          continue;
        }
        break;  // no progress at this temperature; move on
      }

      s = x_trial - x;
      yv = g_trial - g;
      x.swap(x_trial);
      fx = f_trial;
      g.swap(g_trial);
      ++total_iters;
      if (settings.on_accept) settings.on_accept(total_iters, fx + shift);

      const double ex = f.exact(x);
      if (ex < best_exact) {
        best_exact = ex;
        best_x = x;
      }

      const double sy = s.dot(yv);
      if (sy > 1e-12 * s.norm() * yv.norm()) {
        const double rho = 1.0 / sy;
        hy.noalias() = h * yv;
        const double yhy = yv.dot(hy);
        h.noalias() -= rho * (s * hy.transpose() + hy * s.transpose());
        h.noalias() += (rho * rho * yhy + rho) * (s * s.transpose());
      } else {
        h.setIdentity();  // curvature failed; restart the metric
      }
    }
    converged = stage_converged;
  }

  OptimizerResult result;
  result.point = best_x;
  result.value = best_exact;
  Eigen::VectorXd gb(d);
  result.smoothed_value = f.smoothed(best_x, settings.temperatures.back(), gb);
  result.iterations = total_iters;
  result.grad_norm = last_grad_norm;
  result.converged = converged;
  return result;
}

// ---------------------------------------------------------------------------
// Frank-Wolfe over a compact convex set with a linear maximization oracle.
//
// For a concave objective the gap <grad, S - X> at the oracle point S bounds
// the remaining suboptimality, so value + gap is a certified one-sided bound
// on the supremum at every iterate. The result keeps the smallest certified
// value seen, which is what the bound reports need.
// ---------------------------------------------------------------------------

struct FwOptions {
  double tol = 1e-9;
  int max_iters = 5000;
};

template <class Point>
struct FwProblem {
  std::function<double(const Point&, Point&)> value_and_grad;
  std::function<Point(const Point&)> linear_oracle;  // argmax_S <grad, S>
  std::function<double(const Point&, const Point&)> inner;
  // optional exact maximizer of f(x + t (s - x)) over t in [0,1]
  std::function<double(const Point&, const Point&)> segment_max;
  std::function<Point()> restart_point;  // recovery start after a degenerate value
  std::function<void(const Point&)> on_iterate;  // observation hook, pre-step
};

template <class Point>
struct FwResult {
  Point point;
  double value = std::numeric_limits<double>::quiet_NaN();
  double gap = std::numeric_limits<double>::infinity();
  double certified_value = std::numeric_limits<double>::infinity();
  double certified_gap = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
  bool degenerate = false;  // objective stayed -inf even after a restart
};

template <class Point>
FwResult<Point> frank_wolfe(const FwProblem<Point>& prob, Point x0,
                            const FwOptions& opts = {}) {
  FwResult<Point> res;
  Point x = std::move(x0);
  Point g = x;
  bool restarted = false;
  for (int t = 0; t < opts.max_iters; ++t) {
    res.iterations = t + 1;
    if (prob.on_iterate) prob.on_iterate(x);
    const double v = prob.value_and_grad(x, g);
    if (!std::isfinite(v)) {
      if (prob.restart_point && !restarted) {
        restarted = true;
        x = prob.restart_point();
        continue;
      }
      res.point = std::move(x);
      res.degenerate = true;
      return res;
    }
    Point s = prob.linear_oracle(g);
    double gap = prob.inner(g, s) - prob.inner(g, x);
    if (gap < 0.0) gap = 0.0;  // oracle exactness slack
    res.value = v;
    res.gap = gap;
    if (v + gap < res.certified_value) {
      res.certified_value = v + gap;
      res.certified_gap = gap;
    }
    if (gap <= opts.tol) {
      res.converged = true;
      break;
    }
    double step = prob.segment_max ? std::clamp(prob.segment_max(x, s), 0.0, 1.0)
                                   : 2.0 / (t + 2.0);
    if (step <= 0.0) step = 2.0 / (t + 2.0);
    x = x + step * (s - x);
  }
  res.point = std::move(x);
  return res;
}

/// Maximizes sum_i w_i * log(a_i + t * b_i) over t in [0,1]; every a_i must be
/// positive. The derivative is decreasing in t, so bisection is exact.
inline double maximize_log_affine_mix(const std::vector<double>& w,
                                      const std::vector<double>& a,
                                      const std::vector<double>& b) {
  auto deriv = [&](double t) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * b[i] / (a[i] + t * b[i]);
    return s;
  };
  double hi = 1.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] + b[i] <= 0.0) {
      // the segment endpoint touches the log barrier; stay strictly inside
      hi = 1.0 - 1e-12;
      break;
    }
  if (deriv(0.0) <= 0.0) return 0.0;
  if (deriv(hi) >= 0.0) return hi;
  double lo = 0.0;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (deriv(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace lyap
