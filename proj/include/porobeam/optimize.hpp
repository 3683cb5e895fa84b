#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "porobeam/tensor.hpp"

namespace porobeam::opt {

// ---- Adam ----

struct AdamOpts {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m, v;
  std::int64_t t = 0;

  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// Standard bias-corrected Adam update; increments the step count.
inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& st,
                      const AdamOpts& o = {}) {
  if (params.size() != grads.size() || params.size() != st.m.size())
    throw Error("adam_step: size mismatch");
  for (double g : grads)
    if (!std::isfinite(g)) throw Error("adam_step: non-finite gradient");
  st.t += 1;
  const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(st.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    st.m[i] = o.beta1 * st.m[i] + (1.0 - o.beta1) * grads[i];
    st.v[i] = o.beta2 * st.v[i] + (1.0 - o.beta2) * grads[i] * grads[i];
    const double mhat = st.m[i] / bc1;
    const double vhat = st.v[i] / bc2;
    params[i] -= o.lr * mhat / (std::sqrt(vhat) + o.eps);
  }
}

/// Returns (value, writes gradient). Deterministic by contract.
using LossFn = std::function<double(std::span<const double>, std::span<double>)>;

struct AdamRunResult {
  std::vector<double> x;
  std::vector<double> history;  // loss per step
};

inline AdamRunResult adam_run(const LossFn& fn, std::vector<double> x, std::size_t steps,
                              const AdamOpts& o = {}) {
  AdamState st(x.size());
  std::vector<double> g(x.size());
  AdamRunResult res;
  res.history.reserve(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    const double f = fn(x, g);
    res.history.push_back(f);
    adam_step(x, g, st, o);
  }
  res.x = std::move(x);
  return res;
}

// ---- L-BFGS with strong Wolfe line search ----

struct LbfgsOpts {
  std::size_t max_iter = 2000;
  std::size_t history = 20;
  std::size_t max_line_search = 30;  // trial evaluations per iteration
  double grad_tol = 1e-9;            // on the max-norm of the gradient
  double c1 = 1e-4;                  // sufficient decrease
  double c2 = 0.9;                   // curvature
};

struct LbfgsResult {
  std::vector<double> x;
  double f = 0.0;
  double grad_inf = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  bool line_search_failed = false;
  std::vector<double> history;  // loss after each accepted step
};

namespace detail {

struct Pair {
  std::vector<double> s, y;
  double rho;
};

inline void two_loop(const std::deque<Pair>& hist, const std::vector<double>& g,
                     std::vector<double>& d) {
  d.assign(g.begin(), g.end());
  std::vector<double> alpha(hist.size());
  for (std::size_t i = hist.size(); i-- > 0;) {
    alpha[i] = hist[i].rho * dot(hist[i].s, d);
    for (std::size_t k = 0; k < d.size(); ++k) d[k] -= alpha[i] * hist[i].y[k];
  }
  if (!hist.empty()) {
    const auto& last = hist.back();
    const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
    for (double& v : d) v *= gamma;
  }
  for (std::size_t i = 0; i < hist.size(); ++i) {
    const double beta = hist[i].rho * dot(hist[i].y, d);
    for (std::size_t k = 0; k < d.size(); ++k) d[k] += (alpha[i] - beta) * hist[i].s[k];
  }
  for (double& v : d) v = -v;
}

}  // namespace detail

/// Two-loop recursion with strong-Wolfe line search. Stops on the gradient
/// max-norm, the iteration cap, or line-search failure (best iterate is
/// returned, flagged). Accepted steps never increase the loss.
inline LbfgsResult lbfgs_run(const LossFn& fn, std::vector<double> x0, const LbfgsOpts& o = {}) {
  const std::size_t n = x0.size();
  LbfgsResult res;
  std::vector<double> g(n), d(n), x_new(n), g_new(n);
  double f = fn(x0, g);
  if (!std::isfinite(f)) throw Error("lbfgs: non-finite initial loss");
  res.history.push_back(f);
  std::deque<detail::Pair> hist;
  std::vector<double> x = std::move(x0);

  for (std::size_t it = 0; it < o.max_iter; ++it) {
    res.grad_inf = norm_inf(g);
    if (res.grad_inf <= o.grad_tol) {
      res.converged = true;
      break;
    }
    detail::two_loop(hist, g, d);
    double dg = dot(d, g);
    if (!(dg < 0.0)) {  // not a descent direction; restart from steepest descent
      hist.clear();
      for (std::size_t k = 0; k < n; ++k) d[k] = -g[k];
      dg = dot(d, g);
      if (!(dg < 0.0)) break;
    }

    // strong Wolfe: bracket then zoom (quadratic interpolation with
    // bisection safeguard)
    const double f0 = f, dg0 = dg;
    double alpha = hist.empty() ? std::min(1.0, 1.0 / std::max(1e-12, norm_inf(g))) : 1.0;
    double alpha_prev = 0.0, f_prev = f0, dg_prev = dg0;
    double alpha_lo = -1.0, alpha_hi = -1.0, f_lo = 0.0, dg_lo = 0.0;
    bool accepted = false, bracketed = false;
    std::size_t evals = 0;
    double f_trial = f0, dg_trial = 0.0;

    auto eval_at = [&](double a) {
      for (std::size_t k = 0; k < n; ++k) x_new[k] = x[k] + a * d[k];
      f_trial = fn(x_new, g_new);
      dg_trial = dot(d, g_new);
      ++evals;
    };

    while (evals < o.max_line_search) {
      eval_at(alpha);
      if (!std::isfinite(f_trial)) {  // overshoot into a bad region; back off
        alpha = 0.5 * (alpha_prev + alpha);
        continue;
      }
      if (f_trial > f0 + o.c1 * alpha * dg0 || (evals > 1 && f_trial >= f_prev)) {
        alpha_lo = alpha_prev;
        f_lo = f_prev;
        dg_lo = dg_prev;
        alpha_hi = alpha;
        bracketed = true;
        break;
      }
      if (std::abs(dg_trial) <= -o.c2 * dg0) {
        accepted = true;
        break;
      }
      if (dg_trial >= 0.0) {
        alpha_lo = alpha;
        f_lo = f_trial;
        dg_lo = dg_trial;
        alpha_hi = alpha_prev;
        bracketed = true;
        break;
      }
      alpha_prev = alpha;
      f_prev = f_trial;
      dg_prev = dg_trial;
      alpha *= 2.0;
    }
    while (bracketed && !accepted && evals < o.max_line_search) {
      // quadratic interpolation on (alpha_lo, f_lo, dg_lo) and f at alpha_hi
      double a = alpha_lo + 0.5 * (alpha_hi - alpha_lo);
      const double denom = 2.0 * (f_trial - f_lo - dg_lo * (alpha_hi - alpha_lo));
      if (std::abs(denom) > 1e-300) {
        const double interp = alpha_lo - dg_lo * (alpha_hi - alpha_lo) * (alpha_hi - alpha_lo) / denom;
        const double lo = std::min(alpha_lo, alpha_hi), hi = std::max(alpha_lo, alpha_hi);
        if (interp > lo + 0.1 * (hi - lo) && interp < hi - 0.1 * (hi - lo)) a = interp;
      }
      eval_at(a);
      if (!std::isfinite(f_trial) || f_trial > f0 + o.c1 * a * dg0 || f_trial >= f_lo) {
        alpha_hi = a;
        continue;
      }
      if (std::abs(dg_trial) <= -o.c2 * dg0) {
        alpha = a;
        accepted = true;
        break;
      }
      if (dg_trial * (alpha_hi - alpha_lo) >= 0.0) alpha_hi = alpha_lo;
      alpha_lo = a;
      f_lo = f_trial;
      dg_lo = dg_trial;
      alpha = a;
    }

    if (!accepted) {
      // keep the best point seen if the last trial improved on f
      if (std::isfinite(f_trial) && f_trial < f) {
        x = x_new;
        f = f_trial;
        g = g_new;
        res.history.push_back(f);
        res.iterations = it + 1;
      }
      res.line_search_failed = true;
      break;
    }

    // curvature-guarded history update
    detail::Pair pr;
    pr.s.resize(n);
    pr.y.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      pr.s[k] = x_new[k] - x[k];
      pr.y[k] = g_new[k] - g[k];
    }
    const double sy = dot(pr.s, pr.y);
    if (sy > 1e-10 * norm2(pr.s) * norm2(pr.y)) {
      pr.rho = 1.0 / sy;
      hist.push_back(std::move(pr));
      if (hist.size() > o.history) hist.pop_front();
    }
    x = x_new;
    f = f_trial;
    g = g_new;
    res.history.push_back(f);
    res.iterations = it + 1;
  }

  res.grad_inf = norm_inf(g);
  if (res.grad_inf <= o.grad_tol) res.converged = true;
  res.x = std::move(x);
  res.f = f;
  return res;
}

}  // namespace porobeam::opt
