#pragma once

// Box-constrained limited-memory BFGS with projected backtracking line search
// and central finite-difference gradients. Maximises; non-finite objective
// values mark infeasible trial points and are rejected by the line search.

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "sutse/error.hpp"
#include "sutse/linalg.hpp"
#include "sutse/parallel.hpp"

namespace sutse {

struct LbfgsOptions {
  int memory = 10;
  int max_iterations = 500;
  double relative_tolerance = 1e-9;  // on the objective change
  double gradient_tolerance = 1e-6;  // on the projected gradient norm
  double fd_step = 1e-6;             // h = fd_step * max(1, |x|)
  double armijo = 1e-4;
  int max_backtracks = 40;
  std::size_t threads = 1;           // finite-difference evaluations
};

struct OptimResult {
  VectorXd x;
  double value = -std::numeric_limits<double>::infinity();
  bool converged = false;
  bool at_boundary = false;
  int iterations = 0;
  int evaluations = 0;
  double gradient_norm = std::numeric_limits<double>::quiet_NaN();
  std::string message;
};

using Objective = std::function<double(const VectorXd&)>;

namespace detail {

inline VectorXd project(const VectorXd& x, const VectorXd& lo, const VectorXd& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

/// Gradient of the minimised function g = -f. One-sided differences near a
/// bound or where one side is infeasible.
inline VectorXd fd_gradient(const Objective& g, const VectorXd& x, double gx, const VectorXd& lo,
                            const VectorXd& hi, const LbfgsOptions& opts, int& evals) {
  const Index n = x.size();
  VectorXd grad(n);
  std::vector<double> fp(static_cast<std::size_t>(n)), fm(static_cast<std::size_t>(n));
  std::vector<double> hp(static_cast<std::size_t>(n)), hm(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), opts.threads, [&](std::size_t ii) {
    const Index i = static_cast<Index>(ii);
    const double h = opts.fd_step * std::max(1.0, std::abs(x(i)));
    VectorXd xp = x, xm = x;
    xp(i) = std::min(x(i) + h, hi(i));
    xm(i) = std::max(x(i) - h, lo(i));
    hp[ii] = xp(i) - x(i);
    hm[ii] = x(i) - xm(i);
    fp[ii] = hp[ii] > 0.0 ? g(xp) : gx;
    fm[ii] = hm[ii] > 0.0 ? g(xm) : gx;
  });
  for (Index i = 0; i < n; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    evals += (hp[ii] > 0.0) + (hm[ii] > 0.0);
    const bool okp = std::isfinite(fp[ii]) && hp[ii] > 0.0;
    const bool okm = std::isfinite(fm[ii]) && hm[ii] > 0.0;
    if (okp && okm)
      grad(i) = (fp[ii] - fm[ii]) / (hp[ii] + hm[ii]);
    else if (okp)
      grad(i) = (fp[ii] - gx) / hp[ii];
    else if (okm)
      grad(i) = (gx - fm[ii]) / hm[ii];
    else
      grad(i) = 0.0;
  }
  return grad;
}

inline VectorXd projected_gradient(const VectorXd& x, const VectorXd& grad, const VectorXd& lo,
                                   const VectorXd& hi) {
  VectorXd pg = grad;
  for (Index i = 0; i < x.size(); ++i) {
    if (x(i) <= lo(i) && grad(i) > 0.0) pg(i) = 0.0;
    if (x(i) >= hi(i) && grad(i) < 0.0) pg(i) = 0.0;
  }
  return pg;
}

}  // namespace detail

/// Maximises f over lo <= x <= hi starting at x0 (projected onto the box).
inline OptimResult maximize_lbfgs(const Objective& f, const VectorXd& x0, VectorXd lo, VectorXd hi,
                                  const LbfgsOptions& opts = {}) {
  const Index n = x0.size();
  if (lo.size() == 0) lo = VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
  if (hi.size() == 0) hi = VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  if (lo.size() != n || hi.size() != n) throw InputError("optimizer: bound vectors have the wrong length");
  if ((lo.array() > hi.array()).any()) throw InputError("optimizer: lower bound above upper bound");

  const Objective g = [&f](const VectorXd& x) {
    const double v = f(x);
    return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
  };

  OptimResult res;
  VectorXd x = detail::project(x0, lo, hi);
  double gx = g(x);
  res.evaluations = 1;
  if (!std::isfinite(gx)) {
    res.x = x;
    res.message = "objective not finite at the starting point";
    return res;
  }
  VectorXd grad = detail::fd_gradient(g, x, gx, lo, hi, opts, res.evaluations);
  std::deque<std::pair<VectorXd, VectorXd>> memory;

  auto finish = [&](bool converged, std::string msg) {
    res.x = x;
    res.value = -gx;
    res.converged = converged;
    res.gradient_norm = detail::projected_gradient(x, grad, lo, hi).norm();
    for (Index i = 0; i < n; ++i)
      if (std::abs(x(i) - lo(i)) < 1e-8 || std::abs(x(i) - hi(i)) < 1e-8) res.at_boundary = true;
    res.message = std::move(msg);
    return res;
  };

  for (int iter = 1; iter <= opts.max_iterations; ++iter) {
    res.iterations = iter;
    const VectorXd pg = detail::projected_gradient(x, grad, lo, hi);
    if (pg.norm() < opts.gradient_tolerance) return finish(true, "gradient norm below tolerance");

    // Two-loop recursion.
    VectorXd q = pg;
    std::vector<double> alpha(memory.size());
    for (std::size_t k = memory.size(); k-- > 0;) {
      const auto& [s, y] = memory[k];
      alpha[k] = s.dot(q) / y.dot(s);
      q -= alpha[k] * y;
    }
    if (!memory.empty()) {
      const auto& [s, y] = memory.back();
      q *= s.dot(y) / y.squaredNorm();
    } else {
      q /= std::max(1.0, pg.norm());
    }
    for (std::size_t k = 0; k < memory.size(); ++k) {
      const auto& [s, y] = memory[k];
      const double beta = y.dot(q) / y.dot(s);
      q += (alpha[k] - beta) * s;
    }
    VectorXd dir = -q;
    for (Index i = 0; i < n; ++i)
      if (pg(i) == 0.0) dir(i) = 0.0;
    if (dir.dot(pg) >= 0.0) {
      memory.clear();
      dir = -pg / std::max(1.0, pg.norm());
    }

    bool accepted = false;
    VectorXd x_new;
    double g_new = 0.0;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      double step = 1.0;
      for (int b = 0; b < opts.max_backtracks; ++b, step *= 0.5) {
        x_new = detail::project(x + step * dir, lo, hi);
        if ((x_new - x).cwiseAbs().maxCoeff() == 0.0) break;
        g_new = g(x_new);
        ++res.evaluations;
        if (std::isfinite(g_new) && g_new <= gx + opts.armijo * grad.dot(x_new - x)) {
          accepted = true;
          break;
        }
      }
      if (!accepted && !memory.empty()) {
        memory.clear();
        dir = -pg / std::max(1.0, pg.norm());
      } else {
        break;
      }
    }
    if (!accepted) return finish(false, "line search failed");

    const VectorXd grad_new = detail::fd_gradient(g, x_new, g_new, lo, hi, opts, res.evaluations);
    const VectorXd s = x_new - x, y = grad_new - grad;
    if (s.dot(y) > 1e-10 * s.norm() * y.norm()) {
      memory.emplace_back(s, y);
      if (static_cast<int>(memory.size()) > opts.memory) memory.pop_front();
    }
    const double rel = std::abs(gx - g_new) / std::max({std::abs(gx), std::abs(g_new), 1.0});
    x = x_new;
    gx = g_new;
    grad = grad_new;
    if (rel < opts.relative_tolerance) return finish(true, "relative objective change below tolerance");
  }
  return finish(false, "iteration limit reached");
}

}  // namespace sutse
