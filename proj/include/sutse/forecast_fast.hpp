#pragma once

// Fast same-step forecasting: per-dimension univariate Kalman filters that
// ignore cross-correlation, followed by an estimate of the limiting covariance
// of their one-step-ahead forecast errors v'_t.

#include <limits>
#include <string>
#include <vector>

#include "sutse/forecast_exact.hpp"
#include "sutse/parallel.hpp"
#include "sutse/state_space.hpp"
#include "sutse/sutse_builder.hpp"

namespace sutse {

struct FastFilterOutput {
  MatrixXd v_prime;         // n x d, NaN where missing
  MissingMask v_missing;    // n x d
  MatrixXd F_prime;         // n x d, NaN where missing
  std::vector<std::vector<VectorXd>> a_prime;  // [j][t], t = 1..n+1; empty unless stored
  std::vector<KalmanState> final_states;       // per dimension, time n+1
  VectorXd logliks;         // per-dimension objective
  VectorXd next_forecast;   // Z_j a'_{n+1,j}

  Index n() const { return v_prime.rows(); }
  Index d() const { return v_prime.cols(); }

  /// Stacked a'_t (1-based t, up to n+1).
  VectorXd stacked_state(Index t) const {
    Index p = 0;
    for (const auto& traj : a_prime) p += traj.at(static_cast<std::size_t>(t - 1)).size();
    VectorXd a(p);
    Index off = 0;
    for (const auto& traj : a_prime) {
      const auto& aj = traj[static_cast<std::size_t>(t - 1)];
      a.segment(off, aj.size()) = aj;
      off += aj.size();
    }
    return a;
  }
};

struct FastFilterOptions {
  bool store_states = true;
  std::size_t threads = 1;
};

/// Runs the scalar-observation filter of each block on its own column. Each
/// filter is the general kernel with d = 1 and observation variance
/// sigma_eps(j, j); dimensions are independent and may run concurrently.
inline FastFilterOutput run_univariate_filters(const SutseSpec& spec, const ObservationSeries& series,
                                               const FastFilterOptions& opts = {}) {
  const Index d = spec.d();
  if (series.d() != d)
    throw InputError("run_univariate_filters: series has " + std::to_string(series.d()) +
                     " columns, spec has d=" + std::to_string(d));
  for (Index j = 0; j < d; ++j)
    if (!(spec.sigma_eps(j, j) > 0.0))
      throw InputError("run_univariate_filters: sigma_eps(" + std::to_string(j + 1) + "," +
                       std::to_string(j + 1) + ") must be positive");

  const Index n = series.n();
  FastFilterOutput out;
  out.v_prime.resize(n, d);
  out.F_prime = MatrixXd::Constant(n, d, std::numeric_limits<double>::quiet_NaN());
  out.v_missing = series.missing;
  out.logliks.resize(d);
  out.next_forecast.resize(d);
  out.final_states.resize(static_cast<std::size_t>(d));
  if (opts.store_states) out.a_prime.resize(static_cast<std::size_t>(d));

  FilterStorage storage{true, opts.store_states, false};
  parallel_for(static_cast<std::size_t>(d), opts.threads, [&](std::size_t jj) {
    const Index j = static_cast<Index>(jj);
    const StateSpaceModel m = block_model(spec, j);
    FilterOutput f = kalman_filter(m, series.column(j), storage, std::nullopt, j);
    out.v_prime.col(j) = f.v.col(0);
    for (Index t = 0; t < n; ++t)
      if (f.F[static_cast<std::size_t>(t)].size() != 0) out.F_prime(t, j) = f.F[static_cast<std::size_t>(t)](0, 0);
    out.logliks(j) = f.loglik;
    out.next_forecast(j) = (m.Z * f.final_state.a)(0);
    if (opts.store_states) out.a_prime[jj] = std::move(f.a);
    out.final_states[jj] = std::move(f.final_state);
  });
  return out;
}

enum class CovMethod { Sample, Glasso };

struct ErrorCovEstimate {
  MatrixXd V;     // d x d
  Index n0 = 5;   // first time index (1-based) in the average
  Index m = 0;    // number of complete rows used
  CovMethod method = CovMethod::Sample;
  double lambda = 0.0;

  /// Fewer complete rows than d + 1: the sample estimate is singular or close.
  bool underdetermined() const { return m < V.rows() + 1; }
};

/// (1/m) sum_{t=n0}^{n} v'_t v'_t^T over rows with every component observed.
/// Uncentred: the limiting mean of v'_t is zero.
inline ErrorCovEstimate sample_error_cov(const FastFilterOutput& fast, Index n0 = 5) {
  const Index n = fast.n(), d = fast.d();
  if (n0 < 1 || n0 > n)
    throw InputError("sample_error_cov: n0=" + std::to_string(n0) + " outside [1, " + std::to_string(n) + "]");
  ErrorCovEstimate est;
  est.n0 = n0;
  est.V = MatrixXd::Zero(d, d);
  for (Index t = n0 - 1; t < n; ++t) {
    if (fast.v_missing.row(t).any()) continue;
    const VectorXd v = fast.v_prime.row(t).transpose();
    est.V.selfadjointView<Eigen::Lower>().rankUpdate(v);
    ++est.m;
  }
  if (est.m == 0) throw InputError("sample_error_cov: no fully observed rows in [n0, n]");
  MatrixXd full = est.V.selfadjointView<Eigen::Lower>();
  est.V = full / static_cast<double>(est.m);
  return est;
}

/// Z a'_{n+1} assembled from the per-dimension states.
inline VectorXd fast_one_step(const FastFilterOutput& fast, const SutseSpec& spec) {
  const Index d = spec.d();
  VectorXd y(d);
  for (Index j = 0; j < d; ++j)
    y(j) = (spec.blocks[static_cast<std::size_t>(j)].Z * fast.final_states[static_cast<std::size_t>(j)].a)(0);
  return y;
}

/// [Z a'_{n+1}](k) + V(k,A) V(A,A)^{-1} v'_{n+1}(A).
inline double fast_same_step(const FastFilterOutput& fast, const ErrorCovEstimate& cov,
                             const SameStepRequest& req) {
  const Index d = fast.d();
  req.validate(d);
  if (cov.V.rows() != d || cov.V.cols() != d) throw InputError("fast_same_step: covariance has wrong size");
  const VectorXd v_a = req.observed_vals - linalg::select(fast.next_forecast, req.observed_idx);
  return fast.next_forecast(req.target) +
         detail::same_step_correction(
             cov.V, req.observed_idx, req.target, v_a,
             "fast same-step forecast: estimated V(A,A) is singular; try the graphical-lasso estimate");
}

}  // namespace sutse
