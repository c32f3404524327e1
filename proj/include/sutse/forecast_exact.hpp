#pragma once

// One-step-ahead and same-step forecasts from the full Kalman filter.

#include <algorithm>
#include <string>
#include <vector>

#include "sutse/linalg.hpp"
#include "sutse/state_space.hpp"

namespace sutse {

/// Components of y_{n+1} already seen, and the component to forecast.
/// Indices are 0-based.
struct SameStepRequest {
  IndexList observed_idx;
  VectorXd observed_vals;
  Index target = 0;

  void validate(Index d) const {
    if (static_cast<Index>(observed_idx.size()) != observed_vals.size())
      throw InputError("same-step request: " + std::to_string(observed_idx.size()) + " indices but " +
                       std::to_string(observed_vals.size()) + " values");
    if (target < 0 || target >= d) throw InputError("same-step request: target out of range");
    IndexList sorted = observed_idx;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw InputError("same-step request: repeated observed index");
    for (Index i : observed_idx) {
      if (i < 0 || i >= d) throw InputError("same-step request: observed index out of range");
      if (i == target) throw InputError("same-step request: target is among the observed components");
    }
    for (Index i = 0; i < observed_vals.size(); ++i)
      if (!std::isfinite(observed_vals(i)))
        throw InputError("same-step request: observed value " + std::to_string(i + 1) + " is missing");
  }
};

/// Z a_{n+1}.
inline VectorXd one_step_forecast(const StateSpaceModel& model, const FilterOutput& out) {
  return model.Z * out.final_state.a;
}

/// F_{n+1} = Z P_{n+1} Z^T + sigma_eps.
inline MatrixXd next_innovation_covariance(const StateSpaceModel& model, const FilterOutput& out) {
  MatrixXd F = model.Z * out.final_state.P * model.Z.transpose() + model.sigma_eps;
  linalg::symmetrize(F);
  return F;
}

/// E(x_u | x_A = values) for every coordinate u not in A, in increasing
/// index order.
inline VectorXd conditional_gaussian_mean(const VectorXd& mean, const MatrixXd& cov,
                                          const IndexList& observed, const VectorXd& values) {
  const Index m = mean.size();
  if (cov.rows() != m || cov.cols() != m) throw InputError("conditional mean: covariance shape mismatch");
  if (static_cast<Index>(observed.size()) != values.size())
    throw InputError("conditional mean: index/value length mismatch");
  std::vector<bool> in_a(static_cast<std::size_t>(m), false);
  for (Index i : observed) {
    if (i < 0 || i >= m) throw InputError("conditional mean: index out of range");
    in_a[static_cast<std::size_t>(i)] = true;
  }
  IndexList rest;
  for (Index i = 0; i < m; ++i)
    if (!in_a[static_cast<std::size_t>(i)]) rest.push_back(i);

  VectorXd result = linalg::select(mean, rest);
  if (observed.empty()) return result;

  const MatrixXd caa = linalg::select(cov, observed, observed);
  Eigen::LLT<MatrixXd> llt(caa);
  if (llt.info() != Eigen::Success) throw NumericalError("conditional mean: observed block V(x_A) is singular");
  const VectorXd dev = values - linalg::select(mean, observed);
  result += linalg::select(cov, rest, observed) * llt.solve(dev);
  return result;
}

namespace detail {

/// cov(k, A) cov(A, A)^{-1} innovation_A, solved by Cholesky.
inline double same_step_correction(const MatrixXd& cov, const IndexList& observed, Index target,
                                   const VectorXd& innovation_a, const char* what) {
  if (observed.empty()) return 0.0;
  const MatrixXd caa = linalg::select(cov, observed, observed);
  Eigen::LLT<MatrixXd> llt(caa);
  if (llt.info() != Eigen::Success) throw NumericalError(what);
  const MatrixXd cka = linalg::select(cov, IndexList{target}, observed);
  return (cka * llt.solve(innovation_a))(0, 0);
}

}  // namespace detail

/// [Z a_{n+1}](k) + F_{n+1}(k,A) F_{n+1}(A,A)^{-1} v_{n+1}(A), with
/// v_{n+1}(A) = observed values minus their one-step forecasts. A may be any
/// index set, not only a prefix.
inline double same_step_forecast(const StateSpaceModel& model, const FilterOutput& out,
                                 const SameStepRequest& req) {
  req.validate(model.d());
  const VectorXd base = one_step_forecast(model, out);
  const MatrixXd F = next_innovation_covariance(model, out);
  const VectorXd v_a = req.observed_vals - linalg::select(base, req.observed_idx);
  return base(req.target) +
         detail::same_step_correction(F, req.observed_idx, req.target, v_a,
                                      "same-step forecast: F_{n+1}(A,A) is singular");
}

}  // namespace sutse
