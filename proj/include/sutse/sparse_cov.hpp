#pragma once

// L1-penalised precision estimation
//
//   minimise  -log|Omega| + tr(Omega S) + lambda * sum_{j,k} |Omega(j,k)|
//
// (diagonal penalised) by block coordinate descent over columns. Each column
// update minimises the objective exactly over (omega_12, omega_22) with the
// rest of Omega fixed: omega_22 has a closed form and omega_12 solves a lasso
// in the Schur complement, done by cyclic coordinate descent. Because every
// block step is an exact minimiser, the objective is nonincreasing across
// sweeps and Omega stays positive definite. W = Omega^{-1} is carried along
// so the Schur complement costs O(d^2) per column.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "sutse/error.hpp"
#include "sutse/forecast_fast.hpp"
#include "sutse/linalg.hpp"

namespace sutse {

struct GlassoOptions {
  double tolerance = 1e-8;  // relative to mean |diag(S)|
  int max_sweeps = 200;
  double inner_tolerance = 1e-13;
  int max_inner = 10000;
};

struct GlassoResult {
  MatrixXd omega;
  MatrixXd V_glasso;  // omega^{-1}
  double lambda = 0.0;
  std::vector<double> objective_trace;  // initial point, then one value per sweep
  int iterations = 0;
};

namespace detail {

inline double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

inline double glasso_objective(const MatrixXd& omega, const MatrixXd& S, double lambda) {
  Eigen::LLT<MatrixXd> llt(omega);
  if (llt.info() != Eigen::Success) throw NumericalError("graphical lasso: iterate lost positive definiteness");
  double log_det = 0.0;
  for (Index i = 0; i < omega.rows(); ++i) log_det += 2.0 * std::log(llt.matrixLLT()(i, i));
  return -log_det + (omega.cwiseProduct(S)).sum() + lambda * omega.cwiseAbs().sum();
}

}  // namespace detail

/// Graphical lasso with every entry of Omega penalised. `warm_start`, when
/// given, must be symmetric positive definite.
inline GlassoResult graphical_lasso(const MatrixXd& S, double lambda, const GlassoOptions& opts = {},
                                    const std::optional<MatrixXd>& warm_start = std::nullopt) {
  const Index d = S.rows();
  if (d < 1 || S.cols() != d) throw InputError("graphical lasso: S must be square and non-empty");
  if (!S.allFinite() || !linalg::is_symmetric(S, 1e-10)) throw InputError("graphical lasso: S must be symmetric");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InputError("graphical lasso: lambda must be >= 0");
  if (lambda == 0.0 && !linalg::is_pd(S))
    throw InputError("graphical lasso: lambda = 0 requires a positive definite S");
  for (Index i = 0; i < d; ++i)
    if (!(S(i, i) + lambda > 0.0)) throw InputError("graphical lasso: S(i,i) + lambda must be positive");

  GlassoResult res;
  res.lambda = lambda;
  MatrixXd omega, W;
  if (warm_start) {
    omega = *warm_start;
    Eigen::LLT<MatrixXd> llt(omega);
    if (omega.rows() != d || llt.info() != Eigen::Success)
      throw InputError("graphical lasso: warm start must be a d x d positive definite matrix");
    W = llt.solve(MatrixXd::Identity(d, d));
  } else {
    omega = MatrixXd::Zero(d, d);
    W = MatrixXd::Zero(d, d);
    for (Index i = 0; i < d; ++i) {
      omega(i, i) = 1.0 / (S(i, i) + lambda);
      W(i, i) = S(i, i) + lambda;
    }
  }
  res.objective_trace.push_back(detail::glasso_objective(omega, S, lambda));

  const double scale = S.diagonal().cwiseAbs().mean();
  const double tol = opts.tolerance * (scale > 0.0 ? scale : 1.0);

  IndexList rest(static_cast<std::size_t>(std::max<Index>(d - 1, 0)));
  bool converged = (d == 1);
  if (d == 1) {
    omega(0, 0) = 1.0 / (S(0, 0) + lambda);
    W(0, 0) = S(0, 0) + lambda;
    res.objective_trace.push_back(detail::glasso_objective(omega, S, lambda));
    res.iterations = 1;
  }

  for (int sweep = 1; !converged && sweep <= opts.max_sweeps; ++sweep) {
    const MatrixXd previous = omega;
    for (Index j = 0; j < d; ++j) {
      for (Index i = 0, c = 0; i < d; ++i)
        if (i != j) rest[static_cast<std::size_t>(c++)] = i;
      const MatrixXd W11 = linalg::select(W, rest, rest);
      const VectorXd w12 = linalg::select(W, rest, IndexList{j}).col(0);
      const double w22 = W(j, j);
      const MatrixXd U = W11 - w12 * w12.transpose() / w22;  // (Omega_11)^{-1}
      const double c = S(j, j) + lambda;
      const MatrixXd A = c * U;
      const VectorXd b = linalg::select(S, rest, IndexList{j}).col(0);

      VectorXd x = linalg::select(omega, rest, IndexList{j}).col(0);
      VectorXd Ax = A * x;
      for (int it = 0; it < opts.max_inner; ++it) {
        double max_change = 0.0;
        for (Index i = 0; i < d - 1; ++i) {
          const double r = b(i) + Ax(i) - A(i, i) * x(i);
          const double xi = detail::soft_threshold(-r, lambda) / A(i, i);
          const double delta = xi - x(i);
          if (delta != 0.0) {
            Ax += A.col(i) * delta;
            x(i) = xi;
            max_change = std::max(max_change, std::abs(delta));
          }
        }
        if (max_change <= opts.inner_tolerance * (1.0 + x.cwiseAbs().maxCoeff())) break;
      }

      const VectorXd Ux = U * x;
      const double gamma = 1.0 / c;
      const double omega22 = gamma + x.dot(Ux);
      for (std::size_t i = 0; i < rest.size(); ++i) {
        omega(rest[i], j) = x(static_cast<Index>(i));
        omega(j, rest[i]) = x(static_cast<Index>(i));
      }
      omega(j, j) = omega22;

      const MatrixXd W11_new = U + c * Ux * Ux.transpose();
      const VectorXd w12_new = -c * Ux;
      for (std::size_t r = 0; r < rest.size(); ++r) {
        for (std::size_t s = 0; s < rest.size(); ++s)
          W(rest[r], rest[s]) = W11_new(static_cast<Index>(r), static_cast<Index>(s));
        W(rest[r], j) = w12_new(static_cast<Index>(r));
        W(j, rest[r]) = w12_new(static_cast<Index>(r));
      }
      W(j, j) = c;
    }

    Eigen::LLT<MatrixXd> llt(omega);
    if (llt.info() != Eigen::Success)
      throw NumericalError("graphical lasso: Omega lost positive definiteness in sweep " + std::to_string(sweep));
    W = llt.solve(MatrixXd::Identity(d, d));  // resync against drift
    linalg::symmetrize(W);
    res.objective_trace.push_back(detail::glasso_objective(omega, S, lambda));
    res.iterations = sweep;
    const double mean_change = (omega - previous).cwiseAbs().mean();
    if (mean_change < tol) converged = true;
  }
  if (!converged)
    throw GlassoConvergenceError("graphical lasso: no convergence after " + std::to_string(opts.max_sweeps) +
                                     " sweeps (lambda=" + std::to_string(lambda) + ")",
                                 res.objective_trace);

  linalg::symmetrize(omega);
  res.omega = omega;
  res.V_glasso = W;
  return res;
}

/// Number of nonzero strictly-upper-triangular entries.
inline Index count_edges(const MatrixXd& omega, double zero_tol = 1e-8) {
  Index k = 0;
  for (Index i = 0; i < omega.rows(); ++i)
    for (Index j = i + 1; j < omega.cols(); ++j)
      if (std::abs(omega(i, j)) > zero_tol) ++k;
  return k;
}

struct BicRow {
  double lambda = 0.0;
  double bic = 0.0;
  double fit = 0.0;  // log|Omega| - tr(Omega S)
  Index edges = 0;
  bool ok = false;
  std::string error;
};

struct BicSelection {
  double lambda_star = 0.0;
  std::vector<BicRow> table;  // in grid order as supplied
  GlassoResult best;
};

/// BIC(lambda) = -m (log|Omega| - tr(Omega S)) + log(m) (d + edges).
inline double glasso_bic(const MatrixXd& omega, const MatrixXd& S, Index m, Index* edges_out = nullptr) {
  Eigen::LLT<MatrixXd> llt(omega);
  double log_det = 0.0;
  for (Index i = 0; i < omega.rows(); ++i) log_det += 2.0 * std::log(llt.matrixLLT()(i, i));
  const double fit = log_det - omega.cwiseProduct(S).sum();
  const Index edges = count_edges(omega);
  if (edges_out) *edges_out = edges;
  const double md = static_cast<double>(m);
  return -md * fit + std::log(md) * static_cast<double>(omega.rows() + edges);
}

/// Sweeps the grid from the largest lambda down with warm starts and returns
/// the BIC minimiser; ties go to the larger lambda.
inline BicSelection select_lambda_bic(const MatrixXd& S, Index m, const std::vector<double>& grid,
                                      const GlassoOptions& opts = {}) {
  if (grid.empty()) throw InputError("select_lambda_bic: empty grid");
  if (m < 2) throw InputError("select_lambda_bic: need m >= 2");
  std::vector<std::size_t> order(grid.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return grid[a] > grid[b]; });

  BicSelection sel;
  sel.table.resize(grid.size());
  std::optional<MatrixXd> warm;
  std::optional<std::size_t> best;
  std::vector<GlassoResult> fits(grid.size());
  for (std::size_t idx : order) {
    BicRow& row = sel.table[idx];
    row.lambda = grid[idx];
    try {
      fits[idx] = graphical_lasso(S, grid[idx], opts, warm);
      warm = fits[idx].omega;
      row.bic = glasso_bic(fits[idx].omega, S, m, &row.edges);
      row.fit = (std::log(static_cast<double>(m)) * static_cast<double>(S.rows() + row.edges) - row.bic) /
                static_cast<double>(m);
      row.ok = true;
      // Larger lambdas come first, so only a strictly smaller BIC displaces.
      if (!best || row.bic < sel.table[*best].bic - 1e-12 * std::abs(sel.table[*best].bic)) best = idx;
    } catch (const Error& e) {
      row.ok = false;
      row.error = e.what();
    }
  }
  if (!best) throw NumericalError("select_lambda_bic: graphical lasso failed for every lambda on the grid");
  sel.lambda_star = grid[*best];
  sel.best = std::move(fits[*best]);
  return sel;
}

inline std::vector<double> log_spaced_grid(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi >= lo) || count < 1) throw InputError("lambda grid: need 0 < lo <= hi and count >= 1");
  std::vector<double> g(static_cast<std::size_t>(count));
  if (count == 1) return {lo};
  const double step = (std::log(hi) - std::log(lo)) / (count - 1);
  for (int i = 0; i < count; ++i) g[static_cast<std::size_t>(i)] = std::exp(std::log(lo) + step * i);
  g.back() = hi;
  return g;
}

/// `count` log-spaced values from `lo` to the largest off-diagonal |S|.
inline std::vector<double> default_lambda_grid(const MatrixXd& S, int count = 20, double lo = 1e-3) {
  double hi = 0.0;
  for (Index i = 0; i < S.rows(); ++i)
    for (Index j = 0; j < S.cols(); ++j)
      if (i != j) hi = std::max(hi, std::abs(S(i, j)));
  if (hi <= lo || count <= 1) return {std::max(lo, hi)};
  return log_spaced_grid(lo, hi, count);
}

/// Replaces a sample estimate with its graphical-lasso regularisation.
inline ErrorCovEstimate glasso_error_cov(const ErrorCovEstimate& sample, double lambda,
                                         const GlassoOptions& opts = {}) {
  ErrorCovEstimate out = sample;
  out.V = graphical_lasso(sample.V, lambda, opts).V_glasso;
  out.method = CovMethod::Glasso;
  out.lambda = lambda;
  return out;
}

}  // namespace sutse
