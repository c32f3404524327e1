#include <gtest/gtest.h>

#include <random>

#include "oracle.hpp"
#include "sutse/sparse_cov.hpp"

using namespace sutse;

namespace {

double max_offdiag(const MatrixXd& S) {
  double m = 0.0;
  for (Index i = 0; i < S.rows(); ++i)
    for (Index j = 0; j < S.cols(); ++j)
      if (i != j) m = std::max(m, std::abs(S(i, j)));
  return m;
}

/// Sparse chain precision matrix, d x d.
MatrixXd chain_precision(Index d) {
  MatrixXd O = MatrixXd::Identity(d, d);
  for (Index i = 0; i + 1 < d; ++i) O(i, i + 1) = O(i + 1, i) = 0.4;
  return O;
}

}  // namespace

TEST(Glasso, ZeroPenaltyInvertsS) {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 5; ++rep) {
    const MatrixXd S = oracle::random_spd(6, rng);
    const GlassoResult r = graphical_lasso(S, 0.0);
    EXPECT_LT((r.omega - S.inverse()).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Glasso, LargePenaltyGivesDiagonalSolution) {
  std::mt19937_64 rng(2);
  const MatrixXd S = oracle::random_spd(5, rng);
  const double lambda = 1.01 * max_offdiag(S);
  const GlassoResult r = graphical_lasso(S, lambda);
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 5; ++j)
      EXPECT_NEAR(r.omega(i, j), i == j ? 1.0 / (S(i, i) + lambda) : 0.0, 1e-6);
  EXPECT_LT((r.V_glasso.diagonal() - (S.diagonal().array() + lambda).matrix()).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Glasso, ScalarClosedForm) {
  const MatrixXd S = MatrixXd::Constant(1, 1, 2.5);
  for (double lambda : {0.0, 0.1, 3.0}) EXPECT_DOUBLE_EQ(graphical_lasso(S, lambda).omega(0, 0), 1.0 / (2.5 + lambda));
}

TEST(Glasso, SatisfiesOptimalityConditions) {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const MatrixXd S = oracle::sample_cov(oracle::random_spd(6, rng), 30, rng);
    const double lambda = 0.05 + 0.02 * rep;
    const GlassoResult r = graphical_lasso(S, lambda);
    EXPECT_LT(oracle::glasso_kkt_violation(r.omega, S, lambda), 1e-4) << "lambda=" << lambda;
    EXPECT_LT((r.V_glasso * r.omega - MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_NEAR(r.objective_trace.back(), oracle::glasso_objective(r.omega, S, lambda), 1e-9);
  }
}

TEST(Glasso, ObjectiveNonincreasingAndPd) {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 30; ++rep) {
    const Index d = 2 + rep % 7;
    const MatrixXd S = oracle::sample_cov(oracle::random_spd(d, rng), 3 + rep % 10, rng);  // often singular
    std::vector<double> trace;
    try {
      const GlassoResult r = graphical_lasso(S, 0.02 + 0.01 * (rep % 5));
      trace = r.objective_trace;
      EXPECT_TRUE(linalg::is_pd(r.omega));
      EXPECT_TRUE(linalg::is_symmetric(r.omega, 1e-10));
    } catch (const GlassoConvergenceError& e) {
      trace = e.objective_trace();  // slow near-singular cases still descend
    }
    for (std::size_t k = 1; k < trace.size(); ++k)
      EXPECT_LE(trace[k], trace[k - 1] + 1e-10 * std::abs(trace[k - 1]));
  }
}

TEST(Glasso, InputErrors) {
  EXPECT_THROW(graphical_lasso(MatrixXd::Ones(2, 2), 0.0), InputError);
  EXPECT_THROW(graphical_lasso(MatrixXd::Identity(2, 2), -1.0), InputError);
  EXPECT_THROW(graphical_lasso((MatrixXd(2, 2) << 1, 0.2, 0.3, 1).finished(), 0.1), InputError);
  EXPECT_THROW(graphical_lasso(MatrixXd(0, 0), 0.1), InputError);
}

TEST(Glasso, NonConvergenceCarriesTrace) {
  std::mt19937_64 rng(5);
  const MatrixXd S = oracle::random_spd(6, rng);
  GlassoOptions o;
  o.max_sweeps = 1;
  o.tolerance = 1e-300;
  try {
    graphical_lasso(S, 0.01, o);
    FAIL() << "expected non-convergence";
  } catch (const GlassoConvergenceError& e) {
    EXPECT_EQ(e.objective_trace().size(), 2u);
  }
}

TEST(Glasso, WarmStartReachesSameSolution) {
  std::mt19937_64 rng(6);
  const MatrixXd S = oracle::sample_cov(oracle::random_spd(5, rng), 40, rng);
  const GlassoResult cold = graphical_lasso(S, 0.05);
  const GlassoResult warm = graphical_lasso(S, 0.05, {}, graphical_lasso(S, 0.2).omega);
  EXPECT_LT((cold.omega - warm.omega).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Glasso, EdgeCountNonincreasingInLambda) {
  std::mt19937_64 rng(7);
  const MatrixXd S = oracle::sample_cov(chain_precision(10).inverse(), 200, rng);
  Index prev = std::numeric_limits<Index>::max();
  for (double lambda : log_spaced_grid(1e-3, max_offdiag(S), 15)) {
    const Index e = count_edges(graphical_lasso(S, lambda).omega);
    EXPECT_LE(e, prev);
    prev = e;
  }
  EXPECT_EQ(prev, 0);
}

TEST(Bic, SingleElementGrid) {
  const MatrixXd S = (MatrixXd(2, 2) << 1, 0.3, 0.3, 1).finished();
  const BicSelection sel = select_lambda_bic(S, 50, {0.07});
  EXPECT_EQ(sel.lambda_star, 0.07);
  EXPECT_EQ(sel.table.size(), 1u);
}

TEST(Bic, FormulaMatchesDirectEvaluation) {
  std::mt19937_64 rng(8);
  const MatrixXd S = oracle::sample_cov(chain_precision(6).inverse(), 100, rng);
  const std::vector<double> grid{0.3, 0.01, 0.1};
  const BicSelection sel = select_lambda_bic(S, 100, grid);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const BicRow& r = sel.table[k];
    EXPECT_EQ(r.lambda, grid[k]);
    const MatrixXd O = graphical_lasso(S, grid[k]).omega;
    Index edges = 0;
    for (Index i = 0; i < 6; ++i)
      for (Index j = i + 1; j < 6; ++j) edges += std::abs(O(i, j)) > 1e-8;
    const double bic = -100.0 * (std::log(O.determinant()) - (O * S).trace()) + std::log(100.0) * (6 + edges);
    EXPECT_NEAR(r.bic, bic, 1e-5 * std::abs(bic));
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : sel.table) best = std::min(best, r.bic);
  for (const auto& r : sel.table)
    if (r.lambda == sel.lambda_star) EXPECT_EQ(r.bic, best);
}

TEST(Bic, DiagonalSPicksSmallestPenalty) {
  // With the diagonal penalised and no off-diagonal structure, every grid
  // value gives zero edges and the fit term alone decides: it is best at the
  // smallest lambda because Omega(i,i) = 1/(S(i,i)+lambda) moves away from
  // the unpenalised optimum as lambda grows.
  const MatrixXd S = (VectorXd(4) << 1, 2, 0.5, 3).finished().asDiagonal();
  const std::vector<double> grid = log_spaced_grid(1e-3, 1.0, 10);
  const BicSelection sel = select_lambda_bic(S, 100, grid);
  EXPECT_EQ(sel.lambda_star, grid.front());
  for (const auto& r : sel.table) EXPECT_EQ(r.edges, 0);
  for (std::size_t k = 1; k < sel.table.size(); ++k) EXPECT_GT(sel.table[k].bic, sel.table[k - 1].bic);
}

TEST(Bic, TiesGoToLargerLambda) {
  const MatrixXd S = MatrixXd::Identity(3, 3);
  // Both penalties give the same BIC up to rounding only if they coincide;
  // duplicate grid values are a clean tie.
  const BicSelection sel = select_lambda_bic(S, 10, {0.5, 0.5});
  EXPECT_EQ(sel.lambda_star, 0.5);
  EXPECT_THROW(select_lambda_bic(S, 1, {0.5}), InputError);
  EXPECT_THROW(select_lambda_bic(S, 10, {}), InputError);
}

TEST(Bic, SparseDataSelectsSparseSupport) {
  std::mt19937_64 rng(9);
  const MatrixXd S = oracle::sample_cov(chain_precision(10).inverse(), 200, rng);
  const BicSelection sel = select_lambda_bic(S, 200, default_lambda_grid(S));
  const Index edges = count_edges(sel.best.omega);
  EXPECT_GE(edges, 9);   // the chain
  EXPECT_LT(edges, 45);  // not the complete graph
}

TEST(LambdaGrid, DefaultSpansOffDiagonal) {
  const MatrixXd S = (MatrixXd(3, 3) << 1, 0.4, -0.6, 0.4, 1, 0.1, -0.6, 0.1, 1).finished();
  const auto g = default_lambda_grid(S);
  EXPECT_EQ(g.size(), 20u);
  EXPECT_NEAR(g.front(), 1e-3, 1e-15);
  EXPECT_DOUBLE_EQ(g.back(), 0.6);
  for (std::size_t k = 1; k < g.size(); ++k) EXPECT_GT(g[k], g[k - 1]);
  EXPECT_THROW(log_spaced_grid(0.0, 1.0, 3), InputError);
}

TEST(GlassoErrorCov, ReplacesEstimate) {
  ErrorCovEstimate e;
  e.V = (MatrixXd(2, 2) << 1, 0.5, 0.5, 1).finished();
  e.m = 40;
  const ErrorCovEstimate g = glasso_error_cov(e, 0.1);
  EXPECT_EQ(g.method, CovMethod::Glasso);
  EXPECT_EQ(g.m, 40);
  EXPECT_TRUE(linalg::is_pd(g.V));
  EXPECT_NEAR(g.V(0, 0), 1.1, 1e-6);
}
