#include <gtest/gtest.h>

#include <cmath>

#include "sutse/estimation.hpp"

using namespace sutse;

namespace {

SutseSpec local_level(double sigma, double q) {
  SutseSpec s;
  SeriesBlock b;
  b.Z = b.T = MatrixXd::Ones(1, 1);
  b.Q = MatrixXd::Constant(1, 1, q);
  b.a1 = VectorXd::Zero(1);
  b.P1 = MatrixXd::Constant(1, 1, kDiffuseKappa);
  s.blocks = {b};
  s.sigma_eps = MatrixXd::Constant(1, 1, sigma);
  return s;
}

ParameterMap local_level_map() {
  ParameterMap m;
  m.add("sigma", Transform::Log, {{Slot::SigmaEps, 0, 0, 0, true}});
  m.add("q", Transform::Log, {{Slot::Q, 0, 0, 0, true}});
  return m;
}

}  // namespace

TEST(ParameterMap, TransformsRoundTrip) {
  const ParameterMap m = local_level_map();
  const VectorXd th = (VectorXd(2) << 0.5, 2.0).finished();
  EXPECT_LT((m.to_model(m.to_optimizer(th)) - th).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(m.to_optimizer((VectorXd(2) << -1.0, 1.0).finished()), InputError);
  EXPECT_THROW(m.to_model(VectorXd::Zero(3)), InputError);
  EXPECT_EQ(m.lower_bounds()(0), -kLogBound);
}

TEST(ParameterMap, ApplyAndExtract) {
  const SutseSpec tmpl = simulation_model(3);
  const ParameterMap m = equicorrelation_map(3);
  ASSERT_EQ(m.size(), 4);
  const VectorXd th = (VectorXd(4) << 1.5, 2.0, 2.5, 0.3).finished();
  const SutseSpec s = m.apply(tmpl, th);
  EXPECT_EQ(s.sigma_eps(1, 1), 2.0);
  EXPECT_EQ(s.sigma_eps(0, 2), 0.3);
  EXPECT_EQ(s.sigma_eps(2, 0), 0.3);
  EXPECT_EQ(m.extract(s), th);
}

TEST(ParameterMap, ValidateRejectsMissingTargets) {
  ParameterMap m;
  m.add("bad", Transform::Identity, {{Slot::T, 5, 0, 0, false}});
  EXPECT_THROW(m.validate(simulation_model(2)), InputError);
  ParameterMap n;
  n.add("bad", Transform::Identity, {{Slot::SigmaEps, 0, 0, 7, true}});
  EXPECT_THROW(n.validate(simulation_model(2)), InputError);
}

TEST(ParameterMap, ParameterCountsForThePanelShape) {
  SutseSpec tmpl;
  for (int j = 0; j < 32; ++j) tmpl.blocks.push_back(ar_local_level_block(VectorXd::Zero(5), 1, 1));
  tmpl.sigma_eps = MatrixXd::Identity(32, 32);
  EXPECT_EQ(ar_local_level_map(tmpl, false).size(), 8 * 32);
  EXPECT_EQ(ar_local_level_map(tmpl, true).size(), 752);
  const auto parts = partition_by_dimension(ar_local_level_map(tmpl, false), 32);
  for (const auto& p : parts) EXPECT_EQ(p.size(), 8);
  EXPECT_THROW(partition_by_dimension(ar_local_level_map(tmpl, true), 32), InputError);
}

TEST(Equicorrelation, Examples) {
  const MatrixXd s = equicorrelation_sigma_eps(VectorXd::Ones(2), 0.5);
  EXPECT_EQ(s, (MatrixXd(2, 2) << 1, 0.5, 0.5, 1).finished());
  const MatrixXd diag = equicorrelation_sigma_eps((VectorXd(3) << 1, 2, 3).finished(), 0.0);
  EXPECT_TRUE(diag.isDiagonal(0.0));
  EXPECT_THROW(equicorrelation_sigma_eps(VectorXd::Ones(4), -0.4), InputError);
}

TEST(FitFull, ConstantDataHitsBoundaryWithoutNan) {
  SutseSpec s = local_level(1.0, 0.0);
  s.blocks[0].P1 = MatrixXd::Zero(1, 1);
  ParameterMap m;
  m.add("sigma", Transform::Log, {{Slot::SigmaEps, 0, 0, 0, true}});
  const ObservationSeries y = ObservationSeries::from_values(MatrixXd::Zero(50, 1));
  const FitResult r = fit_full(s, m, y, VectorXd::Constant(1, 1.0));
  EXPECT_FALSE(std::isnan(r.theta_hat(0)));
  EXPECT_TRUE(r.at_boundary || !r.converged);
  EXPECT_LT(r.theta_hat(0), 1e-6);
}

TEST(FitFull, LocalLevelRecoversTruth) {
  // Asymptotic standard errors for (sigma, q) = (1, 1) at n = 2000 are about
  // 0.06 and 0.07; 3 s.e. bands are used.
  int within = 0;
  const ParameterMap pm = local_level_map();
  for (int seed = 0; seed < 20; ++seed) {
    const SutseSpec truth = local_level(1.0, 1.0);
    StateSpaceModel gen = compose(truth);
    gen.P1 = MatrixXd::Constant(1, 1, 1.0);
    const ObservationSeries y = simulate(gen, 2000, 100 + seed);
    const FitResult r = fit_full(truth, pm, y, (VectorXd(2) << 0.5, 0.5).finished());
    EXPECT_TRUE(r.converged) << r.message;
    within += std::abs(r.theta_hat(0) - 1.0) < 3 * 0.06 && std::abs(r.theta_hat(1) - 1.0) < 3 * 0.07;
  }
  EXPECT_GE(within, 18);
}

TEST(FitFull, ReturnedLoglikMatchesReevaluation) {
  const SutseSpec truth = simulation_model(2);
  const ObservationSeries y = simulate(compose(truth), 300, 5);
  const ParameterMap pm = equicorrelation_map(2);
  const FitResult r = fit_full(truth, pm, y, default_init(pm, y));
  EXPECT_EQ(r.loglik, profile_loglik(truth, pm, y, r.theta_hat));
  EXPECT_NEAR(r.theta_hat(2), 0.5, 0.2);
}

TEST(FitFull, Deterministic) {
  const SutseSpec truth = simulation_model(2);
  const ObservationSeries y = simulate(compose(truth), 200, 6);
  const ParameterMap pm = equicorrelation_map(2);
  const FitResult a = fit_full(truth, pm, y, default_init(pm, y));
  FitOptions threaded;
  threaded.optimizer.threads = 3;
  const FitResult b = fit_full(truth, pm, y, default_init(pm, y), threaded);
  EXPECT_EQ(a.theta_hat, b.theta_hat);
  EXPECT_EQ(a.loglik, b.loglik);
}

TEST(FitFull, InputErrors) {
  const SutseSpec truth = simulation_model(2);
  const ObservationSeries y = simulate(compose(truth), 20, 6);
  EXPECT_THROW(fit_full(truth, equicorrelation_map(2), y, VectorXd::Ones(2)), InputError);
  EXPECT_THROW(fit_full(truth, equicorrelation_map(3), simulate(compose(simulation_model(3)), 20, 1),
                        VectorXd::Ones(4)),
               InputError);
}

TEST(ProfileLoglik, InfeasibleIsMinusInfinity) {
  const SutseSpec truth = simulation_model(3);
  const ObservationSeries y = simulate(compose(truth), 20, 6);
  const VectorXd th = (VectorXd(4) << 1, 1, 1, -0.9).finished();  // not PD
  EXPECT_EQ(profile_loglik(truth, equicorrelation_map(3), y, th), -std::numeric_limits<double>::infinity());
}

TEST(FitPerDimension, SingleDimensionEqualsFullFit) {
  const SutseSpec s = local_level(1.0, 1.0);
  StateSpaceModel gen = compose(s);
  gen.P1 = MatrixXd::Ones(1, 1);
  const ObservationSeries y = simulate(gen, 300, 4);
  const ParameterMap pm = local_level_map();
  const VectorXd init = (VectorXd(2) << 0.5, 0.5).finished();
  const FitResult full = fit_full(s, pm, y, init);
  const auto per = fit_per_dimension(s, {pm}, y, {init});
  EXPECT_EQ(per[0].theta_hat, full.theta_hat);
  EXPECT_EQ(per[0].loglik, full.loglik);
}

TEST(FitPerDimension, EstimatesMarginalVariancesAndIsOrderFree) {
  const Index d = 3;
  const SutseSpec truth = simulation_model(d);
  const ParameterMap pm = diagonal_variance_map(d);
  const auto pmaps = partition_by_dimension(pm, d);
  VectorXd mean = VectorXd::Zero(d);
  const int seeds = 10;
  for (int seed = 0; seed < seeds; ++seed) {
    const ObservationSeries y = simulate(compose(truth), 1000, 200 + seed);
    const VectorXd init = default_init(pm, y);
    std::vector<VectorXd> inits;
    for (Index j = 0; j < d; ++j) inits.push_back(init.segment(j, 1));
    FitOptions par;
    par.threads = 3;
    const auto a = fit_per_dimension(truth, pmaps, y, inits);
    const auto b = fit_per_dimension(truth, pmaps, y, inits, par);
    for (Index j = 0; j < d; ++j) {
      EXPECT_EQ(a[static_cast<std::size_t>(j)].theta_hat, b[static_cast<std::size_t>(j)].theta_hat);
      mean(j) += a[static_cast<std::size_t>(j)].theta_hat(0) / seeds;
    }
  }
  for (Index j = 0; j < d; ++j) EXPECT_NEAR(mean(j), 1.0, 0.15);
}

TEST(FitPerDimension, FailuresAreIsolated) {
  const SutseSpec truth = simulation_model(2);
  MatrixXd v = simulate(compose(truth), 100, 3).values;
  const ObservationSeries y = ObservationSeries::from_values(v);
  auto pmaps = partition_by_dimension(diagonal_variance_map(2), 2);
  std::vector<VectorXd> inits{VectorXd::Ones(1), VectorXd::Ones(2)};  // wrong length for dimension 2
  const auto fits = fit_per_dimension(truth, pmaps, y, inits);
  EXPECT_TRUE(fits[0].converged);
  EXPECT_FALSE(fits[1].converged);
  EXPECT_NE(fits[1].message.find("dimension 2"), std::string::npos);
}

TEST(FitPerDimension, OverlappingMapsRejected) {
  const SutseSpec truth = simulation_model(2);
  const ObservationSeries y = simulate(compose(truth), 20, 3);
  auto pmaps = partition_by_dimension(diagonal_variance_map(2), 2);
  pmaps[1] = pmaps[0];
  EXPECT_THROW(fit_per_dimension(truth, pmaps, y, {VectorXd::Ones(1), VectorXd::Ones(1)}), InputError);
}

TEST(DefaultInit, SampleVariancesAndZeros) {
  MatrixXd v(4, 2);
  v << 1, 0, 2, 0, 3, 0, std::nan(""), 0;
  const ObservationSeries y = ObservationSeries::from_values(v);
  SutseSpec tmpl;
  tmpl.blocks = {ar_local_level_block(VectorXd::Zero(1), 1, 1), ar_local_level_block(VectorXd::Zero(1), 1, 1)};
  tmpl.sigma_eps = MatrixXd::Identity(2, 2);
  const ParameterMap pm = ar_local_level_map(tmpl, false);
  const VectorXd init = default_init(pm, y);
  EXPECT_EQ(init(0), 0.0);         // phi1_1
  EXPECT_DOUBLE_EQ(init(1), 1.0);  // q1_1: variance of (1, 2, 3)
  EXPECT_EQ(init(5), 1.0);         // q1_2: zero variance falls back to 1
}

TEST(Optimizer, QuadraticWithBounds) {
  const Objective f = [](const VectorXd& x) { return -(x(0) - 1) * (x(0) - 1) - 4 * (x(1) + 2) * (x(1) + 2); };
  const OptimResult r = maximize_lbfgs(f, VectorXd::Zero(2), VectorXd(), VectorXd());
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.x(0), 1.0, 1e-4);
  EXPECT_NEAR(r.x(1), -2.0, 1e-4);
  const OptimResult b = maximize_lbfgs(f, VectorXd::Zero(2), (VectorXd(2) << -5, -1).finished(),
                                       (VectorXd(2) << 0.5, 5).finished());
  EXPECT_NEAR(b.x(0), 0.5, 1e-8);
  EXPECT_NEAR(b.x(1), -1.0, 1e-8);
  EXPECT_TRUE(b.at_boundary);
}

TEST(Optimizer, Rosenbrock) {
  const Objective f = [](const VectorXd& x) {
    return -(100 * std::pow(x(1) - x(0) * x(0), 2) + std::pow(1 - x(0), 2));
  };
  const OptimResult r = maximize_lbfgs(f, (VectorXd(2) << -1.2, 1).finished(), VectorXd(), VectorXd());
  EXPECT_NEAR(r.x(0), 1.0, 1e-3);
  EXPECT_NEAR(r.x(1), 1.0, 2e-3);
}

TEST(Optimizer, InfeasibleStartReported) {
  const Objective f = [](const VectorXd&) { return -std::numeric_limits<double>::infinity(); };
  const OptimResult r = maximize_lbfgs(f, VectorXd::Zero(1), VectorXd(), VectorXd());
  EXPECT_FALSE(r.converged);
  EXPECT_THROW(maximize_lbfgs(f, VectorXd::Zero(1), VectorXd::Ones(1), VectorXd::Zero(1)), InputError);
}
