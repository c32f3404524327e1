// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any FAIL.
//
//   acceptance [--only N] [--out DIR]

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include "oracle.hpp"
#include "sutse/sutse.hpp"

using namespace sutse;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << x;
  return s.str();
}

std::string out_dir = "acceptance_out";

// ---------------------------------------------------------------- 1

Outcome coincidence() {
  const Index d = 4, n = 500;
  std::mt19937_64 rng(1);
  SutseSpec s = diagonalized(simulation_model(d));
  for (Index j = 0; j < d; ++j) {
    s.blocks[static_cast<std::size_t>(j)].P1 = oracle::random_spd(8, rng);
    s.sigma_eps(j, j) = 0.5 + 0.25 * static_cast<double>(j);
  }
  const StateSpaceModel m = compose(s);
  const ObservationSeries y = simulate(compose(simulation_model(d)), n, 2);
  const FilterOutput full = kalman_filter(m, y);
  const FastFilterOutput fast = run_univariate_filters(s, y);

  double dv = 0, dF = 0, da = 0;
  for (Index t = 0; t < n; ++t) {
    const auto tt = static_cast<std::size_t>(t);
    for (Index j = 0; j < d; ++j) {
      dv = std::max(dv, std::abs(full.v(t, j) - fast.v_prime(t, j)));
      dF = std::max(dF, std::abs(full.F[tt](j, j) - fast.F_prime(t, j)));
      for (Index k = 0; k < d; ++k)
        if (k != j) dF = std::max(dF, std::abs(full.F[tt](j, k)));
    }
    da = std::max(da, (full.a[tt + 1] - fast.stacked_state(t + 2)).cwiseAbs().maxCoeff());
  }
  const double worst = std::max({dv, dF, da});
  return {worst <= 1e-10, "max|dv|=" + fmt(dv) + " max|dF|=" + fmt(dF) + " max|da|=" + fmt(da)};
}

// ---------------------------------------------------------------- 2

Outcome scalar_riccati() {
  StateSpaceModel m;
  m.Z = m.T = m.sigma_eps = m.sigma_eta = m.P1 = MatrixXd::Ones(1, 1);
  m.a1 = VectorXd::Zero(1);
  const double P = limiting_filter(m).P(0, 0);
  const double golden = (1 + std::sqrt(5.0)) / 2;
  return {std::abs(P - golden) <= 1e-9, "P=" + fmt(P, 17) + " |P-phi|=" + fmt(std::abs(P - golden))};
}

// ---------------------------------------------------------------- 3

Outcome theorem_oracle() {
  const Index d = 4, t_eval = 200;
  const SutseSpec s = simulation_model(d);
  const SutseSpec diag = diagonalized(s);
  const MomentTrace mt = exact_error_moments(s, diag, 500);
  const double ev200 = mt.Ev[static_cast<std::size_t>(t_eval - 1)].norm();
  const double tail = mt.tail_change();
  bool ok = ev200 < 1e-6 && tail < 1e-8;

  const int R = 10000;
  const StateSpaceModel truth = compose(s);
  MatrixXd draws(R, d);
  FastFilterOptions o;
  o.store_states = false;
  for (int r = 0; r < R; ++r) {
    const ObservationSeries y = simulate(truth, t_eval, derive_seed(3, static_cast<std::uint64_t>(r)));
    draws.row(r) = run_univariate_filters(diag, y, o).v_prime.row(t_eval - 1);
  }
  const VectorXd mean = draws.colwise().mean().transpose();
  const MatrixXd c = draws.rowwise() - mean.transpose();
  const MatrixXd cov = c.transpose() * c / (R - 1);
  const VectorXd Ev = mt.Ev[static_cast<std::size_t>(t_eval - 1)];
  const MatrixXd& V = mt.V(t_eval);

  double worst_z = 0.0;
  for (Index i = 0; i < d; ++i) worst_z = std::max(worst_z, std::abs(mean(i) - Ev(i)) / std::sqrt(cov(i, i) / R));
  for (Index i = 0; i < d; ++i)
    for (Index j = i; j < d; ++j) {
      const VectorXd prod = c.col(i).cwiseProduct(c.col(j));
      const double se = std::sqrt((prod.array() - prod.mean()).square().sum() / (R - 1) / R);
      worst_z = std::max(worst_z, std::abs(cov(i, j) - V(i, j)) / se);
    }
  ok = ok && worst_z < 3.0;
  return {ok, "|E v'_200|=" + fmt(ev200) + " tail dV=" + fmt(tail) + " worst MC z=" + fmt(worst_z, 3) +
                  " over 4 means + 10 covariances (R=10000)"};
}

// ---------------------------------------------------------------- 4

Outcome consistency() {
  const Index d = 4, n0 = 5;
  const int reps = 200;
  const std::vector<Index> ns{500, 1000, 2000, 4000};
  const SutseSpec s = simulation_model(d);
  const SutseSpec diag = diagonalized(s);
  const StateSpaceModel truth = compose(s);
  const MatrixXd V = exact_error_moments(s, diag, 500).tail();
  FastFilterOptions o;
  o.store_states = false;

  std::vector<double> log_n, log_mse;
  std::vector<MatrixXd> variances;
  for (Index n : ns) {
    std::vector<MatrixXd> est;
    double mse = 0.0;
    for (int r = 0; r < reps; ++r) {
      const ObservationSeries y = simulate(truth, n, derive_seed(4, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(r)));
      est.push_back(sample_error_cov(run_univariate_filters(diag, y, o), n0).V);
      mse += (est.back() - V).squaredNorm() / static_cast<double>(d * d) / reps;
    }
    MatrixXd mean = MatrixXd::Zero(d, d), var = MatrixXd::Zero(d, d);
    for (const auto& e : est) mean += e / reps;
    for (const auto& e : est) var += (e - mean).cwiseAbs2() / (reps - 1);
    variances.push_back(var);
    log_n.push_back(std::log(static_cast<double>(n)));
    log_mse.push_back(std::log(mse));
  }
  double ratio = 0.0;  // averaged over the 10 distinct elements
  for (Index i = 0; i < d; ++i)
    for (Index j = i; j < d; ++j) ratio += variances[0](i, j) / variances[2](i, j) / 10.0;
  const double xbar = std::accumulate(log_n.begin(), log_n.end(), 0.0) / 4;
  const double ybar = std::accumulate(log_mse.begin(), log_mse.end(), 0.0) / 4;
  double sxy = 0, sxx = 0;
  for (std::size_t k = 0; k < 4; ++k) {
    sxy += (log_n[k] - xbar) * (log_mse[k] - ybar);
    sxx += (log_n[k] - xbar) * (log_n[k] - xbar);
  }
  const double slope = sxy / sxx;
  const bool ok = ratio >= 2.5 && ratio <= 6.0 && slope >= -1.4 && slope <= -0.6;
  return {ok, "var ratio n=500/n=2000=" + fmt(ratio, 3) + " log-log MSE slope=" + fmt(slope, 3)};
}

// ---------------------------------------------------------------- 5

Outcome benchmark_trend() {
  BenchConfig cfg;  // d in {4, 8, 12}, 20 replications, exact and fast-sample
  cfg.seed = 5;
  const BenchReport rep = run_simulation_benchmark(cfg);
  emit_report(rep, out_dir, "bench");
  bool ok = true;
  std::ostringstream msg;
  double prev_ratio = 0.0;
  for (Index d : cfg.d_list) {
    const auto ex = rep.find(Method::Exact, d);
    const auto fa = rep.find(Method::FastSample, d);
    if (!ex || !fa || ex->n_ok == 0 || fa->n_ok == 0) {
      ok = false;
      msg << "d=" << d << " no successful replications; ";
      continue;
    }
    const double rel = std::abs(fa->same_mse - ex->same_mse) / ex->same_mse;
    const double ratio = ex->fit_seconds / fa->fit_seconds;
    const bool a = rel <= 0.15;
    const bool b = ex->same_mse < ex->one_mse && fa->same_mse < fa->one_mse;
    const bool c = ratio >= prev_ratio && (d != cfg.d_list.back() || ratio >= 5.0);
    ok = ok && a && b && c;
    msg << "d=" << d << " rel=" << fmt(rel, 3) << " same/one exact=" << fmt(ex->same_mse, 4) << "/"
        << fmt(ex->one_mse, 4) << " fast=" << fmt(fa->same_mse, 4) << "/" << fmt(fa->one_mse, 4)
        << " time ratio=" << fmt(ratio, 3) << " failed=" << ex->n_failed + fa->n_failed << "; ";
    prev_ratio = ratio;
  }
  return {ok, msg.str()};
}

// ---------------------------------------------------------------- 6

Outcome glasso() {
  std::mt19937_64 rng(6);
  double inv_err = 0.0;
  for (int k = 0; k < 20; ++k) {
    const MatrixXd S = oracle::random_spd(2 + k % 9, rng);
    inv_err = std::max(inv_err, (graphical_lasso(S, 0.0).omega - S.inverse()).cwiseAbs().maxCoeff());
  }
  int monotone = 0, nonconverged = 0;
  for (int k = 0; k < 100; ++k) {
    const Index d = 2 + k % 9;
    const MatrixXd S = oracle::sample_cov(oracle::random_spd(d, rng), 2 + k % 15, rng);
    std::vector<double> trace;
    try {
      trace = graphical_lasso(S, 0.01 + 0.02 * (k % 6)).objective_trace;
    } catch (const GlassoConvergenceError& e) {
      trace = e.objective_trace();
      ++nonconverged;
    }
    bool mono = true;
    for (std::size_t i = 1; i < trace.size(); ++i)
      mono = mono && trace[i] <= trace[i - 1] + 1e-12 * std::abs(trace[i - 1]);
    monotone += mono;
  }
  double diag_err = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Index d = 2 + k % 9;
    const MatrixXd S = oracle::sample_cov(oracle::random_spd(d, rng), 50, rng);
    double off = 0.0;
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j)
        if (i != j) off = std::max(off, std::abs(S(i, j)));
    const double lambda = 1.01 * off;
    const MatrixXd om = graphical_lasso(S, lambda).omega;
    MatrixXd expect = MatrixXd::Zero(d, d);
    for (Index i = 0; i < d; ++i) expect(i, i) = 1.0 / (S(i, i) + lambda);
    diag_err = std::max(diag_err, (om - expect).cwiseAbs().maxCoeff());
  }
  const bool ok = inv_err <= 1e-6 && monotone == 100 && diag_err <= 1e-6;
  return {ok, "max|Omega-S^-1|=" + fmt(inv_err) + " monotone traces=" + std::to_string(monotone) + "/100 (" +
                  std::to_string(nonconverged) + " hit the sweep cap) max diag-solution error=" + fmt(diag_err)};
}

// ---------------------------------------------------------------- 7

Outcome spectral() {
  const SutseSpec s = simulation_model(4);
  const StateSpaceModel mis = compose(diagonalized(s));
  const LimitingFilter lf = limiting_filter(mis);
  const MatrixXd TL = mis.T * lf.L;
  const double rho = linalg::spectral_radius(TL);
  const GeometricEnvelope env = geometric_norm_check(TL, 500);
  return {rho < 1.0 && env.valid,
          "rho(TL')=" + fmt(rho) + " envelope M=" + fmt(env.M) + " r=" + fmt(env.r) + (env.valid ? " holds" : " violated") +
              " for n<=500"};
}

// ---------------------------------------------------------------- 8

Outcome properties() {
  const std::string cmd = std::string(SUTSE_PROPERTY_SUITE) + " --gtest_brief=1 > " + out_dir + "/properties.log 2>&1";
  const int status = std::system(cmd.c_str());
  const bool ok = WIFEXITED(status) && WEXITSTATUS(status) == 0;
  return {ok, std::string("property suite (8 properties x 100 randomized cases) ") + (ok ? "passed" : "failed") +
                  "; log in " + out_dir + "/properties.log"};
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i + 1 < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only") only = std::atoi(argv[++i]);
    else if (a == "--out") out_dir = argv[++i];
  }
  std::filesystem::create_directories(out_dir);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"coincidence of fast and full filters", coincidence},
      {"scalar Riccati golden ratio", scalar_riccati},
      {"exact error moments vs Monte Carlo", theorem_oracle},
      {"consistency of the error covariance estimate", consistency},
      {"benchmark trend exact vs fast", benchmark_trend},
      {"graphical lasso", glasso},
      {"spectral certification", spectral},
      {"property suites", properties},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    if (only && static_cast<int>(k + 1) != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome r;
    try {
      r = criteria[k].second();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !r.pass;
    std::cout << "C" << k + 1 << " " << (r.pass ? "PASS" : "FAIL") << " " << criteria[k].first << ": " << r.detail
              << " [" << fmt(secs, 3) << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
