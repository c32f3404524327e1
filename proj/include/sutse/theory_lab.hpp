#pragma once

// Limiting Riccati analysis and the exact first and second moments of the
// forecast errors of a filter run under misspecified (diagonal) parameters.
//
// With L'_t = I - K'_t Z from the misspecified filter and K_t, F_t from the
// true one,
//   E(a_{t+1} - a'_{t+1}) = T L'_t E(a_t - a'_t)
//   M_{t+1} = T (K_t - K'_t) F_t (K_t - K'_t)^T T^T + T L'_t M_t L'_t^T T^T
//   E(v'_t) = Z E(a_t - a'_t),   V(v'_t) = F_t + Z M_t Z^T - E(v'_t) E(v'_t)^T
// where M_t = E((a_t - a'_t)(a_t - a'_t)^T).

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "sutse/error.hpp"
#include "sutse/linalg.hpp"
#include "sutse/state_space.hpp"
#include "sutse/sutse_builder.hpp"

namespace sutse {

/// Quantities of one Riccati step from prediction covariance P.
struct RiccatiStep {
  MatrixXd F, K, L, P_next;
};

inline RiccatiStep riccati_step(const MatrixXd& Z, const MatrixXd& T, const MatrixXd& sigma_eps,
                                const MatrixXd& sigma_eta, const MatrixXd& P, Index t = 0) {
  RiccatiStep r;
  r.F = Z * P * Z.transpose() + sigma_eps;
  linalg::symmetrize(r.F);
  Eigen::LLT<MatrixXd> llt(r.F);
  if (llt.info() != Eigen::Success || !r.F.allFinite()) throw DivergenceError(t);
  const MatrixXd ZP = Z * P;
  r.K = llt.solve(ZP).transpose();
  r.L = MatrixXd::Identity(P.rows(), P.rows()) - r.K * Z;
  r.P_next = T * (P - ZP.transpose() * r.K.transpose()) * T.transpose() + sigma_eta;
  linalg::symmetrize(r.P_next);
  return r;
}

inline RiccatiStep riccati_step(const StateSpaceModel& m, const MatrixXd& P, Index t = 0) {
  return riccati_step(m.Z, m.T, m.sigma_eps, m.sigma_eta, P, t);
}

struct LimitingFilter {
  MatrixXd P, F, K, L;
  Index iterations = 0;
  double residual = 0.0;              // final ||P_{t+1} - P_t||_F
  std::vector<double> residual_trace; // one per iteration
};

/// Iterates the Riccati recursion from P1 until ||P_{t+1} - P_t||_F < tol.
inline LimitingFilter limiting_filter(const StateSpaceModel& model, double tol = 1e-10, Index max_iter = 100000) {
  model.validate();
  LimitingFilter lf;
  MatrixXd P = model.P1;
  for (Index it = 1; it <= max_iter; ++it) {
    const RiccatiStep r = riccati_step(model, P, it);
    const double res = (r.P_next - P).norm();
    lf.residual_trace.push_back(res);
    P = r.P_next;
    if (res < tol) {
      lf.iterations = it;
      lf.residual = res;
      const RiccatiStep fin = riccati_step(model, P, it + 1);
      lf.P = P;
      lf.F = fin.F;
      lf.K = fin.K;
      lf.L = fin.L;
      return lf;
    }
  }
  throw NumericalError("limiting_filter: Riccati recursion did not converge in " + std::to_string(max_iter) +
                       " iterations (residual " + std::to_string(lf.residual_trace.back()) + ")");
}

/// Slope of log(residual) against iteration over the second half of the
/// trace where the residual is positive. Negative means geometric decay.
inline double log_residual_slope(const std::vector<double>& trace) {
  std::vector<double> xs, ys;
  for (std::size_t i = trace.size() / 2; i < trace.size(); ++i)
    if (trace[i] > 0.0) {
      xs.push_back(static_cast<double>(i));
      ys.push_back(std::log(trace[i]));
    }
  if (xs.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i] / n, my += ys[i] / n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

/// [Z; ZT; ...; ZT^{p-1}]
inline MatrixXd observability_matrix(const MatrixXd& Z, const MatrixXd& T) {
  const Index p = T.rows(), d = Z.rows();
  MatrixXd O(d * p, p);
  MatrixXd blk = Z;
  for (Index k = 0; k < p; ++k) {
    O.block(k * d, 0, d, p) = blk;
    blk = blk * T;
  }
  return O;
}

/// [R, TR, ..., T^{p-1} R]
inline MatrixXd controllability_matrix(const MatrixXd& T, const MatrixXd& R) {
  const Index p = T.rows(), r = R.cols();
  MatrixXd C(p, r * p);
  MatrixXd blk = R;
  for (Index k = 0; k < p; ++k) {
    C.block(0, k * r, p, r) = blk;
    blk = T * blk;
  }
  return C;
}

/// Numerical evidence for the convergence assumptions. Item (4) is a uniform
/// bound over all windows; only a finite set of windows is examined here.
struct AssumptionReport {
  Index p = 0;
  bool sigma_pd = false;
  bool sigma_pd_prime = false;
  Index observability_rank = 0;
  Index controllability_rank = 0;
  Index controllability_rank_prime = 0;
  double spectral_radius_TLprime = std::numeric_limits<double>::quiet_NaN();
  double product_norm_bound = std::numeric_limits<double>::quiet_NaN();
  Index windows_examined = 0;
  std::string note;

  bool observable() const { return observability_rank == p; }
  bool controllable() const { return controllability_rank == p && controllability_rank_prime == p; }
  bool passes() const {
    return sigma_pd && sigma_pd_prime && observable() && controllable() && spectral_radius_TLprime < 1.0;
  }
};

struct AssumptionOptions {
  Index horizon = 200;  // time steps of the misspecified filter used for products
  Index stride = 10;    // window start spacing
};

inline AssumptionReport check_assumptions(const StateSpaceModel& truth, const StateSpaceModel& misspec,
                                          const AssumptionOptions& opts = {}) {
  truth.validate();
  misspec.validate();
  AssumptionReport rep;
  rep.p = truth.p();
  rep.sigma_pd = linalg::is_pd(truth.sigma_eps);
  rep.sigma_pd_prime = linalg::is_pd(misspec.sigma_eps);
  rep.observability_rank = linalg::numerical_rank(observability_matrix(truth.Z, truth.T));
  rep.controllability_rank =
      linalg::numerical_rank(controllability_matrix(truth.T, linalg::noise_loading(truth.sigma_eta)));
  rep.controllability_rank_prime =
      linalg::numerical_rank(controllability_matrix(misspec.T, linalg::noise_loading(misspec.sigma_eta)));

  try {
    const LimitingFilter lf = limiting_filter(misspec);
    rep.spectral_radius_TLprime = linalg::spectral_radius(misspec.T * lf.L);
  } catch (const Error& e) {
    rep.note = std::string("limiting filter unavailable: ") + e.what() + "; ";
  }

  // Windowed products of T L'_t along the misspecified filter's trajectory.
  try {
    std::vector<MatrixXd> TL;
    MatrixXd P = misspec.P1;
    for (Index t = 1; t <= opts.horizon; ++t) {
      const RiccatiStep r = riccati_step(misspec, P, t);
      TL.push_back(misspec.T * r.L);
      P = r.P_next;
    }
    double sup = 0.0;
    for (Index start = 0; start < opts.horizon; start += std::max<Index>(opts.stride, 1)) {
      MatrixXd prod = MatrixXd::Identity(rep.p, rep.p);
      for (Index t = start; t < opts.horizon; ++t) {
        prod = TL[static_cast<std::size_t>(t)] * prod;
        sup = std::max(sup, prod.norm());
        ++rep.windows_examined;
      }
    }
    rep.product_norm_bound = sup;
  } catch (const Error& e) {
    rep.note += std::string("window products unavailable: ") + e.what() + "; ";
  }
  rep.note += "item (4) examined on " + std::to_string(rep.windows_examined) +
              " finite windows only; this is evidence, not verification";
  return rep;
}

struct MomentTrace {
  std::vector<VectorXd> Ev;  // E(v'_t), t = 1..t_max
  std::vector<MatrixXd> Vv;  // V(v'_t)
  std::vector<VectorXd> Ea;  // E(a_t - a'_t)
  std::vector<MatrixXd> Ma;  // E((a_t - a'_t)(a_t - a'_t)^T)
  std::vector<MatrixXd> F;   // true-model F_t

  Index t_max() const { return static_cast<Index>(Ev.size()); }
  /// V(v'_t) at 1-based t.
  const MatrixXd& V(Index t) const { return Vv.at(static_cast<std::size_t>(t - 1)); }
  const MatrixXd& tail() const { return Vv.back(); }
  double tail_change() const {
    return Vv.size() < 2 ? std::numeric_limits<double>::quiet_NaN() : (Vv.back() - Vv[Vv.size() - 2]).norm();
  }
};

/// Exact moments of the forecast errors of the filter run with `misspec`
/// when data come from `truth`. Both models must share Z and T.
inline MomentTrace exact_error_moments(const StateSpaceModel& truth, const StateSpaceModel& misspec, Index t_max) {
  truth.validate();
  misspec.validate();
  if (t_max < 1) throw InputError("exact_error_moments: t_max must be >= 1");
  if (truth.Z.rows() != misspec.Z.rows() || truth.Z.cols() != misspec.Z.cols() || truth.Z != misspec.Z ||
      truth.T != misspec.T)
    throw InputError("exact_error_moments: true and misspecified models must share Z and T");

  const MatrixXd& Z = truth.Z;
  const MatrixXd& T = truth.T;
  MomentTrace mt;
  MatrixXd P = truth.P1, Pp = misspec.P1;
  VectorXd Ea = truth.a1 - misspec.a1;
  MatrixXd Ma = Ea * Ea.transpose();
  for (Index t = 1; t <= t_max; ++t) {
    const RiccatiStep tr = riccati_step(truth, P, t);
    const RiccatiStep mr = riccati_step(misspec, Pp, t);
    const VectorXd Ev = Z * Ea;
    MatrixXd Vv = tr.F + Z * Ma * Z.transpose() - Ev * Ev.transpose();
    linalg::symmetrize(Vv);
    mt.Ev.push_back(Ev);
    mt.Vv.push_back(std::move(Vv));
    mt.Ea.push_back(Ea);
    mt.Ma.push_back(Ma);
    mt.F.push_back(tr.F);

    const MatrixXd TL = T * mr.L;
    const MatrixXd TD = T * (tr.K - mr.K);
    Ea = TL * Ea;
    Ma = TD * tr.F * TD.transpose() + TL * Ma * TL.transpose();
    linalg::symmetrize(Ma);
    P = tr.P_next;
    Pp = mr.P_next;
  }
  return mt;
}

inline MomentTrace exact_error_moments(const SutseSpec& truth, const SutseSpec& misspec, Index t_max) {
  return exact_error_moments(compose(truth), compose(misspec), t_max);
}

/// ||A^n||_F <= M r^n for n = 1..n_max with r = rho + (1 - rho) * margin and
/// the smallest M that covers every computed power.
struct GeometricEnvelope {
  double rho = 0.0;
  double r = 0.0;
  double M = 0.0;
  std::vector<double> norms;  // ||A^n||_F, n = 1..n_max
  bool valid = false;
};

inline GeometricEnvelope geometric_norm_check(const MatrixXd& A, Index n_max, double margin = 0.1) {
  if (A.rows() != A.cols() || A.rows() == 0) throw InputError("geometric_norm_check: A must be square");
  if (n_max < 1) throw InputError("geometric_norm_check: n_max must be >= 1");
  GeometricEnvelope env;
  env.rho = linalg::spectral_radius(A);
  if (!(env.rho < 1.0))
    throw InputError("geometric_norm_check: spectral radius " + std::to_string(env.rho) + " is not below 1");
  env.r = env.rho + (1.0 - env.rho) * margin;
  MatrixXd pw = A;
  double log_r = std::log(env.r);
  std::vector<double> ratio;
  for (Index n = 1; n <= n_max; ++n) {
    const double nm = pw.norm();
    env.norms.push_back(nm);
    ratio.push_back(nm == 0.0 ? 0.0 : std::exp(std::log(nm) - static_cast<double>(n) * log_r));
    pw = A * pw;
  }
  env.M = *std::max_element(ratio.begin(), ratio.end());
  // The envelope can only be trusted beyond n_max if the scaled norms have
  // stopped growing: require the last quarter to be non-increasing in trend.
  const std::size_t q = ratio.size() - ratio.size() / 4;
  bool tail_ok = true;
  if (ratio.size() >= 8) tail_ok = ratio.back() <= ratio[q - 1] * (1.0 + 1e-12);
  env.valid = env.r < 1.0 && std::isfinite(env.M) && tail_ok;
  for (Index n = 1; n <= n_max; ++n)
    if (env.norms[static_cast<std::size_t>(n - 1)] >
        env.M * std::pow(env.r, static_cast<double>(n)) * (1.0 + 1e-12) + 1e-300)
      env.valid = false;
  return env;
}

/// One time step of a time-varying system.
struct TimeVaryingStep {
  MatrixXd Z;
  MatrixXd T;
};

struct EvDecayReport {
  std::vector<double> ev_norm;       // ||E(v'_t)||, t = 1..t_max
  std::vector<double> product_norm;  // ||prod_{i<t} T_i L'_i||_F after t steps
  bool decays = false;
  double tolerance = 0.0;
};

/// Propagates E(a_t - a'_t) with time-varying Z_t, T_t (the sequence is
/// cycled when shorter than t_max). Noise covariances and initial moments come
/// from the two models; their Z and T are ignored.
inline EvDecayReport time_varying_Ev_check(const std::vector<TimeVaryingStep>& steps, const StateSpaceModel& truth,
                                           const StateSpaceModel& misspec, Index t_max, double tol = 1e-6) {
  if (steps.empty()) throw InputError("time_varying_Ev_check: no system matrices");
  if (t_max < 1) throw InputError("time_varying_Ev_check: t_max must be >= 1");
  const Index p = truth.a1.size();
  EvDecayReport rep;
  rep.tolerance = tol;
  MatrixXd Pp = misspec.P1;
  VectorXd Ea = truth.a1 - misspec.a1;
  MatrixXd prod = MatrixXd::Identity(p, p);
  for (Index t = 1; t <= t_max; ++t) {
    const auto& s = steps[static_cast<std::size_t>((t - 1) % static_cast<Index>(steps.size()))];
    if (s.T.rows() != p || s.Z.cols() != p || s.Z.rows() != misspec.sigma_eps.rows())
      throw InputError("time_varying_Ev_check: step " + std::to_string(t) + " has inconsistent dimensions");
    rep.ev_norm.push_back((s.Z * Ea).norm());
    const RiccatiStep mr = riccati_step(s.Z, s.T, misspec.sigma_eps, misspec.sigma_eta, Pp, t);
    const MatrixXd TL = s.T * mr.L;
    Ea = TL * Ea;
    prod = TL * prod;
    rep.product_norm.push_back(prod.norm());
    Pp = mr.P_next;
  }
  rep.decays = rep.product_norm.back() < tol;
  return rep;
}

}  // namespace sutse
