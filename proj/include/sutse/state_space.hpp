#pragma once

// Linear-Gaussian state-space model
//
//   y_t       = Z alpha_t + eps_t,     eps_t ~ N(0, sigma_eps)
//   alpha_t+1 = T alpha_t + eta_t,     eta_t ~ N(0, sigma_eta)
//   alpha_1 ~ N(a1, P1)
//
// and its Kalman filter. Missing observations are handled by deleting the
// missing rows of Z and rows/columns of sigma_eps at that time step. The
// log-likelihood omits the -(d/2) log(2 pi) constant.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sutse/error.hpp"
#include "sutse/linalg.hpp"

namespace sutse {

using MissingMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;
using MissingRow = Eigen::Array<bool, Eigen::Dynamic, 1>;

/// Diffuse-prior scale used for an uninformative initial state.
inline constexpr double kDiffuseKappa = 1e7;

struct StateSpaceModel {
  MatrixXd Z;          // d x p
  MatrixXd T;          // p x p
  MatrixXd sigma_eps;  // d x d
  MatrixXd sigma_eta;  // p x p
  VectorXd a1;         // p
  MatrixXd P1;         // p x p

  Index d() const { return Z.rows(); }
  Index p() const { return Z.cols(); }

  void validate_dimensions() const {
    const Index dd = d(), pp = p();
    auto expect = [](bool ok, const char* what) {
      if (!ok) throw InputError(std::string("state-space model: ") + what);
    };
    expect(dd >= 1 && pp >= 1, "Z must be non-empty");
    expect(T.rows() == pp && T.cols() == pp, "T must be p x p");
    expect(sigma_eps.rows() == dd && sigma_eps.cols() == dd, "sigma_eps must be d x d");
    expect(sigma_eta.rows() == pp && sigma_eta.cols() == pp, "sigma_eta must be p x p");
    expect(a1.size() == pp, "a1 must have length p");
    expect(P1.rows() == pp && P1.cols() == pp, "P1 must be p x p");
    expect(Z.allFinite() && T.allFinite() && a1.allFinite(), "Z, T, a1 must be finite");
  }

  void validate() const {
    validate_dimensions();
    linalg::require_psd(sigma_eps, "sigma_eps");
    linalg::require_psd(sigma_eta, "sigma_eta");
    linalg::require_psd(P1, "P1");
  }
};

struct ObservationSeries {
  MatrixXd values;      // n x d, NaN where missing
  MissingMask missing;  // n x d

  ObservationSeries() = default;

  /// Cells holding NaN become missing.
  static ObservationSeries from_values(MatrixXd values) {
    ObservationSeries s;
    s.missing = values.array().isNaN();
    s.values = std::move(values);
    return s;
  }

  ObservationSeries(MatrixXd v, MissingMask m) : values(std::move(v)), missing(std::move(m)) {
    validate();
    for (Index t = 0; t < values.rows(); ++t)
      for (Index j = 0; j < values.cols(); ++j)
        if (missing(t, j)) values(t, j) = std::numeric_limits<double>::quiet_NaN();
  }

  Index n() const { return values.rows(); }
  Index d() const { return values.cols(); }
  bool observed(Index t, Index j) const { return !missing(t, j); }

  void validate() const {
    if (missing.rows() != values.rows() || missing.cols() != values.cols())
      throw InputError("observation series: mask and values differ in shape");
    for (Index t = 0; t < values.rows(); ++t)
      for (Index j = 0; j < values.cols(); ++j)
        if (!missing(t, j) && !std::isfinite(values(t, j)))
          throw InputError("observation series: non-finite value at row " + std::to_string(t + 1) +
                           ", column " + std::to_string(j + 1));
  }

  ObservationSeries rows(Index start, Index count) const {
    ObservationSeries s;
    s.values = values.middleRows(start, count);
    s.missing = missing.middleRows(start, count);
    return s;
  }

  ObservationSeries column(Index j) const {
    ObservationSeries s;
    s.values = values.col(j);
    s.missing = missing.col(j);
    return s;
  }

  Index count_missing() const { return missing.count(); }
};

struct KalmanState {
  VectorXd a;  // E(alpha_t | Y_{t-1})
  MatrixXd P;  // V(alpha_t | Y_{t-1})
  Index t = 1;
};

inline KalmanState initial_state(const StateSpaceModel& m) { return {m.a1, m.P1, 1}; }

/// Everything produced by one filter step.
struct StepResult {
  KalmanState next;
  VectorXd v;         // length d, NaN at missing components
  IndexList observed; // components used at this step
  MatrixXd F;         // |observed| x |observed|
  MatrixXd K;         // p x |observed|
  MatrixXd L;         // p x p
  double loglik_increment = 0.0;
};

/// Which per-time trajectories kalman_filter keeps. Final state and loglik are
/// always returned.
struct FilterStorage {
  bool innovations = true;  // v and F
  bool states = true;       // a and P
  bool gains = true;        // K and L

  static FilterStorage none() { return {false, false, false}; }
  static FilterStorage innovations_only() { return {true, false, false}; }
};

struct FilterOutput {
  MatrixXd v;                        // n x d, NaN where missing
  MissingMask v_missing;             // n x d
  std::vector<MatrixXd> F;           // n, reduced to observed components
  std::vector<IndexList> observed;   // n
  std::vector<VectorXd> a;           // n + 1
  std::vector<MatrixXd> P;           // n + 1
  std::vector<MatrixXd> K;           // n
  std::vector<MatrixXd> L;           // n
  double loglik = 0.0;
  KalmanState final_state;           // (a_{n+1}, P_{n+1})
};

namespace detail {

/// Filter kernel with the model's operands prepared once.
class KalmanKernel {
public:
  explicit KalmanKernel(const StateSpaceModel& model)
      : model_(model), T_(model.T), Z_(model.Z) {}

  StepResult step(const KalmanState& s, const VectorXd& y, const MissingRow& missing,
                  bool want_gains, std::ptrdiff_t dimension_tag = -1) const {
    const Index d = model_.d();
    const Index p = model_.p();
    if (y.size() != d || missing.size() != d)
      throw InputError("kalman_step: observation length " + std::to_string(y.size()) +
                       " does not match d=" + std::to_string(d));
    if (s.a.size() != p || s.P.rows() != p || s.P.cols() != p)
      throw InputError("kalman_step: state dimensions do not match the model");

    StepResult r;
    r.v = VectorXd::Constant(d, std::numeric_limits<double>::quiet_NaN());
    for (Index j = 0; j < d; ++j)
      if (!missing(j)) r.observed.push_back(j);
    const Index k = static_cast<Index>(r.observed.size());

    MatrixXd P_filtered;
    VectorXd a_filtered;
    if (k == 0) {
      a_filtered = s.a;
      P_filtered = s.P;
      r.F.resize(0, 0);
      if (want_gains) {
        r.K = MatrixXd::Zero(p, 0);
        r.L = MatrixXd::Identity(p, p);
      }
    } else if (k == d) {
      r.v = update(Z_, model_.sigma_eps, y, s, r, a_filtered, P_filtered, want_gains, dimension_tag);
    } else {
      const linalg::Operand z(linalg::select_rows(model_.Z, r.observed));
      const MatrixXd sig = linalg::select(model_.sigma_eps, r.observed, r.observed);
      const VectorXd yo = linalg::select(y, r.observed);
      const VectorXd vo = update(z, sig, yo, s, r, a_filtered, P_filtered, want_gains, dimension_tag);
      for (Index i = 0; i < k; ++i) r.v(r.observed[static_cast<std::size_t>(i)]) = vo(i);
    }

    r.next.t = s.t + 1;
    r.next.a = T_.mul(a_filtered);
    r.next.P = T_.sandwich(P_filtered);
    r.next.P += model_.sigma_eta;
    return r;
  }

private:
  // Measurement update on the observed sub-vector. Returns the reduced-order
  // innovation; fills F, K, L and the log-likelihood term of `r`.
  VectorXd update(const linalg::Operand& z, const MatrixXd& sig, const VectorXd& y, const KalmanState& s,
              StepResult& r, VectorXd& a_f, MatrixXd& P_f, bool want_gains,
              std::ptrdiff_t dimension_tag) const {
    const MatrixXd ZP = z.mul(s.P);  // k x p
    MatrixXd F = z.mul_right_transposed(ZP);
    F += sig;
    linalg::symmetrize(F);

    Eigen::LLT<MatrixXd> llt(F);
    if (!F.allFinite() || llt.info() != Eigen::Success) throw DivergenceError(s.t, dimension_tag);
    const auto& Lc = llt.matrixLLT();
    double log_det = 0.0;
    for (Index i = 0; i < F.rows(); ++i) {
      const double piv = Lc(i, i);
      if (!(piv > 0.0) || !std::isfinite(piv)) throw DivergenceError(s.t, dimension_tag);
      log_det += 2.0 * std::log(piv);
    }

    const VectorXd v = y - z.mul(s.a).col(0);
    const VectorXd Finv_v = llt.solve(v);
    r.loglik_increment = -0.5 * v.dot(Finv_v) - 0.5 * log_det;

    a_f = s.a + ZP.transpose() * Finv_v;
    // P - (ZP)^T F^{-1} ZP as a symmetric rank-k downdate by W = chol(F)^{-1} ZP.
    MatrixXd W = ZP;
    llt.matrixL().solveInPlace(W);
    P_f = s.P;
    P_f.selfadjointView<Eigen::Lower>().rankUpdate(W.transpose(), -1.0);
    P_f.triangularView<Eigen::StrictlyUpper>() = P_f.transpose();

    if (want_gains) {
      r.K = llt.solve(ZP).transpose();
      r.L = MatrixXd::Identity(s.P.rows(), s.P.rows());
      r.L.noalias() -= r.K * z.dense();
    }
    r.F = std::move(F);
    return v;
  }

  const StateSpaceModel& model_;
  linalg::Operand T_;
  linalg::Operand Z_;
};

}  // namespace detail

/// One filter step at time `state.t`. `missing` flags components of `y` that
/// were not observed; pass an empty row to mean "all observed".
inline StepResult kalman_step(const StateSpaceModel& model, const KalmanState& state, const VectorXd& y,
                              const MissingRow& missing = MissingRow()) {
  model.validate_dimensions();
  const MissingRow mask = missing.size() == 0 ? MissingRow::Constant(model.d(), false) : missing;
  return detail::KalmanKernel(model).step(state, y, mask, true);
}

/// Runs the filter over `series`, starting from `start` (default (a1, P1)).
inline FilterOutput kalman_filter(const StateSpaceModel& model, const ObservationSeries& series,
                                  FilterStorage storage = {},
                                  const std::optional<KalmanState>& start = std::nullopt,
                                  std::ptrdiff_t dimension_tag = -1) {
  model.validate_dimensions();
  if (series.d() != model.d())
    throw InputError("kalman_filter: series has " + std::to_string(series.d()) +
                     " columns but the model has d=" + std::to_string(model.d()));
  const Index n = series.n();
  const Index d = model.d();
  const detail::KalmanKernel kernel(model);

  FilterOutput out;
  KalmanState state = start ? *start : initial_state(model);
  if (storage.innovations) {
    out.v.resize(n, d);
    out.v_missing = series.missing;
    out.F.reserve(static_cast<std::size_t>(n));
    out.observed.reserve(static_cast<std::size_t>(n));
  }
  if (storage.states) {
    out.a.reserve(static_cast<std::size_t>(n + 1));
    out.P.reserve(static_cast<std::size_t>(n + 1));
    out.a.push_back(state.a);
    out.P.push_back(state.P);
  }
  if (storage.gains) {
    out.K.reserve(static_cast<std::size_t>(n));
    out.L.reserve(static_cast<std::size_t>(n));
  }

  VectorXd y(d);
  MissingRow miss(d);
  for (Index t = 0; t < n; ++t) {
    y = series.values.row(t).transpose();
    miss = series.missing.row(t).transpose();
    StepResult r = kernel.step(state, y, miss, storage.gains, dimension_tag);
    out.loglik += r.loglik_increment;
    if (storage.innovations) {
      out.v.row(t) = r.v.transpose();
      out.F.push_back(std::move(r.F));
      out.observed.push_back(std::move(r.observed));
    }
    if (storage.gains) {
      out.K.push_back(std::move(r.K));
      out.L.push_back(std::move(r.L));
    }
    state = std::move(r.next);
    if (storage.states) {
      out.a.push_back(state.a);
      out.P.push_back(state.P);
    }
  }
  out.final_state = std::move(state);
  return out;
}

/// Sum over t of -1/2 v_t' F_t^{-1} v_t - 1/2 log|F_t| on observed components.
inline double log_likelihood(const StateSpaceModel& model, const ObservationSeries& series) {
  return kalman_filter(model, series, FilterStorage::none()).loglik;
}

/// Draws a path of length n from the model. Deterministic given `seed` on a
/// given platform.
inline ObservationSeries simulate(const StateSpaceModel& model, Index n, std::uint64_t seed) {
  if (n < 1) throw InputError("simulate: n must be at least 1");
  model.validate();
  const Index d = model.d(), p = model.p();
  const MatrixXd eps_factor = linalg::psd_factor(model.sigma_eps);
  const MatrixXd eta_factor = linalg::psd_factor(model.sigma_eta);
  const MatrixXd init_factor = linalg::psd_factor(model.P1);
  const linalg::Operand T(model.T), Z(model.Z);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](Index k) {
    VectorXd z(k);
    for (Index i = 0; i < k; ++i) z(i) = normal(rng);
    return z;
  };

  MatrixXd values(n, d);
  VectorXd alpha = model.a1 + init_factor * draw(p);
  for (Index t = 0; t < n; ++t) {
    values.row(t) = (Z.mul(alpha).col(0) + eps_factor * draw(d)).transpose();
    alpha = T.mul(alpha).col(0) + eta_factor * draw(p);
  }
  ObservationSeries s;
  s.values = std::move(values);
  s.missing = MissingMask::Constant(n, d, false);
  return s;
}

}  // namespace sutse
