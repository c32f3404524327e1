#pragma once

// Maximum-likelihood estimation for SUTSE models. A ParameterMap binds an
// unconstrained parameter vector into the entries of a SutseSpec template;
// log-mapped parameters keep variances positive so a box-constrained
// quasi-Newton search on the transformed scale suffices.

#include <chrono>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "sutse/error.hpp"
#include "sutse/optimize.hpp"
#include "sutse/parallel.hpp"
#include "sutse/state_space.hpp"
#include "sutse/sutse_builder.hpp"

namespace sutse {

enum class Transform { Identity, Log };

/// Which matrix a parameter writes into. Block matrices use `block`;
/// SigmaEps ignores it.
enum class Slot { SigmaEps, T, Q, Z, A1, P1 };

struct ParamTarget {
  Slot slot = Slot::SigmaEps;
  Index block = 0;
  Index row = 0;
  Index col = 0;
  bool symmetric = true;  // also write (col, row)

  auto key() const { return std::make_tuple(static_cast<int>(slot), slot == Slot::SigmaEps ? 0 : block, row, col); }
};

struct Parameter {
  std::string name;
  Transform transform = Transform::Identity;
  std::vector<ParamTarget> targets;
};

/// Log-scale box used for log-mapped parameters.
inline constexpr double kLogBound = 25.0;

class ParameterMap {
 public:
  std::vector<Parameter> params;

  Index size() const { return static_cast<Index>(params.size()); }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& p : params) out.push_back(p.name);
    return out;
  }

  void add(std::string name, Transform tr, std::vector<ParamTarget> targets) {
    params.push_back({std::move(name), tr, std::move(targets)});
  }

  /// Every target must exist in the template.
  void validate(const SutseSpec& tmpl) const {
    for (const auto& p : params) {
      if (p.targets.empty()) throw InputError("parameter '" + p.name + "' has no targets");
      for (const auto& t : p.targets) check_target(tmpl, t, p.name);
    }
  }

  VectorXd to_model(const VectorXd& u) const {
    check_length(u, "to_model");
    VectorXd th(u.size());
    for (Index i = 0; i < u.size(); ++i)
      th(i) = params[static_cast<std::size_t>(i)].transform == Transform::Log ? std::exp(u(i)) : u(i);
    return th;
  }

  VectorXd to_optimizer(const VectorXd& theta) const {
    check_length(theta, "to_optimizer");
    VectorXd u(theta.size());
    for (Index i = 0; i < theta.size(); ++i) {
      if (params[static_cast<std::size_t>(i)].transform == Transform::Log) {
        if (!(theta(i) > 0.0))
          throw InputError("parameter '" + params[static_cast<std::size_t>(i)].name + "' must be positive");
        u(i) = std::log(theta(i));
      } else {
        u(i) = theta(i);
      }
    }
    return u;
  }

  VectorXd lower_bounds() const { return bounds(-1.0); }
  VectorXd upper_bounds() const { return bounds(1.0); }

  /// Writes model-space values into a copy of the template.
  SutseSpec apply(const SutseSpec& tmpl, const VectorXd& theta) const {
    check_length(theta, "apply");
    SutseSpec out = tmpl;
    for (Index i = 0; i < theta.size(); ++i)
      for (const auto& t : params[static_cast<std::size_t>(i)].targets) write(out, t, theta(i));
    return out;
  }

  /// Model-space values currently held by the template (first target of each).
  VectorXd extract(const SutseSpec& tmpl) const {
    VectorXd th(size());
    for (Index i = 0; i < size(); ++i) th(i) = read(tmpl, params[static_cast<std::size_t>(i)].targets.front());
    return th;
  }

  static MatrixXd& matrix(SutseSpec& s, const ParamTarget& t) {
    if (t.slot == Slot::SigmaEps) return s.sigma_eps;
    auto& b = s.blocks.at(static_cast<std::size_t>(t.block));
    switch (t.slot) {
      case Slot::T: return b.T;
      case Slot::Q: return b.Q;
      case Slot::Z: return b.Z;
      case Slot::P1: return b.P1;
      default: break;
    }
    throw InputError("parameter target: a1 is a vector");
  }

 private:
  void check_length(const VectorXd& v, const char* what) const {
    if (v.size() != size())
      throw InputError(std::string("ParameterMap::") + what + ": expected " + std::to_string(size()) +
                       " values, got " + std::to_string(v.size()));
  }

  VectorXd bounds(double sign) const {
    VectorXd b(size());
    for (Index i = 0; i < size(); ++i)
      b(i) = params[static_cast<std::size_t>(i)].transform == Transform::Log
                 ? sign * kLogBound
                 : sign * std::numeric_limits<double>::infinity();
    return b;
  }

  static void check_target(const SutseSpec& s, const ParamTarget& t, const std::string& name) {
    auto fail = [&] { throw InputError("parameter '" + name + "' targets an entry outside the template"); };
    if (t.slot != Slot::SigmaEps && (t.block < 0 || t.block >= s.d())) fail();
    if (t.slot == Slot::A1) {
      if (t.row < 0 || t.row >= s.blocks[static_cast<std::size_t>(t.block)].a1.size()) fail();
      return;
    }
    const MatrixXd& m = matrix(const_cast<SutseSpec&>(s), t);
    if (t.row < 0 || t.col < 0 || t.row >= m.rows() || t.col >= m.cols()) fail();
    if (t.symmetric && (t.col >= m.rows() || t.row >= m.cols())) fail();
  }

  static void write(SutseSpec& s, const ParamTarget& t, double value) {
    if (t.slot == Slot::A1) {
      s.blocks.at(static_cast<std::size_t>(t.block)).a1(t.row) = value;
      return;
    }
    MatrixXd& m = matrix(s, t);
    m(t.row, t.col) = value;
    if (t.symmetric) m(t.col, t.row) = value;
  }

  static double read(const SutseSpec& s, const ParamTarget& t) {
    if (t.slot == Slot::A1) return s.blocks.at(static_cast<std::size_t>(t.block)).a1(t.row);
    return matrix(const_cast<SutseSpec&>(s), t)(t.row, t.col);
  }
};

/// theta_1..theta_d on the diagonal of sigma_eps (log), theta_{d+1} the
/// common off-diagonal (identity).
inline ParameterMap equicorrelation_map(Index d) {
  ParameterMap m;
  for (Index j = 0; j < d; ++j)
    m.add("sigma_eps_" + std::to_string(j + 1), Transform::Log, {{Slot::SigmaEps, 0, j, j, true}});
  if (d > 1) {
    std::vector<ParamTarget> off;
    for (Index i = 0; i < d; ++i)
      for (Index j = i + 1; j < d; ++j) off.push_back({Slot::SigmaEps, 0, i, j, true});
    m.add("sigma_eps_offdiag", Transform::Identity, std::move(off));
  }
  return m;
}

/// Only the observation variances sigma_eps(j, j).
inline ParameterMap diagonal_variance_map(Index d) {
  ParameterMap m;
  for (Index j = 0; j < d; ++j)
    m.add("sigma_eps_" + std::to_string(j + 1), Transform::Log, {{Slot::SigmaEps, 0, j, j, true}});
  return m;
}

/// AR coefficients (identity), level and AR noise variances and the
/// observation variance (log) of every AR + local-level block. With
/// `full_sigma` each off-diagonal of sigma_eps gets its own parameter.
inline ParameterMap ar_local_level_map(const SutseSpec& tmpl, bool full_sigma) {
  ParameterMap m;
  for (Index j = 0; j < tmpl.d(); ++j) {
    const Index q = tmpl.blocks[static_cast<std::size_t>(j)].p() - 1;
    const std::string tag = "_" + std::to_string(j + 1);
    for (Index i = 0; i < q; ++i)
      m.add("phi" + std::to_string(i + 1) + tag, Transform::Identity, {{Slot::T, j, 1, 1 + i, false}});
    m.add("q1" + tag, Transform::Log, {{Slot::Q, j, 0, 0, true}});
    m.add("q2" + tag, Transform::Log, {{Slot::Q, j, 1, 1, true}});
    m.add("sigma_eps" + tag, Transform::Log, {{Slot::SigmaEps, 0, j, j, true}});
  }
  if (full_sigma)
    for (Index i = 0; i < tmpl.d(); ++i)
      for (Index j = i + 1; j < tmpl.d(); ++j)
        m.add("sigma_eps_" + std::to_string(i + 1) + "_" + std::to_string(j + 1), Transform::Identity,
              {{Slot::SigmaEps, 0, i, j, true}});
  return m;
}

namespace detail {

/// Dimension owning a target, or -1 for an off-diagonal sigma_eps entry.
inline Index target_dimension(const ParamTarget& t) {
  if (t.slot != Slot::SigmaEps) return t.block;
  return t.row == t.col ? t.row : -1;
}

}  // namespace detail

/// Splits a map into one map per dimension. Fails if a parameter touches
/// more than one dimension or an off-diagonal of sigma_eps.
inline std::vector<ParameterMap> partition_by_dimension(const ParameterMap& pmap, Index d) {
  std::vector<ParameterMap> out(static_cast<std::size_t>(d));
  for (const auto& p : pmap.params) {
    Index owner = -2;
    for (const auto& t : p.targets) {
      const Index j = detail::target_dimension(t);
      if (j < 0 || j >= d || (owner != -2 && owner != j))
        throw InputError("parameter '" + p.name + "' does not belong to a single dimension");
      owner = j;
    }
    out[static_cast<std::size_t>(owner)].params.push_back(p);
  }
  return out;
}

struct FitResult {
  VectorXd theta_hat;  // model space
  double loglik = -std::numeric_limits<double>::infinity();
  bool converged = false;
  bool at_boundary = false;
  int iterations = 0;
  int evaluations = 0;
  double gradient_norm = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
  std::string message;
};

struct FitOptions {
  LbfgsOptions optimizer;
  std::size_t threads = 1;  // across dimensions in fit_per_dimension
};

/// Prediction-error log-likelihood of the template with `theta` (model space) bound
/// in. Any validation or filter failure scores -infinity.
inline double profile_loglik(const SutseSpec& tmpl, const ParameterMap& pmap, const ObservationSeries& series,
                             const VectorXd& theta) {
  try {
    const SutseSpec s = pmap.apply(tmpl, theta);
    const StateSpaceModel m = compose(s);
    const double ll = kalman_filter(m, series, FilterStorage::none()).loglik;
    return std::isfinite(ll) ? ll : -std::numeric_limits<double>::infinity();
  } catch (const Error&) {
    return -std::numeric_limits<double>::infinity();
  }
}

/// Maximises the full-model likelihood over the mapped parameters.
inline FitResult fit_full(const SutseSpec& tmpl, const ParameterMap& pmap, const ObservationSeries& series,
                          const VectorXd& init, const FitOptions& opts = {}) {
  tmpl.validate();
  pmap.validate(tmpl);
  if (init.size() != pmap.size())
    throw InputError("fit_full: init has " + std::to_string(init.size()) + " values, map has " +
                     std::to_string(pmap.size()));
  if (series.d() != tmpl.d()) throw InputError("fit_full: series/spec dimension mismatch");

  const auto start = std::chrono::steady_clock::now();
  const Objective f = [&](const VectorXd& u) { return profile_loglik(tmpl, pmap, series, pmap.to_model(u)); };
  const OptimResult r =
      maximize_lbfgs(f, pmap.to_optimizer(init), pmap.lower_bounds(), pmap.upper_bounds(), opts.optimizer);

  FitResult fr;
  fr.theta_hat = pmap.to_model(r.x);
  fr.loglik = r.value;
  fr.converged = r.converged && std::isfinite(r.value);
  fr.at_boundary = r.at_boundary;
  fr.iterations = r.iterations;
  fr.evaluations = r.evaluations;
  fr.gradient_norm = r.gradient_norm;
  fr.message = r.message;
  fr.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return fr;
}

namespace detail {

/// The univariate template of dimension j and `pmap` re-targeted onto it.
inline std::pair<SutseSpec, ParameterMap> localize(const SutseSpec& tmpl, const ParameterMap& pmap, Index j) {
  SutseSpec local;
  local.blocks = {tmpl.blocks.at(static_cast<std::size_t>(j))};
  local.sigma_eps = MatrixXd::Constant(1, 1, tmpl.sigma_eps(j, j));
  ParameterMap lm = pmap;
  for (auto& p : lm.params)
    for (auto& t : p.targets) {
      if (target_dimension(t) != j)
        throw InputError("fit_per_dimension: parameter '" + p.name + "' does not belong to dimension " +
                         std::to_string(j + 1));
      if (t.slot == Slot::SigmaEps) t.row = t.col = 0;
      t.block = 0;
    }
  return {std::move(local), std::move(lm)};
}

}  // namespace detail

/// Fits each dimension on its own column. Failures are reported in
/// the corresponding FitResult and do not stop the other dimensions.
inline std::vector<FitResult> fit_per_dimension(const SutseSpec& tmpl, const std::vector<ParameterMap>& pmaps,
                                                const ObservationSeries& series,
                                                const std::vector<VectorXd>& inits, const FitOptions& opts = {}) {
  const Index d = tmpl.d();
  if (static_cast<Index>(pmaps.size()) != d || static_cast<Index>(inits.size()) != d)
    throw InputError("fit_per_dimension: need one map and one init per dimension");
  if (series.d() != d) throw InputError("fit_per_dimension: series/spec dimension mismatch");
  std::set<std::tuple<int, Index, Index, Index>> seen;
  for (const auto& pm : pmaps)
    for (const auto& p : pm.params)
      for (const auto& t : p.targets)
        if (!seen.insert(t.key()).second)
          throw InputError("fit_per_dimension: parameter '" + p.name + "' overlaps another dimension's");

  std::vector<FitResult> out(static_cast<std::size_t>(d));
  parallel_for(static_cast<std::size_t>(d), opts.threads, [&](std::size_t jj) {
    const Index j = static_cast<Index>(jj);
    try {
      auto [local, lmap] = detail::localize(tmpl, pmaps[jj], j);
      FitOptions inner = opts;
      inner.threads = 1;
      out[jj] = fit_full(local, lmap, series.column(j), inits[jj], inner);
    } catch (const Error& e) {
      out[jj].converged = false;
      out[jj].message = std::string("dimension ") + std::to_string(j + 1) + ": " + e.what();
    }
  });
  return out;
}

/// Template with every per-dimension estimate written back.
inline SutseSpec apply_per_dimension(const SutseSpec& tmpl, const std::vector<ParameterMap>& pmaps,
                                     const std::vector<FitResult>& fits) {
  SutseSpec out = tmpl;
  for (std::size_t j = 0; j < pmaps.size(); ++j) {
    if (fits.at(j).theta_hat.size() != pmaps[j].size())
      throw NumericalError("dimension " + std::to_string(j + 1) + " has no estimate: " + fits[j].message);
    out = pmaps[j].apply(out, fits[j].theta_hat);
  }
  return out;
}

/// Variances at the sample variance of their column, AR coefficients and
/// off-diagonal covariances at zero.
inline VectorXd default_init(const ParameterMap& pmap, const ObservationSeries& series) {
  const Index d = series.d();
  VectorXd var(d);
  for (Index j = 0; j < d; ++j) {
    double s = 0.0, s2 = 0.0;
    Index c = 0;
    for (Index t = 0; t < series.n(); ++t)
      if (!series.missing(t, j)) {
        s += series.values(t, j);
        s2 += series.values(t, j) * series.values(t, j);
        ++c;
      }
    const double mean = c > 0 ? s / c : 0.0;
    var(j) = c > 1 ? (s2 - c * mean * mean) / (c - 1) : 1.0;
    if (!(var(j) > 0.0)) var(j) = 1.0;
  }
  VectorXd init(pmap.size());
  for (Index i = 0; i < pmap.size(); ++i) {
    const auto& p = pmap.params[static_cast<std::size_t>(i)];
    if (p.transform == Transform::Log) {
      const Index j = detail::target_dimension(p.targets.front());
      init(i) = (j >= 0 && j < d) ? var(j) : 1.0;
    } else {
      init(i) = 0.0;
    }
  }
  return init;
}

}  // namespace sutse
