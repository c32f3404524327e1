#pragma once

// Monte Carlo benchmark of exact vs fast same-step forecasting, the
// per-dimension pipeline for real-shaped panels, and report emission.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sutse/error.hpp"
#include "sutse/estimation.hpp"
#include "sutse/forecast_exact.hpp"
#include "sutse/forecast_fast.hpp"
#include "sutse/io.hpp"
#include "sutse/parallel.hpp"
#include "sutse/sparse_cov.hpp"
#include "sutse/state_space.hpp"
#include "sutse/sutse_builder.hpp"
#include "sutse/theory_lab.hpp"

namespace sutse {

enum class Method { Exact, FastSample, FastGlasso };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::Exact: return "exact";
    case Method::FastSample: return "fast-sample";
    case Method::FastGlasso: return "fast-glasso";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "exact") return Method::Exact;
  if (s == "fast-sample") return Method::FastSample;
  if (s == "fast-glasso") return Method::FastGlasso;
  throw InputError("unknown method '" + s + "' (expected exact, fast-sample or fast-glasso)");
}

struct BenchConfig {
  std::vector<Index> d_list{4, 8, 12};
  Index n_train = 1000;
  Index n_test = 1000;
  Index n_generated = 2000;
  int replications = 20;
  Index n0 = 5;
  std::uint64_t seed = 1;
  std::vector<Method> methods{Method::Exact, Method::FastSample};
  double rho = 0.5;
  bool oracle = false;  // true parameters and the limiting V instead of estimates
  std::size_t threads = 1;
  FitOptions fit;

  static BenchConfig paper_scale() {
    BenchConfig c;
    c.d_list = {4, 6, 8, 10, 12, 14, 16};
    c.replications = 100;
    return c;
  }

  void validate() const {
    if (d_list.empty()) throw InputError("bench: empty d list");
    for (Index d : d_list)
      if (d < 2) throw InputError("bench: every d must be >= 2");
    if (replications < 1) throw InputError("bench: replications must be >= 1");
    if (n_train < 1 || n_test < 1) throw InputError("bench: n_train and n_test must be >= 1");
    if (n_train + n_test > n_generated) throw InputError("bench: n_train + n_test exceeds the generated length");
    if (n0 < 1 || n0 > n_train) throw InputError("bench: n0 must lie in [1, n_train]");
    if (methods.empty()) throw InputError("bench: no methods selected");
  }
};

struct BenchRow {
  Method method = Method::Exact;
  Index d = 0;
  int replication = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  bool converged = false;
  Index n_forecasts = 0;
  double same_mse = std::numeric_limits<double>::quiet_NaN();
  double one_mse = std::numeric_limits<double>::quiet_NaN();
  double fit_seconds = 0.0;
  double forecast_seconds = 0.0;
  double lambda = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

struct BenchAggregate {
  Method method = Method::Exact;
  Index d = 0;
  int n_ok = 0;
  int n_failed = 0;
  double same_mse = std::numeric_limits<double>::quiet_NaN();
  double one_mse = std::numeric_limits<double>::quiet_NaN();
  double fit_seconds = std::numeric_limits<double>::quiet_NaN();
  double forecast_seconds = std::numeric_limits<double>::quiet_NaN();
};

struct BenchReport {
  std::vector<BenchRow> rows;
  std::vector<Method> methods;
  std::vector<Index> d_list;
  std::size_t threads = 1;
  std::string timestamp;

  /// Means over successful replications, per (method, d) in config order.
  std::vector<BenchAggregate> aggregates() const {
    std::vector<BenchAggregate> out;
    for (Index d : d_list)
      for (Method m : methods) {
        BenchAggregate a;
        a.method = m;
        a.d = d;
        double s = 0, o = 0, f = 0, g = 0;
        for (const auto& r : rows) {
          if (r.method != m || r.d != d) continue;
          if (!r.ok) {
            ++a.n_failed;
            continue;
          }
          ++a.n_ok;
          s += r.same_mse;
          o += r.one_mse;
          f += r.fit_seconds;
          g += r.forecast_seconds;
        }
        if (a.n_ok > 0) {
          a.same_mse = s / a.n_ok;
          a.one_mse = o / a.n_ok;
          a.fit_seconds = f / a.n_ok;
          a.forecast_seconds = g / a.n_ok;
        }
        out.push_back(a);
      }
    return out;
  }

  std::optional<BenchAggregate> find(Method m, Index d) const {
    for (const auto& a : aggregates())
      if (a.method == m && a.d == d) return a;
    return std::nullopt;
  }
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

/// Squared same-step and one-step errors of component `target` given the
/// innovations of components `cond` and their covariance `cov`.
struct ErrorAccumulator {
  double same = 0.0, one = 0.0;
  Index count = 0;

  void add(const VectorXd& v, const MatrixXd& cov, const IndexList& cond, Index target) {
    const double e_one = v(target);
    const double e_same = e_one - same_step_correction(cov, cond, target, linalg::select(v, cond),
                                                       "same-step error: conditioning covariance is singular");
    same += e_same * e_same;
    one += e_one * e_one;
    ++count;
  }
  double same_mse() const { return count ? same / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN(); }
  double one_mse() const { return count ? one / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN(); }
};

inline IndexList prefix(Index k) {
  IndexList a;
  for (Index i = 0; i < k; ++i) a.push_back(i);
  return a;
}

/// One replication of the simulation design for every configured method.
inline std::vector<BenchRow> run_replication(const BenchConfig& cfg, Index d, int rep) {
  const std::uint64_t seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(rep));
  std::vector<BenchRow> rows;
  for (Method m : cfg.methods) {
    BenchRow r;
    r.method = m;
    r.d = d;
    r.replication = rep;
    r.seed = seed;
    rows.push_back(r);
  }
  auto row_for = [&](Method m) -> BenchRow& {
    for (auto& r : rows)
      if (r.method == m) return r;
    throw std::logic_error("method not configured");
  };
  auto wants = [&](Method m) { return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end(); };

  const SutseSpec truth = simulation_model(d, cfg.rho);
  ObservationSeries full;
  try {
    full = simulate(compose(truth), cfg.n_generated, seed);
  } catch (const Error& e) {
    for (auto& r : rows) r.error = e.what();
    return rows;
  }
  const Index n_used = cfg.n_train + cfg.n_test;
  const ObservationSeries data = full.rows(0, n_used);
  const ObservationSeries train = data.rows(0, cfg.n_train);
  const Index target = d - 1;
  const IndexList cond = prefix(d - 1);

  if (wants(Method::Exact)) {
    BenchRow& r = row_for(Method::Exact);
    try {
      auto t0 = std::chrono::steady_clock::now();
      SutseSpec fitted = truth;
      r.converged = true;
      if (!cfg.oracle) {
        const ParameterMap pm = equicorrelation_map(d);
        const FitResult fr = fit_full(truth, pm, train, default_init(pm, train), cfg.fit);
        fitted = pm.apply(truth, fr.theta_hat);
        r.converged = fr.converged;
      }
      r.fit_seconds = seconds_since(t0);
      t0 = std::chrono::steady_clock::now();
      const FilterOutput out = kalman_filter(compose(fitted), data, FilterStorage::innovations_only());
      ErrorAccumulator acc;
      for (Index t = cfg.n_train; t < n_used; ++t)
        acc.add(out.v.row(t).transpose(), out.F[static_cast<std::size_t>(t)], cond, target);
      r.forecast_seconds = seconds_since(t0);
      r.same_mse = acc.same_mse();
      r.one_mse = acc.one_mse();
      r.n_forecasts = acc.count;
      r.ok = true;
    } catch (const Error& e) {
      r.error = e.what();
    }
  }

  if (wants(Method::FastSample) || wants(Method::FastGlasso)) {
    try {
      auto t0 = std::chrono::steady_clock::now();
      SutseSpec diag = diagonalized(truth);
      MatrixXd V_sample;
      Index m_rows = 0;
      bool converged = true;
      if (cfg.oracle) {
        V_sample = exact_error_moments(compose(truth), compose(diag), 500).tail();
        m_rows = cfg.n_train;
      } else {
        const ParameterMap pm = diagonal_variance_map(d);
        const auto pmaps = partition_by_dimension(pm, d);
        const VectorXd init = default_init(pm, train);
        std::vector<VectorXd> inits;
        for (Index j = 0; j < d; ++j) inits.push_back(VectorXd::Constant(1, init(j)));
        FitOptions fo = cfg.fit;
        fo.threads = 1;
        const auto fits = fit_per_dimension(truth, pmaps, train, inits, fo);
        for (const auto& f : fits) converged = converged && f.converged;
        diag = diagonalized(apply_per_dimension(truth, pmaps, fits));
        FastFilterOptions ffo;
        ffo.store_states = false;
        const ErrorCovEstimate est = sample_error_cov(run_univariate_filters(diag, train, ffo), cfg.n0);
        V_sample = est.V;
        m_rows = est.m;
      }
      const double base_seconds = seconds_since(t0);

      auto forecast_with = [&](BenchRow& r, const MatrixXd& V) {
        const auto t1 = std::chrono::steady_clock::now();
        FastFilterOptions ffo;
        ffo.store_states = false;
        const FastFilterOutput ff = run_univariate_filters(diag, data, ffo);
        ErrorAccumulator acc;
        for (Index t = cfg.n_train; t < n_used; ++t) acc.add(ff.v_prime.row(t).transpose(), V, cond, target);
        r.forecast_seconds = seconds_since(t1);
        r.same_mse = acc.same_mse();
        r.one_mse = acc.one_mse();
        r.n_forecasts = acc.count;
        r.converged = converged;
        r.ok = true;
      };

      if (wants(Method::FastSample)) {
        BenchRow& r = row_for(Method::FastSample);
        try {
          r.fit_seconds = base_seconds;
          forecast_with(r, V_sample);
        } catch (const Error& e) {
          r.error = e.what();
        }
      }
      if (wants(Method::FastGlasso)) {
        BenchRow& r = row_for(Method::FastGlasso);
        try {
          const auto t1 = std::chrono::steady_clock::now();
          const BicSelection sel =
              select_lambda_bic(V_sample, std::max<Index>(m_rows, 2), default_lambda_grid(V_sample));
          r.fit_seconds = base_seconds + seconds_since(t1);
          r.lambda = sel.lambda_star;
          forecast_with(r, sel.best.V_glasso);
        } catch (const Error& e) {
          r.error = e.what();
        }
      }
    } catch (const Error& e) {
      for (Method m : {Method::FastSample, Method::FastGlasso})
        if (wants(m)) row_for(m).error = e.what();
    }
  }
  return rows;
}

}  // namespace detail

/// Simulates, fits and forecasts every (d, replication) pair. Data, fits and
/// forecasts depend only on the root seed; wall times vary.
inline BenchReport run_simulation_benchmark(const BenchConfig& cfg) {
  cfg.validate();
  BenchReport rep;
  rep.methods = cfg.methods;
  rep.d_list = cfg.d_list;
  rep.threads = cfg.threads;
  rep.timestamp = detail::utc_timestamp();
  const std::size_t reps = static_cast<std::size_t>(cfg.replications);
  const std::size_t tasks = cfg.d_list.size() * reps;
  std::vector<std::vector<BenchRow>> slots(tasks);
  parallel_for(tasks, cfg.threads, [&](std::size_t k) {
    slots[k] = detail::run_replication(cfg, cfg.d_list[k / reps], static_cast<int>(k % reps));
  });
  for (auto& s : slots)
    for (auto& r : s) rep.rows.push_back(std::move(r));
  return rep;
}

namespace detail {

inline std::string csv_safe(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

}  // namespace detail

/// Writes <prefix>_rows.csv, <prefix>_summary.csv, <prefix>_plot.csv and
/// <prefix>_meta.csv into `dir`. Returns the paths written.
inline std::vector<std::string> emit_report(const BenchReport& rep, const std::string& dir,
                                            const std::string& prefix = "bench") {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create '" + dir + "': " + ec.message());
  using io::format_double;

  io::CsvTable rows{{"method", "d", "replication", "seed", "ok", "converged", "n_forecasts", "same_step_mse",
                     "one_step_mse", "fit_seconds", "forecast_seconds", "lambda", "error"},
                    {}};
  for (const auto& r : rep.rows)
    rows.add({method_name(r.method), std::to_string(r.d), std::to_string(r.replication), std::to_string(r.seed),
              r.ok ? "1" : "0", r.converged ? "1" : "0", std::to_string(r.n_forecasts), format_double(r.same_mse),
              format_double(r.one_mse), format_double(r.fit_seconds), format_double(r.forecast_seconds),
              format_double(r.lambda), detail::csv_safe(r.error)});

  io::CsvTable summary{{"method", "d", "n_ok", "n_failed", "same_step_mse", "one_step_mse", "fit_seconds",
                        "forecast_seconds"},
                       {}};
  io::CsvTable plot{{"x", "method", "same_step_mse", "one_step_mse", "fit_seconds"}, {}};
  if (!rep.rows.empty())
    for (const auto& a : rep.aggregates()) {
      summary.add({method_name(a.method), std::to_string(a.d), std::to_string(a.n_ok), std::to_string(a.n_failed),
                   format_double(a.same_mse), format_double(a.one_mse), format_double(a.fit_seconds),
                   format_double(a.forecast_seconds)});
      plot.add({std::to_string(a.d), method_name(a.method), format_double(a.same_mse), format_double(a.one_mse),
                format_double(a.fit_seconds)});
    }

  io::CsvTable meta{{"key", "value"}, {}};
  meta.add({"threads", std::to_string(rep.threads)});
  meta.add({"timestamp", rep.timestamp});
  meta.add({"rows", std::to_string(rep.rows.size())});

  std::vector<std::string> paths;
  auto put = [&](const io::CsvTable& t, const std::string& name) {
    const std::string p = (fs::path(dir) / (prefix + "_" + name + ".csv")).string();
    t.write_file(p);
    paths.push_back(p);
  };
  put(rows, "rows");
  put(summary, "summary");
  put(plot, "plot");
  put(meta, "meta");
  return paths;
}

// ---------------------------------------------------------------- pipeline

struct PipelineOptions {
  bool log_transform = false;
  Index n_train = 0;  // 0: first ceil(n/2) rows
  Index n0 = 5;
  CovMethod cov = CovMethod::Sample;
  std::optional<double> lambda;    // glasso: fixed penalty instead of BIC
  std::vector<double> lambda_grid; // glasso: BIC grid, empty for the default
  Index cond_lag = 1;              // component j conditions on 1..j-cond_lag
  std::size_t threads = 1;
  FitOptions fit;
};

struct PipelinePosition {
  Index index = 0;
  std::string name;
  Index n_same = 0;
  double same_mse = std::numeric_limits<double>::quiet_NaN();
  Index n_one = 0;
  double one_mse = std::numeric_limits<double>::quiet_NaN();
};

struct PipelineReport {
  std::vector<PipelinePosition> positions;
  std::vector<FitResult> fits;
  std::vector<std::string> parameter_names;
  ErrorCovEstimate cov;
  std::optional<BicSelection> bic;
  SutseSpec fitted;
  Index n_train = 0;
  Index n_test = 0;
  double fit_seconds = 0.0;
  double cov_seconds = 0.0;
  double forecast_seconds = 0.0;
  double total_seconds = 0.0;
  double same_mse = std::numeric_limits<double>::quiet_NaN();  // pooled over positions
  double one_mse = std::numeric_limits<double>::quiet_NaN();
};

/// AR(q) + local-level blocks with a diffuse prior and identity sigma_eps.
inline SutseSpec pipeline_template(Index d, Index q = 5) {
  if (d < 1 || q < 1) throw InputError("pipeline_template: need d >= 1 and q >= 1");
  SutseSpec s;
  for (Index j = 0; j < d; ++j) s.blocks.push_back(ar_local_level_block(VectorXd::Zero(q), 1.0, 1.0));
  s.sigma_eps = MatrixXd::Identity(d, d);
  return with_diffuse_prior(s);
}

/// Per-dimension fits on the training rows, V from complete rows of the
/// training innovations, then rolling same-step forecasts on the test rows.
inline PipelineReport run_pipeline(const io::NamedSeries& data, const SutseSpec& tmpl, const PipelineOptions& opt = {}) {
  const auto t_total = std::chrono::steady_clock::now();
  const ObservationSeries& raw = data.series;
  const Index n = raw.n(), d = raw.d();
  tmpl.validate();
  if (tmpl.d() != d)
    throw InputError("pipeline: spec has d=" + std::to_string(tmpl.d()) + " but the data have " + std::to_string(d) +
                     " columns");
  if (n < 2) throw InputError("pipeline: need at least two rows");
  for (Index j = 0; j < d; ++j)
    if (raw.missing.col(j).all())
      throw InputError("pipeline: column '" + data.names[static_cast<std::size_t>(j)] + "' is entirely missing");
  if (opt.cond_lag < 1) throw InputError("pipeline: cond_lag must be >= 1");

  ObservationSeries work = raw;
  if (opt.log_transform) {
    for (Index t = 0; t < n; ++t)
      for (Index j = 0; j < d; ++j)
        if (!raw.missing(t, j)) {
          if (!(raw.values(t, j) > 0.0))
            throw InputError("pipeline: log transform needs positive values (row " + std::to_string(t + 2) +
                             ", column '" + data.names[static_cast<std::size_t>(j)] + "')");
          work.values(t, j) = std::log(raw.values(t, j));
        }
  }

  PipelineReport rep;
  rep.n_train = opt.n_train > 0 ? opt.n_train : (n + 1) / 2;
  if (rep.n_train >= n) throw InputError("pipeline: training window leaves no test rows");
  rep.n_test = n - rep.n_train;
  const ObservationSeries train = work.rows(0, rep.n_train);
  for (Index j = 0; j < d; ++j)
    if (train.missing.col(j).all())
      throw InputError("pipeline: column '" + data.names[static_cast<std::size_t>(j)] +
                       "' has no observations in the training window");

  auto t0 = std::chrono::steady_clock::now();
  const ParameterMap pm = ar_local_level_map(tmpl, false);
  rep.parameter_names = pm.names();
  const auto pmaps = partition_by_dimension(pm, d);
  std::vector<VectorXd> inits;
  for (const auto& m : pmaps) inits.push_back(default_init(m, train));
  FitOptions fo = opt.fit;
  fo.threads = opt.threads;
  rep.fits = fit_per_dimension(tmpl, pmaps, train, inits, fo);
  rep.fitted = apply_per_dimension(tmpl, pmaps, rep.fits);
  const SutseSpec diag = diagonalized(rep.fitted);
  rep.fit_seconds = detail::seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  FastFilterOptions ffo;
  ffo.store_states = false;
  ffo.threads = opt.threads;
  rep.cov = sample_error_cov(run_univariate_filters(diag, train, ffo), opt.n0);
  if (opt.cov == CovMethod::Glasso) {
    if (opt.lambda) {
      rep.cov = glasso_error_cov(rep.cov, *opt.lambda);
    } else {
      const auto grid = opt.lambda_grid.empty() ? default_lambda_grid(rep.cov.V) : opt.lambda_grid;
      rep.bic = select_lambda_bic(rep.cov.V, std::max<Index>(rep.cov.m, 2), grid);
      const Index m = rep.cov.m, n0 = rep.cov.n0;
      rep.cov.V = rep.bic->best.V_glasso;
      rep.cov.method = CovMethod::Glasso;
      rep.cov.lambda = rep.bic->lambda_star;
      rep.cov.m = m;
      rep.cov.n0 = n0;
    }
  }
  rep.cov_seconds = detail::seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  const FastFilterOutput ff = run_univariate_filters(diag, work, ffo);
  std::vector<double> s_same(static_cast<std::size_t>(d), 0.0), s_one(static_cast<std::size_t>(d), 0.0);
  std::vector<Index> c_same(static_cast<std::size_t>(d), 0), c_one(static_cast<std::size_t>(d), 0);
  for (Index t = rep.n_train; t < n; ++t) {
    for (Index j = 0; j < d; ++j) {
      if (raw.missing(t, j)) continue;
      IndexList A;
      for (Index i = 0; i <= j - opt.cond_lag; ++i)
        if (!raw.missing(t, i)) A.push_back(i);
      const double base = work.values(t, j) - ff.v_prime(t, j);  // Z a'_t on the working scale
      VectorXd vA(static_cast<Index>(A.size()));
      for (std::size_t k = 0; k < A.size(); ++k) vA(static_cast<Index>(k)) = ff.v_prime(t, A[k]);
      const double corr = detail::same_step_correction(
          rep.cov.V, A, j, vA, "pipeline: estimated V(A,A) is singular; try --cov glasso");
      double f_one = base, f_same = base + corr;
      if (opt.log_transform) {
        f_one = std::exp(f_one);
        f_same = std::exp(f_same);
      }
      const double y = raw.values(t, j);
      s_one[static_cast<std::size_t>(j)] += (y - f_one) * (y - f_one);
      s_same[static_cast<std::size_t>(j)] += (y - f_same) * (y - f_same);
      ++c_one[static_cast<std::size_t>(j)];
      ++c_same[static_cast<std::size_t>(j)];
    }
  }
  double tot_same = 0, tot_one = 0;
  Index tot_n = 0;
  for (Index j = 0; j < d; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    PipelinePosition p;
    p.index = j;
    p.name = data.names[jj];
    p.n_same = c_same[jj];
    p.n_one = c_one[jj];
    if (p.n_same > 0) p.same_mse = s_same[jj] / static_cast<double>(p.n_same);
    if (p.n_one > 0) p.one_mse = s_one[jj] / static_cast<double>(p.n_one);
    tot_same += s_same[jj];
    tot_one += s_one[jj];
    tot_n += c_same[jj];
    rep.positions.push_back(p);
  }
  if (tot_n > 0) {
    rep.same_mse = tot_same / static_cast<double>(tot_n);
    rep.one_mse = tot_one / static_cast<double>(tot_n);
  }
  rep.forecast_seconds = detail::seconds_since(t0);
  rep.total_seconds = detail::seconds_since(t_total);
  return rep;
}

inline std::vector<std::string> emit_pipeline_report(const PipelineReport& rep, const std::string& dir,
                                                     const std::string& prefix = "pipeline") {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create '" + dir + "': " + ec.message());
  using io::format_double;
  std::vector<std::string> paths;
  auto put = [&](const io::CsvTable& t, const std::string& name) {
    const std::string p = (fs::path(dir) / (prefix + "_" + name + ".csv")).string();
    t.write_file(p);
    paths.push_back(p);
  };

  io::CsvTable pos{{"position", "name", "n_same", "same_step_mse", "n_one", "one_step_mse"}, {}};
  for (const auto& p : rep.positions)
    pos.add({std::to_string(p.index + 1), p.name, std::to_string(p.n_same), format_double(p.same_mse),
             std::to_string(p.n_one), format_double(p.one_mse)});
  put(pos, "positions");

  io::CsvTable sum{{"key", "value"}, {}};
  sum.add({"n_train", std::to_string(rep.n_train)});
  sum.add({"n_test", std::to_string(rep.n_test)});
  sum.add({"n0", std::to_string(rep.cov.n0)});
  sum.add({"complete_rows", std::to_string(rep.cov.m)});
  sum.add({"cov_method", rep.cov.method == CovMethod::Glasso ? "glasso" : "sample"});
  sum.add({"lambda", format_double(rep.cov.method == CovMethod::Glasso ? rep.cov.lambda
                                                                        : std::numeric_limits<double>::quiet_NaN())});
  sum.add({"same_step_mse", format_double(rep.same_mse)});
  sum.add({"one_step_mse", format_double(rep.one_mse)});
  sum.add({"fit_seconds", format_double(rep.fit_seconds)});
  sum.add({"cov_seconds", format_double(rep.cov_seconds)});
  sum.add({"forecast_seconds", format_double(rep.forecast_seconds)});
  sum.add({"total_seconds", format_double(rep.total_seconds)});
  int nc = 0;
  for (const auto& f : rep.fits) nc += f.converged;
  sum.add({"fits_converged", std::to_string(nc) + "/" + std::to_string(rep.fits.size())});
  put(sum, "summary");

  if (rep.bic) {
    io::CsvTable bic{{"lambda", "bic", "fit", "edges", "ok"}, {}};
    for (const auto& r : rep.bic->table)
      bic.add({format_double(r.lambda), format_double(r.bic), format_double(r.fit), std::to_string(r.edges),
               r.ok ? "1" : "0"});
    put(bic, "bic");
  }
  return paths;
}

// ---------------------------------------------------------------- synthetic panel

struct SyntheticPanelOptions {
  Index d = 32;
  Index n = 379;
  Index q = 5;
  double missing_fraction = 0.05;
  std::uint64_t seed = 7;
};

/// Positive panel shaped like daily counts at d consecutive positions: an
/// AR(q) + local-level SUTSE model on the log scale with neighbour-correlated
/// observation noise, exponentiated, with independent missing cells.
inline io::NamedSeries synthetic_panel(const SyntheticPanelOptions& o = {}) {
  if (o.d < 1 || o.n < 2 || o.q < 1) throw InputError("synthetic_panel: need d >= 1, n >= 2, q >= 1");
  if (!(o.missing_fraction >= 0.0 && o.missing_fraction < 1.0))
    throw InputError("synthetic_panel: missing_fraction must be in [0, 1)");
  VectorXd phi = VectorXd::Zero(o.q);
  const double base[] = {0.35, 0.15, 0.0, 0.0, 0.1};
  for (Index i = 0; i < o.q && i < 5; ++i) phi(i) = base[i];
  SutseSpec s;
  for (Index j = 0; j < o.d; ++j) {
    SeriesBlock b = ar_local_level_block(phi, 1e-4, 0.02);
    b.a1(0) = std::log(15.0 + 10.0 * std::sin(3.14159265358979 * static_cast<double>(j + 1) / static_cast<double>(o.d)));
    s.blocks.push_back(b);
  }
  s.sigma_eps.resize(o.d, o.d);
  for (Index i = 0; i < o.d; ++i)
    for (Index k = 0; k < o.d; ++k) s.sigma_eps(i, k) = 0.03 * std::pow(0.7, static_cast<double>(std::abs(i - k)));
  ObservationSeries y = simulate(compose(s), o.n, o.seed);
  std::mt19937_64 rng(derive_seed(o.seed, 0x6d697373ULL));
  std::bernoulli_distribution drop(o.missing_fraction);
  MissingMask mask = MissingMask::Constant(o.n, o.d, false);
  for (Index t = 0; t < o.n; ++t)
    for (Index j = 0; j < o.d; ++j) mask(t, j) = drop(rng);
  for (Index j = 0; j < o.d; ++j) mask(0, j) = false;  // no column can end up empty
  MatrixXd values = y.values.array().exp().matrix();
  io::NamedSeries out;
  out.series = ObservationSeries(std::move(values), std::move(mask));
  for (Index j = 0; j < o.d; ++j) {
    std::ostringstream nm;
    nm << "pos" << std::setw(2) << std::setfill('0') << (j + 1);
    out.names.push_back(nm.str());
  }
  return out;
}

}  // namespace sutse
