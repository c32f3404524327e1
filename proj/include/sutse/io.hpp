#pragma once

// CSV series and tables, and JSON model configs.
//
// Matrices in configs are {"rows": r, "cols": c, "data": [row-major values]};
// vectors are plain arrays. Doubles are written in shortest round-trip form,
// so a model survives write/read bit for bit.

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "sutse/error.hpp"
#include "sutse/linalg.hpp"
#include "sutse/state_space.hpp"
#include "sutse/sutse_builder.hpp"

namespace sutse::io {

using json = nlohmann::json;

/// Shortest decimal string that parses back to the same double.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "NA";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------- CSV

struct NamedSeries {
  ObservationSeries series;
  std::vector<std::string> names;

  /// Column index from a 1-based number or a column name.
  Index column(const std::string& key) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == key) return static_cast<Index>(i);
    Index k = 0;
    const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), k);
    if (ec == std::errc() && ptr == key.data() + key.size() && k >= 1 && k <= static_cast<Index>(names.size()))
      return k - 1;
    throw InputError("unknown column '" + key + "'");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* b = s.data();
  if (*b == '+') ++b;
  const auto [ptr, ec] = std::from_chars(b, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace detail

/// Header row of names, then one row per time step. Empty cells and "NA"
/// are missing.
inline NamedSeries read_series_csv(std::istream& in, const std::string& source = "<stream>") {
  NamedSeries ns;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!detail::trim(line).empty()) break;
  }
  if (detail::trim(line).empty()) throw InputError(source + ": empty CSV (no header row)");
  ns.names = detail::split_csv_line(line);
  const std::size_t d = ns.names.size();
  for (const auto& n : ns.names)
    if (n.empty()) throw InputError(source + ":" + std::to_string(lineno) + ": empty column name in header");

  std::vector<std::vector<double>> rows;
  std::vector<std::vector<bool>> miss;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != d)
      throw InputError(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(d) + " fields, found " +
                       std::to_string(cells.size()));
    std::vector<double> r(d, std::numeric_limits<double>::quiet_NaN());
    std::vector<bool> m(d, false);
    for (std::size_t j = 0; j < d; ++j) {
      if (cells[j].empty() || cells[j] == "NA") {
        m[j] = true;
      } else if (!detail::parse_double(cells[j], r[j])) {
        throw InputError(source + ":" + std::to_string(lineno) + ": cannot parse '" + cells[j] + "' in column '" +
                         ns.names[j] + "'");
      }
    }
    rows.push_back(std::move(r));
    miss.push_back(std::move(m));
  }
  const Index n = static_cast<Index>(rows.size());
  MatrixXd values(n, static_cast<Index>(d));
  MissingMask mask(n, static_cast<Index>(d));
  for (Index t = 0; t < n; ++t)
    for (Index j = 0; j < static_cast<Index>(d); ++j) {
      values(t, j) = rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)];
      mask(t, j) = miss[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)];
    }
  ns.series = ObservationSeries(std::move(values), std::move(mask));
  return ns;
}

inline NamedSeries read_series_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return read_series_csv(in, path);
}

inline void write_series_csv(std::ostream& out, const ObservationSeries& s, const std::vector<std::string>& names) {
  if (static_cast<Index>(names.size()) != s.d()) throw InputError("write_series_csv: one name per column required");
  for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
  out << '\n';
  for (Index t = 0; t < s.n(); ++t) {
    for (Index j = 0; j < s.d(); ++j) out << (j ? "," : "") << (s.missing(t, j) ? "NA" : format_double(s.values(t, j)));
    out << '\n';
  }
}

inline std::vector<std::string> default_names(Index d, const std::string& prefix = "y") {
  std::vector<std::string> names;
  for (Index j = 0; j < d; ++j) names.push_back(prefix + std::to_string(j + 1));
  return names;
}

/// A table with a fixed header; cells are preformatted strings.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) {
    if (row.size() != header.size()) throw InputError("CsvTable: row width does not match header");
    rows.push_back(std::move(row));
  }

  void write(std::ostream& out) const {
    for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
    out << '\n';
    for (const auto& r : rows) {
      for (std::size_t j = 0; j < r.size(); ++j) out << (j ? "," : "") << r[j];
      out << '\n';
    }
  }

  void write_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    write(out);
    if (!out) throw Error("write failed for '" + path + "'");
  }
};

// ---------------------------------------------------------------- JSON

inline json matrix_to_json(const MatrixXd& m) {
  json data = json::array();
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

inline json vector_to_json(const VectorXd& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline MatrixXd matrix_from_json(const json& j, const std::string& what) {
  try {
    if (j.is_array()) {  // nested rows
      const Index r = static_cast<Index>(j.size());
      const Index c = r ? static_cast<Index>(j.at(0).size()) : 0;
      MatrixXd m(r, c);
      for (Index i = 0; i < r; ++i) {
        if (static_cast<Index>(j.at(static_cast<std::size_t>(i)).size()) != c)
          throw InputError(what + ": ragged nested rows");
        for (Index k = 0; k < c; ++k) m(i, k) = j.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(k)).get<double>();
      }
      return m;
    }
    const Index r = j.at("rows").get<Index>(), c = j.at("cols").get<Index>();
    const auto& data = j.at("data");
    if (r < 0 || c < 0 || static_cast<Index>(data.size()) != r * c)
      throw InputError(what + ": data length does not equal rows*cols");
    MatrixXd m(r, c);
    for (Index i = 0; i < r; ++i)
      for (Index k = 0; k < c; ++k) m(i, k) = data.at(static_cast<std::size_t>(i * c + k)).get<double>();
    return m;
  } catch (const json::exception& e) {
    throw InputError(what + ": " + e.what());
  }
}

inline VectorXd vector_from_json(const json& j, const std::string& what) {
  try {
    if (j.is_object()) {
      const MatrixXd m = matrix_from_json(j, what);
      if (m.cols() != 1 && m.rows() != 1) throw InputError(what + ": expected a vector");
      return Eigen::Map<const VectorXd>(m.data(), m.size());
    }
    VectorXd v(static_cast<Index>(j.size()));
    for (Index i = 0; i < v.size(); ++i) v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
    return v;
  } catch (const json::exception& e) {
    throw InputError(what + ": " + e.what());
  }
}

inline json model_to_json(const StateSpaceModel& m) {
  return {{"type", "state_space_model"},
          {"Z", matrix_to_json(m.Z)},
          {"T", matrix_to_json(m.T)},
          {"sigma_eps", matrix_to_json(m.sigma_eps)},
          {"sigma_eta", matrix_to_json(m.sigma_eta)},
          {"a1", vector_to_json(m.a1)},
          {"P1", matrix_to_json(m.P1)}};
}

inline StateSpaceModel model_from_json(const json& j) {
  StateSpaceModel m;
  auto get = [&](const char* k) -> const json& {
    if (!j.contains(k)) throw InputError(std::string("model config: missing field '") + k + "'");
    return j.at(k);
  };
  m.Z = matrix_from_json(get("Z"), "Z");
  m.T = matrix_from_json(get("T"), "T");
  m.sigma_eps = matrix_from_json(get("sigma_eps"), "sigma_eps");
  m.sigma_eta = matrix_from_json(get("sigma_eta"), "sigma_eta");
  m.a1 = vector_from_json(get("a1"), "a1");
  m.P1 = matrix_from_json(get("P1"), "P1");
  m.validate();
  return m;
}

inline json block_to_json(const SeriesBlock& b) {
  return {{"Z", matrix_to_json(b.Z)},
          {"T", matrix_to_json(b.T)},
          {"Q", matrix_to_json(b.Q)},
          {"a1", vector_to_json(b.a1)},
          {"P1", matrix_to_json(b.P1)}};
}

/// A block is either explicit matrices or
/// {"ar": {"phi": [...], "q1": x, "q2": y}} with an optional
/// "prior": "zero" | "diffuse".
inline SeriesBlock block_from_json(const json& j, Index idx) {
  const std::string tag = "block " + std::to_string(idx + 1);
  SeriesBlock b;
  try {
    if (j.contains("ar")) {
      const auto& ar = j.at("ar");
      b = ar_local_level_block(vector_from_json(ar.at("phi"), tag + " phi"), ar.at("q1").get<double>(),
                               ar.at("q2").get<double>());
    } else {
      b.Z = matrix_from_json(j.at("Z"), tag + " Z");
      b.T = matrix_from_json(j.at("T"), tag + " T");
      b.Q = matrix_from_json(j.at("Q"), tag + " Q");
      b.a1 = j.contains("a1") ? vector_from_json(j.at("a1"), tag + " a1") : VectorXd::Zero(b.Z.cols());
      b.P1 = j.contains("P1") ? matrix_from_json(j.at("P1"), tag + " P1") : MatrixXd::Zero(b.Z.cols(), b.Z.cols());
    }
    if (j.contains("prior")) {
      const std::string prior = j.at("prior").get<std::string>();
      if (prior == "diffuse") {
        b.a1.setZero();
        b.P1 = kDiffuseKappa * MatrixXd::Identity(b.p(), b.p());
      } else if (prior != "zero") {
        throw InputError(tag + ": unknown prior '" + prior + "'");
      }
    }
  } catch (const json::exception& e) {
    throw InputError(tag + ": " + e.what());
  }
  b.validate(idx);
  return b;
}

inline json spec_to_json(const SutseSpec& s) {
  json blocks = json::array();
  for (const auto& b : s.blocks) blocks.push_back(block_to_json(b));
  return {{"type", "sutse_spec"}, {"sigma_eps", matrix_to_json(s.sigma_eps)}, {"blocks", blocks}};
}

/// Accepts a full spec or the shorthand {"type": "simulation", "d": 4,
/// "rho": 0.5} for the Monte Carlo design.
inline SutseSpec spec_from_json(const json& j) {
  try {
    const std::string type = j.value("type", "sutse_spec");
    if (type == "simulation") return simulation_model(j.at("d").get<Index>(), j.value("rho", 0.5));
    if (type != "sutse_spec") throw InputError("spec config: unsupported type '" + type + "'");
    SutseSpec s;
    const auto& blocks = j.at("blocks");
    for (std::size_t i = 0; i < blocks.size(); ++i) s.blocks.push_back(block_from_json(blocks[i], static_cast<Index>(i)));
    if (j.contains("sigma_eps")) {
      s.sigma_eps = matrix_from_json(j.at("sigma_eps"), "sigma_eps");
    } else {
      s.sigma_eps = MatrixXd::Identity(s.d(), s.d());
    }
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw InputError(std::string("spec config: ") + e.what());
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
  if (!out) throw Error("write failed for '" + path + "'");
}

/// A config holding either kind of model, composed to a StateSpaceModel.
inline StateSpaceModel any_model_from_json(const json& j) {
  const std::string type = j.value("type", j.contains("blocks") ? "sutse_spec" : "state_space_model");
  if (type == "state_space_model") return model_from_json(j);
  return compose(spec_from_json(j));
}

}  // namespace sutse::io
