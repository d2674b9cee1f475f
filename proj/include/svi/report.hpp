#pragma once

// Tabulated studies and their bit-stable serialization.

#include "svi/galerkin.hpp"
#include "svi/problem.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace svi {

using Json = nlohmann::ordered_json;

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return kInf;
  if (s == "-inf") return -kInf;
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::invalid_argument("parse_double: not a number: '" + s + "'");
  return v;
}

struct Verdict {
  std::string criterion;
  bool passed = false;
  std::string detail;

  friend bool operator==(const Verdict&, const Verdict&) = default;
};

struct ConvergenceReport {
  std::string study;
  std::vector<std::string> columns;  // columns[0] is the control parameter
  std::vector<std::vector<double>> rows;
  std::vector<Verdict> verdicts;
  Json fingerprint = Json::object();

  void add_row(std::vector<double> row) {
    require(row.size() == columns.size(), "report: row width differs from the column count");
    rows.push_back(std::move(row));
  }

  /// Ascending by control value; stable for ties.
  void sort_rows() {
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a[0] < b[0]; });
  }

  void add_verdict(std::string criterion, bool passed, std::string detail = {}) {
    verdicts.push_back({std::move(criterion), passed, std::move(detail)});
  }

  bool passed() const {
    return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.passed; });
  }

  std::size_t column(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw std::out_of_range("report: no column '" + name + "'");
    return static_cast<std::size_t>(it - columns.begin());
  }
};

inline std::string to_csv(const ConvergenceReport& r) {
  std::string out;
  for (std::size_t i = 0; i < r.columns.size(); ++i) {
    if (i) out += ',';
    out += r.columns[i];
  }
  out += '\n';
  for (const auto& row : r.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_double(row[i]);
    }
    out += '\n';
  }
  return out;
}

namespace detail {

inline Json number_or_string(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

inline double number_from_json(const Json& j) {
  if (j.is_string()) return parse_double(j.get<std::string>());
  return j.get<double>();
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace detail

inline Json to_json(const ConvergenceReport& r) {
  Json j;
  j["study"] = r.study;
  j["columns"] = r.columns;
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    Json jr = Json::array();
    for (double v : row) jr.push_back(detail::number_or_string(v));
    rows.push_back(std::move(jr));
  }
  j["rows"] = std::move(rows);
  Json verdicts = Json::array();
  for (const auto& v : r.verdicts) verdicts.push_back({{"criterion", v.criterion}, {"passed", v.passed}, {"detail", v.detail}});
  j["verdicts"] = std::move(verdicts);
  j["fingerprint"] = r.fingerprint;
  return j;
}

inline ConvergenceReport report_from_json(const Json& j) {
  ConvergenceReport r;
  r.study = j.at("study").get<std::string>();
  r.columns = j.at("columns").get<std::vector<std::string>>();
  for (const auto& jr : j.at("rows")) {
    std::vector<double> row;
    for (const auto& v : jr) row.push_back(detail::number_from_json(v));
    r.rows.push_back(std::move(row));
  }
  for (const auto& v : j.at("verdicts"))
    r.verdicts.push_back({v.at("criterion").get<std::string>(), v.at("passed").get<bool>(),
                          v.at("detail").get<std::string>()});
  if (j.contains("fingerprint")) r.fingerprint = j.at("fingerprint");
  return r;
}

/// Columns and rows only; verdicts live in the JSON form.
inline ConvergenceReport report_from_csv(const std::string& text) {
  ConvergenceReport r;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("report_from_csv: missing header");
  r.columns = detail::split(line, ',');
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = detail::split(line, ',');
    if (cells.size() != r.columns.size()) throw std::invalid_argument("report_from_csv: ragged row");
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(parse_double(c));
    r.rows.push_back(std::move(row));
  }
  return r;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
  out.close();
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

enum class ReportFormat { csv, json };

inline void write_report(const ConvergenceReport& r, const std::filesystem::path& path, ReportFormat format) {
  if (format == ReportFormat::csv) write_text(path, to_csv(r));
  else write_text(path, to_json(r).dump(2) + "\n");
}

/// t,x_1..x_n,eta_1..eta_n,njumps; history rows carry eta = 0.
inline std::string trajectory_csv(const SolutionPair& sol) {
  const Index n = sol.x.dimension();
  std::string out = "t";
  for (Index i = 1; i <= n; ++i) out += ",x_" + std::to_string(i);
  for (Index i = 1; i <= n; ++i) out += ",eta_" + std::to_string(i);
  out += ",njumps\n";
  for (std::size_t i = 0; i < sol.x.size(); ++i) {
    out += format_double(sol.x.time(i));
    const auto x = sol.x.node(i);
    for (Index c = 0; c < n; ++c) out += ',' + format_double(x(c));
    const bool on_grid = i + 1 >= sol.history_nodes;
    const std::size_t k = on_grid ? i + 1 - sol.history_nodes : 0;
    for (Index c = 0; c < n; ++c) out += ',' + format_double(on_grid ? sol.eta.node(k)(c) : 0.0);
    out += ',' + std::to_string(on_grid && k < sol.jump_counts.size() ? sol.jump_counts[k] : 0) + '\n';
  }
  return out;
}

/// Long-format field snapshots t,x,u on `points` uniform interior locations.
inline std::string snapshot_csv(const std::vector<galerkin::Snapshot>& snaps, int points) {
  std::string out = "t,x,u\n";
  for (const auto& s : snaps) {
    for (int j = 1; j <= points; ++j) {
      const double x = static_cast<double>(j) / (points + 1);
      out += format_double(s.t) + ',' + format_double(x) + ',' + format_double(galerkin::field_eval(s.modes, x)) + '\n';
    }
  }
  return out;
}

}  // namespace svi
