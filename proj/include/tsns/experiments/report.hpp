#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace tsns {

struct Verdict {
  std::string name;
  bool pass = false;
  bool hard = true;  // soft verdicts are findings and never fail a run
  std::string detail;
};

/// Tabular results plus named scalars and verdicts.  Everything except
/// runtime_seconds is deterministic and goes into the checksummed artifacts.
struct StatReport {
  std::string title;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<std::pair<std::string, double>> scalars;
  std::vector<Verdict> verdicts;
  std::vector<std::string> notes;
  std::uint64_t seed = 0;
  double runtime_seconds = 0.0;

  void add_row(std::vector<double> row) {
    if (!columns.empty() && row.size() != columns.size())
      throw std::invalid_argument("StatReport '" + title + "': row width mismatch");
    rows.push_back(std::move(row));
  }

  void set(const std::string& name, double value) {
    for (auto& [k, v] : scalars)
      if (k == name) {
        v = value;
        return;
      }
    scalars.emplace_back(name, value);
  }

  bool has(const std::string& name) const {
    for (const auto& [k, v] : scalars)
      if (k == name) return true;
    return false;
  }

  double get(const std::string& name) const {
    for (const auto& [k, v] : scalars)
      if (k == name) return v;
    throw std::out_of_range("StatReport '" + title + "': no scalar '" + name + "'");
  }

  Verdict& verdict(std::string name, bool pass, std::string detail = {}, bool hard = true) {
    verdicts.push_back({std::move(name), pass, hard, std::move(detail)});
    return verdicts.back();
  }

  const Verdict& find_verdict(const std::string& name) const {
    for (const auto& v : verdicts)
      if (v.name == name) return v;
    throw std::out_of_range("StatReport '" + title + "': no verdict '" + name + "'");
  }

  bool hard_pass() const {
    for (const auto& v : verdicts)
      if (v.hard && !v.pass) return false;
    return true;
  }

  /// Column table as CSV; numbers printed with round-trip precision.
  std::string to_csv() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
    os << '\n';
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format(row[i]);
      os << '\n';
    }
    return os.str();
  }

  nlohmann::ordered_json to_json(bool with_runtime = false) const {
    nlohmann::ordered_json j;
    j["title"] = title;
    j["seed"] = seed;
    auto& s = j["scalars"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : scalars) s[k] = std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(format(v));
    auto& vs = j["verdicts"] = nlohmann::ordered_json::array();
    for (const auto& v : verdicts) vs.push_back({{"name", v.name}, {"pass", v.pass}, {"hard", v.hard}, {"detail", v.detail}});
    j["notes"] = notes;
    j["columns"] = columns;
    j["rows"] = rows.size();
    if (with_runtime) j["runtime_seconds"] = runtime_seconds;
    return j;
  }

  static std::string format(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }
};

inline void write_text(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << content;
}

inline std::string read_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace tsns
