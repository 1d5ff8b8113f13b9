#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "wps/core/error.hpp"

namespace wps {

// %.12g, the on-disk number format for every table.
inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  bool empty() const { return rows.empty(); }
  void add_row(std::vector<double> row) {
    require(row.size() == columns.size(), "Table: row width does not match header");
    rows.push_back(std::move(row));
  }
  std::vector<double> column(const std::string& name) const {
    for (std::size_t c = 0; c < columns.size(); ++c)
      if (columns[c] == name) {
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(r[c]);
        return out;
      }
    throw PreconditionError("Table: no column named " + name);
  }
};

inline void write_csv(std::ostream& os, const Table& t) {
  for (std::size_t c = 0; c < t.columns.size(); ++c) os << (c ? "," : "") << t.columns[c];
  os << '\n';
  for (const auto& r : t.rows) {
    for (std::size_t c = 0; c < r.size(); ++c) os << (c ? "," : "") << format_number(r[c]);
    os << '\n';
  }
}

inline void write_csv(const std::string& path, const Table& t) {
  std::ofstream os(path);
  require(static_cast<bool>(os), "write_csv: cannot open " + path);
  write_csv(os, t);
  require(static_cast<bool>(os), "write_csv: write failed for " + path);
}

inline Table read_csv(std::istream& is) {
  Table t;
  std::string line;
  if (!std::getline(is, line)) return t;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) t.columns.push_back(cell);
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    t.add_row(std::move(row));
  }
  return t;
}

inline Table read_csv(const std::string& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), "read_csv: cannot open " + path);
  return read_csv(is);
}

struct Check {
  std::string name;
  bool pass = false;
  double measured = 0;
  std::string criterion;
};

struct ExperimentRecord {
  std::string name;
  std::map<std::string, std::string> params;
  std::map<std::string, double> scalars;
  Table table;
  std::vector<Check> checks;
  std::vector<std::pair<std::string, std::string>> plots;  // (x column, y column) series of `table`

  void check(std::string check_name, bool ok, double measured, std::string criterion) {
    checks.push_back({std::move(check_name), ok, measured, std::move(criterion)});
  }
  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
  double scalar(const std::string& key) const {
    auto it = scalars.find(key);
    require(it != scalars.end(), "ExperimentRecord: no scalar named " + key);
    return it->second;
  }
};

}  // namespace wps
