#pragma once

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "probtsf/core.hpp"
#include "probtsf/datagen.hpp"

namespace probtsf {

// Wide dataset CSV:
//
//   t,series_0,series_1,...
//   1,0.25,-1.5,...
//
// One row per time step, one column per series. Row numbers in diagnostics are
// 1-based file lines (the header is row 1); columns are 1-based.

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) cells.push_back(trim(cur));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline bool parse_real(const std::string& cell, double& out) {
  if (cell.empty()) return false;
  const char* begin = cell.c_str();
  char* end = nullptr;
  errno = 0;
  out = std::strtod(begin, &end);
  return end == begin + cell.size() && errno != ERANGE;
}

inline std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace detail

inline TrajectorySet parse_csv_dataset(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  std::size_t row = 0;
  const auto fail = [&](const std::string& msg) {
    throw DataError(source + ": row " + std::to_string(row) + ": " + msg);
  };

  if (!std::getline(in, line)) {
    row = 1;
    fail("missing header row");
  }
  row = 1;
  const std::vector<std::string> header = detail::split_csv_line(line);
  if (header.size() < 2) fail("header needs a time column and at least one series column");
  std::set<std::string> seen;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c].empty()) fail("column " + std::to_string(c + 1) + ": empty header");
    if (!seen.insert(header[c]).second) {
      fail("column " + std::to_string(c + 1) + ": duplicate header '" + header[c] + "'");
    }
  }

  TrajectorySet set;
  set.trajectories.resize(header.size() - 1);
  for (std::size_t s = 0; s < set.trajectories.size(); ++s) set.trajectories[s].id = s;

  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    const std::vector<std::string> cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      fail("expected " + std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      if (!detail::parse_real(cells[c], v) || !std::isfinite(v)) {
        fail("column " + std::to_string(c + 1) + " ('" + header[c] + "'): not a finite number: '" +
             cells[c] + "'");
      }
      if (c == 0) {
        set.time.push_back(v);
      } else {
        set.trajectories[c - 1].values.push_back(v);
      }
    }
  }
  if (set.time.empty()) {
    ++row;
    fail("no data rows");
  }
  return set;
}

inline TrajectorySet read_csv_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path + "'");
  return parse_csv_dataset(in, path);
}

// Column names of series in a dataset written by this library.
inline std::string series_name(std::size_t id) { return "series_" + std::to_string(id); }

inline void format_csv_dataset(std::ostream& out, const TrajectorySet& set) {
  for (const Trajectory& tr : set.trajectories) {
    require(tr.values.size() == set.time.size(), "write_csv_dataset: ragged trajectory set");
  }
  out << "t";
  for (const Trajectory& tr : set.trajectories) out << ',' << series_name(tr.id);
  out << '\n';
  for (std::size_t i = 0; i < set.time.size(); ++i) {
    out << detail::format_real(set.time[i]);
    for (const Trajectory& tr : set.trajectories) out << ',' << detail::format_real(tr.values[i]);
    out << '\n';
  }
}

inline void write_csv_dataset(const std::string& path, const TrajectorySet& set) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset '" + path + "'");
  format_csv_dataset(out, set);
  if (!out) throw std::runtime_error("error while writing dataset '" + path + "'");
}

}  // namespace probtsf
