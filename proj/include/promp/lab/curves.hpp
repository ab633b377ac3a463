#pragma once

// Learning-curve files: comma-separated, header row, one row per iteration,
// every number written with 17 significant digits.

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "promp/meta_opt.hpp"
#include "promp/types.hpp"

namespace promp::lab {

inline constexpr const char* kCurveColumns = "iteration,pre_return,post_return,grad_norm,mean_kl";
inline constexpr const char* kDistanceColumn = "distance_to_optimum";

inline std::string format_sig17(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

/// Writes the curve table. The distance_to_optimum column is appended when
/// requested (1D runs with a known meta-optimum).
inline void write_curves(std::ostream& os, const std::vector<IterationRecord>& records,
                         bool with_distance = false) {
  os << kCurveColumns;
  if (with_distance) os << ',' << kDistanceColumn;
  os << '\n';
  for (const auto& r : records) {
    os << r.iteration << ',' << format_sig17(r.pre_return) << ',' << format_sig17(r.post_return) << ','
       << format_sig17(r.grad_norm) << ',' << format_sig17(r.mean_kl);
    if (with_distance) os << ',' << format_sig17(r.distance_to_optimum);
    os << '\n';
  }
}

inline void export_curves(const std::vector<IterationRecord>& records, const std::string& path,
                          bool with_distance = false) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open curve file for writing: " + path);
  write_curves(out, records, with_distance);
  out.flush();
  if (!out) throw Error("failed writing curve file: " + path);
}

struct CurveTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    throw Error("curve table has no column '" + name + "'");
  }
};

inline CurveTable parse_curves(std::istream& in) {
  CurveTable t;
  std::string line;
  if (!std::getline(in, line)) throw Error("curve file is empty (missing header)");
  {
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) t.columns.push_back(col);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
        throw Error("malformed curve cell '" + cell + "'");
      row.push_back(v);
    }
    if (row.size() != t.columns.size()) throw Error("curve row has the wrong number of cells");
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline CurveTable read_curves(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open curve file: " + path);
  return parse_curves(in);
}

}  // namespace promp::lab
