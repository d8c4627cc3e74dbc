#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>

#include "errors.hpp"
#include "linalg.hpp"

namespace eegsim {

/// Shortest text that parses back to the same double (17 significant digits).
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(std::string_view text, const std::string& where) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
    text.remove_suffix(1);
  double v = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (text.empty() || ec != std::errc{} || ptr != last)
    throw ParseError(where + ": cannot parse '" + std::string(text) + "' as a number");
  return v;
}

/// Header "rows cols", then one comma-separated line per row.
inline void write_matrix_csv(std::ostream& os, const Matrix& a) {
  os << a.rows() << ' ' << a.cols() << '\n';
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (j) os << ',';
      os << format_double(a(i, j));
    }
    os << '\n';
  }
}

inline void save_matrix_csv(const std::filesystem::path& path, const Matrix& a) {
  std::ofstream os(path);
  if (!os) throw ParseError("cannot open '" + path.string() + "' for writing");
  write_matrix_csv(os, a);
}

inline Matrix read_matrix_csv(std::istream& is, const std::string& name = "<stream>") {
  std::string line;
  if (!std::getline(is, line)) throw ParseError(name + ":1: missing header");
  std::istringstream header(line);
  long rows = -1, cols = -1;
  std::string extra;
  if (!(header >> rows >> cols) || (header >> extra) || rows < 0 || cols < 0)
    throw ParseError(name + ":1: header must be two non-negative integers");

  Matrix a(rows, cols);
  for (long i = 0; i < rows; ++i) {
    const std::string where = name + ":" + std::to_string(i + 2);
    if (!std::getline(is, line))
      throw DimensionMismatch(where + ": expected " + std::to_string(rows) + " rows");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (cols == 0) {
      if (!line.empty()) throw DimensionMismatch(where + ": expected an empty row");
      continue;
    }
    long j = 0;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      const auto cell = rest.substr(0, comma);
      if (j >= cols)
        throw DimensionMismatch(where + ": more than " + std::to_string(cols) + " values");
      a(i, j++) = parse_double(cell, where);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (j != cols)
      throw DimensionMismatch(where + ": " + std::to_string(j) + " values, expected " +
                              std::to_string(cols));
  }
  while (std::getline(is, line))
    if (line.find_first_not_of(" \t\r") != std::string::npos)
      throw DimensionMismatch(name + ": trailing data after " + std::to_string(rows) + " rows");
  return a;
}

inline Matrix load_leadfield(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open '" + path.string() + "'");
  return read_matrix_csv(is, path.string());
}

}  // namespace eegsim
