#pragma once

// Small helpers shared by the CSV readers and writers.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tsr::csv {

/// Decimal text with 9 significant digits, the precision of every exported
/// table except the training log.
inline std::string g9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

/// Round-trip precision (17 significant digits).
inline std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// The value that survives a write/read cycle at 9 significant digits.
inline double quantize9(double v) { return std::stod(g9(v)); }

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double to_double(std::string_view s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const std::string tmp(s);
    const double v = std::stod(tmp, &used);
    if (used != tmp.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("line " + std::to_string(line_no) + ": bad number '" + std::string(s) + "'");
  }
}

inline int to_int(std::string_view s, std::size_t line_no) {
  const double v = to_double(s, line_no);
  const int i = static_cast<int>(v);
  if (static_cast<double>(i) != v) {
    throw std::runtime_error("line " + std::to_string(line_no) + ": expected an integer");
  }
  return i;
}

/// Reads a header line and checks it verbatim.
inline void expect_header(std::istream& is, std::string_view header) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty CSV input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) {
    throw std::runtime_error("unexpected CSV header '" + line + "', expected '" + std::string(header) + "'");
  }
}

inline std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream is(p);
  if (!is) throw std::runtime_error("cannot open " + p.string());
  return is;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

}  // namespace tsr::csv
