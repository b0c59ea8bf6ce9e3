#pragma once

// Series CSV reading and writing plus the comment header every output file
// starts with.

#include "imnorm/core.hpp"
#include "imnorm/error_dists.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#ifndef IMNORM_VERSION
#define IMNORM_VERSION "0.1.0"
#endif

namespace imnorm {

inline constexpr std::string_view kVersion = IMNORM_VERSION;

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

}  // namespace detail

/// Parses a finite decimal number, throwing Parse on anything else.
inline double parse_double(std::string_view s, std::string_view what = "value") {
  s = detail::trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw Error(ErrorKind::Parse, "cannot read " + std::string(what) + " '" + std::string(s) + "' as a number");
  }
  return v;
}

inline std::vector<double> parse_double_list(std::string_view s, std::string_view what = "list") {
  std::vector<double> out;
  for (auto item : detail::split(s, ',')) out.push_back(parse_double(item, what));
  return out;
}

/// Lines of `# ...` written ahead of any CSV body.
struct OutputHeader {
  std::string command;
  std::vector<std::pair<std::string, std::string>> config;
  bool gld_note = true;

  [[nodiscard]] std::string str() const {
    std::string s = "# imnorm " + std::string(kVersion) + " " + command + "\n";
    for (const auto& [k, v] : config) s += "# " + k + "=" + v + "\n";
    if (gld_note) s += "# " + std::string(kGldNote) + "\n";
    return s;
  }
};

/// Reads a column of a CSV file. Lines starting with '#' and blank lines are
/// skipped; the first remaining line is the header.
inline std::vector<double> read_csv_column(const std::string& path, std::string_view column) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  std::string line;
  std::vector<std::string_view> header;
  std::string header_line;
  std::size_t col = 0;
  std::vector<double> values;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (header_line.empty()) {
      header_line = std::string(t);
      header = detail::split(header_line, ',');
      bool found = false;
      for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == column) {
          col = i;
          found = true;
        }
      }
      if (!found) throw Error(ErrorKind::Io, "'" + path + "' has no column '" + std::string(column) + "'");
      continue;
    }
    const auto cells = detail::split(t, ',');
    if (cells.size() != header.size()) {
      throw Error(ErrorKind::Parse, path + ":" + std::to_string(lineno) + ": expected " +
                                        std::to_string(header.size()) + " fields");
    }
    values.push_back(parse_double(cells[col], path + ":" + std::to_string(lineno)));
  }
  if (header_line.empty()) throw Error(ErrorKind::Parse, "'" + path + "' has no header line");
  return values;
}

/// Reads a series CSV with header `value` or `date,value`.
inline TimeSeries read_series_csv(const std::string& path) {
  return TimeSeries(read_csv_column(path, "value"), Ingested{path});
}

/// Shortest decimal form that reads back to the same double.
inline std::string format_value(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline void write_series_csv(std::ostream& out, std::span<const double> values, const OutputHeader& header) {
  out << header.str() << "value\n";
  for (double v : values) out << format_value(v) << '\n';
}

inline void write_series_csv(const std::string& path, std::span<const double> values, const OutputHeader& header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  write_series_csv(out, values, header);
  if (!out) throw Error(ErrorKind::Io, "write to '" + path + "' failed");
}

/// r_t = scale (log P_t - log P_{t-1}).
inline std::vector<double> log_returns(std::span<const double> prices, double scale = 100.0) {
  for (std::size_t i = 0; i < prices.size(); ++i) {
    if (!(prices[i] > 0.0)) {
      throw Error(ErrorKind::NonFiniteData, "price " + std::to_string(i + 1) + " is not positive");
    }
  }
  std::vector<double> r;
  if (prices.size() < 2) return r;
  r.reserve(prices.size() - 1);
  for (std::size_t i = 1; i < prices.size(); ++i) r.push_back(scale * (std::log(prices[i]) - std::log(prices[i - 1])));
  return r;
}

}  // namespace imnorm
