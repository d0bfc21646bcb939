#pragma once

// Matrix serialization. CSV: one row per line, comma separated. JSON envelope:
// {"n": .., "zero_diagonal": .., "entries": [[..], ..]}. Doubles are written
// in shortest round-trip form so a write/read cycle is bit-exact.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "exspec/error.hpp"
#include "exspec/matrix.hpp"

namespace exspec {

inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline std::string to_csv(const SquareMatrix& m) {
  std::string out;
  for (Index i = 0; i < m.n(); ++i) {
    for (Index j = 0; j < m.n(); ++j) {
      if (j) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline double parse_double(std::string_view s, std::size_t line) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ParseError("not a number: '" + std::string(s) + "'", line);
  return x;
}

inline std::size_t line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

}  // namespace detail

/// Parses dense CSV. Blank lines are skipped; every row must have n entries.
inline SquareMatrix from_csv(std::string_view text, bool zero_diagonal = false) {
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> line_numbers;
  std::size_t line = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line;
    const auto t = detail::trim(raw);
    if (!t.empty()) {
      std::vector<double> row;
      std::size_t start = 0;
      for (;;) {
        const auto comma = t.find(',', start);
        row.push_back(detail::parse_double(t.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start), line));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
      }
      rows.push_back(std::move(row));
      line_numbers.push_back(line);
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  if (rows.empty()) throw ParseError("empty matrix file", 0);
  const auto n = rows.size();
  for (std::size_t i = 0; i < n; ++i)
    if (rows[i].size() != n)
      throw ParseError("row has " + std::to_string(rows[i].size()) + " entries, expected " +
                           std::to_string(n) + " (matrix must be square)",
                       line_numbers[i]);
  Matrix m(static_cast<Index>(n), static_cast<Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return SquareMatrix(std::move(m), zero_diagonal);
}

inline nlohmann::json to_json_envelope(const SquareMatrix& m) {
  nlohmann::json entries = nlohmann::json::array();
  for (Index i = 0; i < m.n(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index j = 0; j < m.n(); ++j) row.push_back(m(i, j));
    entries.push_back(std::move(row));
  }
  return {{"n", m.n()}, {"zero_diagonal", m.zero_diagonal()}, {"entries", std::move(entries)}};
}

inline SquareMatrix from_json_envelope(const nlohmann::json& j) {
  try {
    const auto n = j.at("n").get<Index>();
    const bool zd = j.value("zero_diagonal", false);
    const auto& entries = j.at("entries");
    if (!entries.is_array() || static_cast<Index>(entries.size()) != n)
      throw ParseError("'entries' must hold n = " + std::to_string(n) + " rows", 0);
    Matrix m(n, n);
    for (Index i = 0; i < n; ++i) {
      const auto& row = entries.at(static_cast<std::size_t>(i));
      if (!row.is_array() || static_cast<Index>(row.size()) != n)
        throw ParseError("row " + std::to_string(i + 1) + " must hold " + std::to_string(n) + " entries", 0);
      for (Index c = 0; c < n; ++c) m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
    return SquareMatrix(std::move(m), zd);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad matrix envelope: ") + e.what(), 0);
  }
}

inline std::string to_json_text(const SquareMatrix& m) { return to_json_envelope(m).dump() + "\n"; }

inline SquareMatrix from_json_text(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what(), detail::line_of_offset(text, e.byte ? e.byte - 1 : 0));
  }
  return from_json_envelope(j);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write to '" + path + "' failed");
}

inline bool has_suffix(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

/// Reads a .json envelope or (any other extension) dense CSV.
inline SquareMatrix read_matrix_file(const std::string& path) {
  const auto text = read_text_file(path);
  return has_suffix(path, ".json") ? from_json_text(text) : from_csv(text);
}

}  // namespace exspec
