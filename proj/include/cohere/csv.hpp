#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cohere/error.hpp"
#include "cohere/field_io.hpp"

namespace cohere {

/// Numeric table with one header line.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw DataError("CSV has no column '" + std::string(name) + "'");
  }
};

/// %.9g: nine significant digits.
inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string encode_csv(const CsvTable& table) {
  std::string out;
  for (std::size_t i = 0; i < table.header.size(); ++i) out += (i ? "," : "") + table.header[i];
  out += '\n';
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) throw ContractError("CSV row width does not match header");
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + format_number(row[i]);
    out += '\n';
  }
  return out;
}

inline void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  const std::string text = encode_csv(table);
  detail::write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) return cells;
    start = comma + 1;
  }
}

}  // namespace detail

/// Parses a numeric CSV. Errors name the 1-based line.
inline CsvTable parse_csv(std::string_view text, const std::string& source = "csv") {
  CsvTable table;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto cells = detail::split_commas(line);
    if (table.header.empty()) {
      for (auto c : cells) {
        if (c.empty()) throw DataError(source + ":" + std::to_string(line_no) + ": empty column name");
        table.header.emplace_back(c);
      }
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw DataError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(table.header.size()) +
                      " fields, got " + std::to_string(cells.size()));
    }
    std::vector<double> row;
    for (auto c : cells) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
      if (ec != std::errc() || ptr != c.data() + c.size()) {
        throw DataError(source + ":" + std::to_string(line_no) + ": not a number: '" + std::string(c) + "'");
      }
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) throw DataError(source + ": empty CSV");
  return table;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  return parse_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), path.string());
}

}  // namespace cohere
