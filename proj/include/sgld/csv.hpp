#pragma once

// Minimal RFC-4180 CSV support: UTF-8, header row, '.' decimal separator,
// CRLF-free ("\n") line endings, fields quoted only when they need to be.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace sgld {

/// Shortest round-trip representation, independent of the global locale.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("format_double failed");
  return {buf, ptr};
}

inline std::string csv_escape(std::string_view field) {
  const bool needs_quotes = field.find_first_of(",\"\r\n") != std::string_view::npos;
  if (!needs_quotes) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

using Cell = std::variant<std::string, double, long long>;

inline std::string to_field(const Cell& cell) {
  if (auto* s = std::get_if<std::string>(&cell)) return csv_escape(*s);
  if (auto* d = std::get_if<double>(&cell)) return format_double(*d);
  return std::to_string(std::get<long long>(cell));
}

/// In-memory table; experiments fill it in deterministic grid order and the
/// CLI serialises it once.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<Cell>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw std::out_of_range("no column named " + std::string(name));
  }

  double number(std::size_t row, std::string_view name) const {
    const Cell& c = rows.at(row).at(column(name));
    if (auto* d = std::get_if<double>(&c)) return *d;
    if (auto* i = std::get_if<long long>(&c)) return static_cast<double>(*i);
    throw std::invalid_argument("column " + std::string(name) + " is not numeric");
  }

  std::string text(std::size_t row, std::string_view name) const {
    return to_field(rows.at(row).at(column(name)));
  }
};

inline void write_csv(std::ostream& out, const Table& table) {
  for (std::size_t i = 0; i < table.header.size(); ++i)
    out << (i ? "," : "") << csv_escape(table.header[i]);
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << to_field(row[i]);
    out << '\n';
  }
}

inline std::string to_csv_string(const Table& table) {
  std::ostringstream os;
  write_csv(os, table);
  return os.str();
}

/// Splits one CSV record, honouring quoted fields with doubled quotes.
inline std::vector<std::string> parse_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

/// Reads a numeric CSV with a header row.
inline Table read_numeric_csv(std::istream& in) {
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV");
  t.header = parse_csv_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = parse_csv_line(line);
    if (fields.size() != t.header.size()) throw std::runtime_error("ragged CSV row");
    std::vector<Cell> row;
    for (const auto& f : fields) {
      double v{};
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc{} || ptr != f.data() + f.size())
        throw std::runtime_error("non-numeric CSV field: " + f);
      row.emplace_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace sgld
