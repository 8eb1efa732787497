#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "mpd/core/error.hpp"

namespace mpd::csv {

// RFC-4180 table: header plus string cells.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  }
  std::size_t require(std::string_view name) const {
    if (auto c = column(name)) return *c;
    throw SchemaError("missing required column '" + std::string(name) + "'");
  }
};

inline std::vector<std::vector<std::string>> parse_records(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false, field_started = false;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started && !field.empty()) throw ParseError("stray quote in unquoted field", records.size());
        quoted = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", records.size());
  if (field_started || !record.empty()) end_record();
  return records;
}

inline Table parse(std::string_view text) {
  auto records = parse_records(text);
  if (records.empty()) throw SchemaError("empty CSV: header row required");
  Table t;
  t.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != t.header.size())
      throw ParseError("expected " + std::to_string(t.header.size()) + " cells, found " +
                           std::to_string(records[r].size()),
                       r);
    t.rows.push_back(std::move(records[r]));
  }
  return t;
}

inline Table read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

inline double parse_double(std::string_view cell, std::size_t row) {
  double v = 0.0;
  auto first = cell.data();
  auto last = cell.data() + cell.size();
  if (!cell.empty() && cell.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || cell.empty())
    throw ParseError("non-numeric cell '" + std::string(cell) + "'", row);
  return v;
}

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string quote(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

// Streaming writer; every row ends with CRLF-free '\n'.
class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  Writer& row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << quote(cells[i]);
    }
    out_ << '\n';
    return *this;
  }

 private:
  std::ostream& out_;
};

inline std::string to_string(const Table& t) {
  std::ostringstream out;
  Writer w(out);
  w.row(t.header);
  for (const auto& r : t.rows) w.row(r);
  return out.str();
}

inline void write(const std::filesystem::path& path, const Table& t) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  Writer w(out);
  w.row(t.header);
  for (const auto& r : t.rows) w.row(r);
}

}  // namespace mpd::csv
