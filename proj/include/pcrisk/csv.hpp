#ifndef PCRISK_CSV_HPP
#define PCRISK_CSV_HPP

#include <charconv>
#include <cmath>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "pcrisk/error.hpp"

namespace pcrisk::csv {

struct Record {
  std::size_t line = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

/// RFC 4180 reader: quoted fields may hold commas, doubled quotes and newlines.
/// Returns false at end of input.
inline bool read_record(std::istream& in, Record& rec, std::size_t& line_no) {
  rec.fields.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  char ch;
  rec.line = line_no + 1;
  while (in.get(ch)) {
    any = true;
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++line_no;
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"') {
      in_quotes = true;
    } else if (ch == ',') {
      rec.fields.push_back(std::move(field));
      field.clear();
    } else if (ch == '\r') {
      // tolerated before '\n'
    } else if (ch == '\n') {
      ++line_no;
      rec.fields.push_back(std::move(field));
      return true;
    } else {
      field.push_back(ch);
    }
  }
  if (!any) return false;
  rec.fields.push_back(std::move(field));
  ++line_no;
  return true;
}

inline bool is_blank(const Record& rec) {
  return rec.fields.size() == 1 && rec.fields.front().empty();
}

/// Header plus column lookup.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {
    Record rec;
    while (read_record(in_, rec, line_)) {
      if (is_blank(rec)) continue;
      header_ = std::move(rec.fields);
      if (!header_.empty() && header_.front().rfind("\xEF\xBB\xBF", 0) == 0) {
        header_.front().erase(0, 3);  // UTF-8 BOM
      }
      has_header_ = true;
      break;
    }
  }

  [[nodiscard]] bool has_header() const { return has_header_; }
  [[nodiscard]] const std::vector<std::string>& header() const { return header_; }

  [[nodiscard]] std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < header_.size(); ++i) {
      if (header_[i] == name) return i;
    }
    return std::nullopt;
  }

  [[nodiscard]] std::size_t require(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw Error(Errc::schema, "missing column '" + std::string(name) + "'");
  }

  bool next(Record& rec) {
    while (read_record(in_, rec, line_)) {
      if (!is_blank(rec)) return true;
    }
    return false;
  }

 private:
  std::istream& in_;
  std::vector<std::string> header_;
  std::size_t line_ = 0;
  bool has_header_ = false;
};

inline std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<long long> parse_int(std::string_view s) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

/// Shortest representation that parses back to the same double.
inline std::string format_double(double v) { return fmt::format("{}", v); }

}  // namespace pcrisk::csv

#endif  // PCRISK_CSV_HPP
