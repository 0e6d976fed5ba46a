#ifndef PCRISK_INGEST_HPP
#define PCRISK_INGEST_HPP

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "pcrisk/csv.hpp"
#include "pcrisk/date.hpp"
#include "pcrisk/error.hpp"
#include "pcrisk/grid.hpp"
#include "pcrisk/variables.hpp"

namespace pcrisk {

struct ConflictEvent {
  Date date;
  double lat = 0;
  double lon = 0;
  std::string country;
  std::string notes;
  bool is_pastoral = false;

  friend bool operator==(const ConflictEvent&, const ConflictEvent&) = default;
};

/// Column names in an events CSV. Defaults follow ACLED export headers.
struct EventColumns {
  std::string date = "event_date";
  std::string lat = "latitude";
  std::string lon = "longitude";
  std::string country = "country";
  std::string notes = "notes";
};

struct SkipReport {
  std::size_t line = 0;
  std::string reason;
};

struct EventParseResult {
  std::vector<ConflictEvent> events;
  std::vector<SkipReport> skipped;
  std::vector<std::string> warnings;
};

inline EventParseResult parse_events(std::istream& in, const EventColumns& cols = {}) {
  EventParseResult out;
  csv::Reader reader(in);
  if (!reader.has_header()) {
    out.warnings.push_back("events file is empty");
    return out;
  }
  const auto i_date = reader.require(cols.date);
  const auto i_lat = reader.require(cols.lat);
  const auto i_lon = reader.require(cols.lon);
  const auto i_country = reader.require(cols.country);
  const auto i_notes = reader.require(cols.notes);
  const std::size_t width = std::max({i_date, i_lat, i_lon, i_country, i_notes}) + 1;

  csv::Record rec;
  while (reader.next(rec)) {
    if (rec.fields.size() < width) {
      out.skipped.push_back({rec.line, fmt::format("expected >= {} fields, got {}", width,
                                                   rec.fields.size())});
      continue;
    }
    auto lat = csv::parse_double(rec.fields[i_lat]);
    auto lon = csv::parse_double(rec.fields[i_lon]);
    if (!lat || !lon || std::abs(*lat) > 90 || std::abs(*lon) > 180) {
      out.skipped.push_back({rec.line, fmt::format("bad coordinates '{}', '{}'", rec.fields[i_lat],
                                                   rec.fields[i_lon])});
      continue;
    }
    ConflictEvent ev;
    try {
      ev.date = parse_date(rec.fields[i_date]);
    } catch (const Error& e) {
      out.skipped.push_back({rec.line, e.what()});
      continue;
    }
    ev.lat = *lat;
    ev.lon = *lon;
    ev.country = rec.fields[i_country];
    ev.notes = rec.fields[i_notes];
    out.events.push_back(std::move(ev));
  }
  if (out.events.empty() && out.skipped.empty()) out.warnings.push_back("events file has no rows");
  return out;
}

inline EventParseResult parse_events_file(const std::string& path, const EventColumns& cols = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path);
  return parse_events(in, cols);
}

inline void write_events(std::ostream& out, const std::vector<ConflictEvent>& events,
                         const EventColumns& cols = {}) {
  out << cols.date << ',' << cols.lat << ',' << cols.lon << ',' << cols.country << ','
      << cols.notes << '\n';
  for (const auto& ev : events) {
    out << format_date(ev.date) << ',' << csv::format_double(ev.lat) << ','
        << csv::format_double(ev.lon) << ',' << csv::escape(ev.country) << ','
        << csv::escape(ev.notes) << '\n';
  }
}

/// Include/exclude patterns over the free-text notes. Plain entries are
/// case-insensitive substrings; entries prefixed "re:" are case-insensitive
/// ECMAScript regular expressions.
class KeywordRules {
 public:
  struct Pattern {
    std::string source;
    bool is_regex = false;
    std::regex re;
    std::string needle;  // lowercased substring
  };

  KeywordRules(const std::vector<std::string>& include, const std::vector<std::string>& exclude) {
    for (const auto& s : include) include_.push_back(compile(s));
    for (const auto& s : exclude) exclude_.push_back(compile(s));
    if (include_.empty()) throw Error(Errc::invalid_input, "keyword rules need >= 1 include pattern");
  }

  static KeywordRules defaults() {
    return KeywordRules(
        {"herder", "pastoral", "transhuman", "cattle", "livestock", "grazing", "nomad", "fulani",
         "peul", "mbororo", "re:\\bcows?\\b"},
        {"peaceful protest"});
  }

  static KeywordRules from_json(const nlohmann::json& j) {
    try {
      return KeywordRules(j.at("include").get<std::vector<std::string>>(),
                          j.value("exclude", std::vector<std::string>{}));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::config, std::string("keyword rules: ") + e.what());
    }
  }

  static KeywordRules from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, "cannot open " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::config, path + ": " + e.what());
    }
    return from_json(j);
  }

  [[nodiscard]] bool matches(std::string_view notes) const {
    std::string lower = to_lower(notes);
    auto hit = [&](const Pattern& p) {
      if (p.is_regex) return std::regex_search(lower, p.re);
      return lower.find(p.needle) != std::string::npos;
    };
    return std::any_of(include_.begin(), include_.end(), hit) &&
           std::none_of(exclude_.begin(), exclude_.end(), hit);
  }

  [[nodiscard]] nlohmann::json to_json() const {
    auto sources = [](const std::vector<Pattern>& ps) {
      std::vector<std::string> out;
      for (const auto& p : ps) out.push_back(p.source);
      return out;
    };
    return {{"include", sources(include_)}, {"exclude", sources(exclude_)}};
  }

 private:
  static std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
  }

  static Pattern compile(const std::string& source) {
    Pattern p;
    p.source = source;
    if (source.rfind("re:", 0) == 0) {
      p.is_regex = true;
      try {
        p.re = std::regex(source.substr(3), std::regex::ECMAScript | std::regex::icase);
      } catch (const std::regex_error& e) {
        throw Error(Errc::config, "bad keyword regex '" + source + "': " + e.what());
      }
    } else {
      if (source.empty()) throw Error(Errc::config, "empty keyword pattern");
      p.needle = to_lower(source);
    }
    return p;
  }

  std::vector<Pattern> include_;
  std::vector<Pattern> exclude_;
};

/// Keeps events inside the window whose notes pass the rules, marked pastoral.
inline std::vector<ConflictEvent> filter_pastoral(const std::vector<ConflictEvent>& events,
                                                  const DateWindow& window,
                                                  const KeywordRules& rules) {
  window.validate();
  std::vector<ConflictEvent> out;
  for (const auto& ev : events) {
    if (!window.contains(ev.date) || !rules.matches(ev.notes)) continue;
    out.push_back(ev);
    out.back().is_pastoral = true;
  }
  return out;
}

/// Case-insensitive match on the country column; empty list keeps everything.
inline std::vector<ConflictEvent> filter_country(const std::vector<ConflictEvent>& events,
                                                 const std::vector<std::string>& countries) {
  if (countries.empty()) return events;
  auto eq = [](std::string_view a, std::string_view b) {
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(), [](unsigned char x, unsigned char y) {
             return std::tolower(x) == std::tolower(y);
           });
  };
  std::vector<ConflictEvent> out;
  for (const auto& ev : events) {
    for (const auto& c : countries) {
      if (eq(ev.country, c)) {
        out.push_back(ev);
        break;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Environmental series

struct Sample {
  Date date;
  double value = 0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct CellSeries {
  CellId cell;
  Variable variable = Variable::LAI;
  std::vector<Sample> samples;  // strictly increasing dates

  friend bool operator==(const CellSeries&, const CellSeries&) = default;
};

/// Reads one variable from a series CSV. Accepted layouts:
///   cell_row,cell_col[,variable],timestamp,value
///   lat,lon[,variable],timestamp,value      (mapped through grid.cell_of)
/// When a variable column exists, rows for other variables are ignored.
inline std::vector<CellSeries> parse_series(std::istream& in, Variable variable, const Grid& grid) {
  csv::Reader reader(in);
  if (!reader.has_header()) return {};
  const bool by_cell = reader.find("cell_row").has_value();
  std::size_t i_a = 0, i_b = 0;
  if (by_cell) {
    i_a = reader.require("cell_row");
    i_b = reader.require("cell_col");
  } else {
    if (!reader.find("lat")) {
      throw Error(Errc::schema, "series CSV needs cell_row/cell_col or lat/lon columns");
    }
    i_a = reader.require("lat");
    i_b = reader.require("lon");
  }
  const auto i_var = reader.find("variable");
  const auto i_ts = reader.require("timestamp");
  const auto i_val = reader.require("value");

  std::map<CellId, std::vector<Sample>> by;
  csv::Record rec;
  while (reader.next(rec)) {
    auto field = [&](std::size_t i) -> const std::string& {
      if (i >= rec.fields.size()) {
        throw Error(Errc::schema, fmt::format("line {}: too few fields", rec.line));
      }
      return rec.fields[i];
    };
    if (i_var && field(*i_var) != variable_name(variable)) continue;
    CellId cell;
    if (by_cell) {
      auto r = csv::parse_int(field(i_a));
      auto c = csv::parse_int(field(i_b));
      if (!r || !c || *r < 0 || *c < 0) {
        throw Error(Errc::invalid_input, fmt::format("line {}: bad cell index", rec.line));
      }
      cell = {static_cast<std::size_t>(*r), static_cast<std::size_t>(*c)};
      if (!grid.contains(cell)) {
        throw Error(Errc::out_of_bounds, fmt::format("line {}: cell {} outside grid", rec.line,
                                                     to_string(cell)));
      }
    } else {
      auto lat = csv::parse_double(field(i_a));
      auto lon = csv::parse_double(field(i_b));
      if (!lat || !lon) throw Error(Errc::invalid_input, fmt::format("line {}: bad lat/lon", rec.line));
      cell = grid.cell_of(*lat, *lon);
    }
    auto value = csv::parse_double(field(i_val));
    if (!value) {
      throw Error(Errc::invalid_input, fmt::format("line {}: non-finite value '{}'", rec.line,
                                                   field(i_val)));
    }
    by[cell].push_back({parse_date(field(i_ts)), *value});
  }

  std::vector<CellSeries> out;
  out.reserve(by.size());
  for (auto& [cell, samples] : by) {
    std::stable_sort(samples.begin(), samples.end(),
                     [](const Sample& a, const Sample& b) { return a.date < b.date; });
    for (std::size_t i = 1; i < samples.size(); ++i) {
      if (samples[i].date == samples[i - 1].date) {
        throw Error(Errc::duplicate_timestamp,
                    fmt::format("cell {} variable {} has two samples at {}", to_string(cell),
                                variable_name(variable), format_date(samples[i].date)));
      }
    }
    out.push_back({cell, variable, std::move(samples)});
  }
  return out;
}

inline std::vector<CellSeries> parse_series_file(const std::string& path, Variable variable,
                                                 const Grid& grid) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path);
  return parse_series(in, variable, grid);
}

/// Canonical layout; values use the shortest round-trip representation.
inline void write_series(std::ostream& out, const std::vector<CellSeries>& series) {
  out << "cell_row,cell_col,variable,timestamp,value\n";
  for (const auto& s : series) {
    for (const auto& smp : s.samples) {
      out << s.cell.row << ',' << s.cell.col << ',' << variable_name(s.variable) << ','
          << format_date(smp.date) << ',' << csv::format_double(smp.value) << '\n';
    }
  }
}

/// Collapses sub-monthly samples to one per calendar month (mean, or min/max
/// for the extreme-value variables). Monthly input passes through unchanged.
inline CellSeries to_monthly(const CellSeries& s) {
  CellSeries out{s.cell, s.variable, {}};
  const auto agg = monthly_aggregation(s.variable);
  std::size_t i = 0;
  while (i < s.samples.size()) {
    const Date month = first_of_month(s.samples[i].date);
    double acc = s.samples[i].value;
    std::size_t n = 1;
    std::size_t j = i + 1;
    for (; j < s.samples.size() && first_of_month(s.samples[j].date) == month; ++j, ++n) {
      double v = s.samples[j].value;
      switch (agg) {
        case MonthlyAggregation::mean: acc += v; break;
        case MonthlyAggregation::min: acc = std::min(acc, v); break;
        case MonthlyAggregation::max: acc = std::max(acc, v); break;
      }
    }
    if (agg == MonthlyAggregation::mean && n > 1) acc /= static_cast<double>(n);
    out.samples.push_back({month, acc});
    i = j;
  }
  return out;
}

}  // namespace pcrisk

#endif  // PCRISK_INGEST_HPP
