#ifndef PCRISK_FEATURES_HPP
#define PCRISK_FEATURES_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "pcrisk/csv.hpp"
#include "pcrisk/date.hpp"
#include "pcrisk/error.hpp"
#include "pcrisk/grid.hpp"
#include "pcrisk/ingest.hpp"
#include "pcrisk/variables.hpp"

namespace pcrisk {

/// Ten equal-width bins over [min, max]. Bins are half-open except the last,
/// which is closed so the maximum lands in bin 10. A constant variable
/// (min == max) puts all mass in bin 1.
struct BinEdges {
  Variable variable = Variable::LAI;
  double min = 0;
  double max = 0;
  static constexpr std::size_t n_bins = kBins;

  [[nodiscard]] bool degenerate() const { return !(max > min); }
  [[nodiscard]] double width() const { return (max - min) / static_cast<double>(n_bins); }
  [[nodiscard]] double edge(std::size_t k) const {
    return k == n_bins ? max : min + width() * static_cast<double>(k);
  }

  /// Zero-based bin; out-of-range values clamp and set `clamped`.
  [[nodiscard]] std::size_t bin_of(double v, bool& clamped) const {
    clamped = v < min || v > max;
    if (degenerate() || v <= min) return 0;
    if (v >= max) return n_bins - 1;
    auto k = static_cast<std::size_t>(std::floor((v - min) / width()));
    return std::min(k, n_bins - 1);
  }

  friend bool operator==(const BinEdges&, const BinEdges&) = default;
};

using EdgeSet = std::array<BinEdges, kVariableCount>;

/// Dataset-wide min/max for one variable over all cells and timestamps.
inline BinEdges fit_bin_edges(Variable v, std::span<const CellSeries> series) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& s : series) {
    if (s.variable != v) continue;
    for (const auto& smp : s.samples) {
      if (!std::isfinite(smp.value)) continue;
      lo = std::min(lo, smp.value);
      hi = std::max(hi, smp.value);
    }
  }
  if (!(lo <= hi)) {
    throw Error(Errc::missing_variable, fmt::format("no samples for {}", variable_name(v)));
  }
  return {v, lo, hi};
}

inline EdgeSet fit_bin_edges(std::span<const CellSeries> series) {
  EdgeSet out;
  for (auto v : kAllVariables) out[index_of(v)] = fit_bin_edges(v, series);
  return out;
}

struct Histogram {
  std::array<double, kBins> mass{};
  std::size_t clamped = 0;
};

/// Fraction of the series' samples in each bin; all zero for an empty series.
inline Histogram histogram_features(const CellSeries& series, const BinEdges& edges) {
  if (series.variable != edges.variable) {
    throw Error(Errc::invalid_input, fmt::format("edges for {} applied to {}",
                                                 variable_name(edges.variable),
                                                 variable_name(series.variable)));
  }
  Histogram h;
  if (series.samples.empty()) return h;
  std::array<std::size_t, kBins> counts{};
  for (const auto& smp : series.samples) {
    bool clamped = false;
    ++counts[edges.bin_of(smp.value, clamped)];
    if (clamped) ++h.clamped;
  }
  const auto n = static_cast<double>(series.samples.size());
  for (std::size_t k = 0; k < kBins; ++k) h.mass[k] = static_cast<double>(counts[k]) / n;
  return h;
}

struct NeighborFeatures {
  std::array<bool, kNeighborRadii> presence{};
  std::array<std::int64_t, kNeighborRadii> count{};
};

/// For j = 1..5: total conflicts over Nbr(j, c) and whether it is non-zero.
/// `conflict_counts` is indexed by Grid::index.
inline NeighborFeatures neighbor_features(const Grid& grid, std::span<const std::int64_t> conflict_counts,
                                          const CellId& c) {
  if (conflict_counts.size() != grid.size()) {
    throw Error(Errc::invalid_input, "conflict_counts must cover every grid cell");
  }
  NeighborFeatures out;
  // Nbr(5, c) sorted by squared distance gives every smaller radius as a prefix sum.
  const auto ring = grid.neighbors(c, static_cast<int>(kNeighborRadii));
  std::array<std::int64_t, kNeighborRadii + 1> by_radius{};
  for (const auto& n : ring) {
    const long dr = static_cast<long>(n.row) - static_cast<long>(c.row);
    const long dc = static_cast<long>(n.col) - static_cast<long>(c.col);
    const double d = std::sqrt(static_cast<double>(dr * dr + dc * dc));
    // smallest integer radius j with d <= j
    auto j = static_cast<std::size_t>(std::ceil(d - 1e-12));
    by_radius[j] += conflict_counts[grid.index(n)];
  }
  std::int64_t running = 0;
  for (std::size_t j = 1; j <= kNeighborRadii; ++j) {
    running += by_radius[j];
    out.count[j - 1] = running;
    out.presence[j - 1] = running > 0;
  }
  return out;
}

struct FeatureRow {
  CellId cell;
  std::array<double, kHistogramFeatures> hist{};
  std::array<bool, kNeighborRadii> nbr_presence{};
  std::array<std::int64_t, kNeighborRadii> nbr_count{};
  int label = 0;

  [[nodiscard]] double feature(std::size_t f) const {
    if (f < kHistogramFeatures) return hist[f];
    if (is_presence_feature(f)) return nbr_presence[f - kHistogramFeatures] ? 1.0 : 0.0;
    if (is_count_feature(f)) {
      return static_cast<double>(nbr_count[f - kHistogramFeatures - kNeighborRadii]);
    }
    throw Error(Errc::out_of_bounds, fmt::format("feature index {}", f));
  }

  [[nodiscard]] std::array<double, kFeatureCount> vector() const {
    std::array<double, kFeatureCount> out{};
    for (std::size_t f = 0; f < kFeatureCount; ++f) out[f] = feature(f);
    return out;
  }

  friend bool operator==(const FeatureRow&, const FeatureRow&) = default;
};

struct Dataset {
  double cell_km = 0;
  EdgeSet edges{};
  std::vector<FeatureRow> rows;  // ordered by CellId

  [[nodiscard]] std::size_t positives() const {
    return static_cast<std::size_t>(
        std::count_if(rows.begin(), rows.end(), [](const FeatureRow& r) { return r.label == 1; }));
  }
};

struct AssembleResult {
  Dataset dataset;
  std::vector<SkipReport> skipped_events;  // line = index in the input event list
  std::size_t clamped_samples = 0;
};

/// Builds one FeatureRow per active grid cell. Series samples outside the
/// window are ignored; sub-monthly samples are collapsed to months first.
/// Label = 1 iff at least one event in the window falls in the cell; the same
/// counts drive the neighbourhood features. Cells are featurised on
/// `threads` workers with output ordered by CellId.
inline AssembleResult assemble_dataset(const Grid& grid, std::span<const CellSeries> series,
                                       std::span<const ConflictEvent> events, const DateWindow& window,
                                       unsigned threads = 1) {
  window.validate();
  AssembleResult result;
  result.dataset.cell_km = grid.cell_km();

  std::vector<CellSeries> monthly;
  monthly.reserve(series.size());
  for (const auto& s : series) {
    if (!grid.contains(s.cell)) {
      throw Error(Errc::out_of_bounds, "series for cell " + to_string(s.cell) + " outside grid");
    }
    CellSeries in_window{s.cell, s.variable, {}};
    for (const auto& smp : s.samples) {
      if (window.contains(smp.date)) in_window.samples.push_back(smp);
    }
    monthly.push_back(to_monthly(in_window));
  }
  result.dataset.edges = fit_bin_edges(monthly);

  std::vector<std::int64_t> counts(grid.size(), 0);
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& ev = events[i];
    if (!window.contains(ev.date)) {
      result.skipped_events.push_back({i, "event " + format_date(ev.date) + " outside window"});
      continue;
    }
    try {
      auto c = grid.cell_of(ev.lat, ev.lon);
      if (!grid.in_mask(c)) {
        result.skipped_events.push_back({i, "event in cell " + to_string(c) + " outside mask"});
        continue;
      }
      ++counts[grid.index(c)];
    } catch (const Error& e) {
      result.skipped_events.push_back({i, e.what()});
    }
  }

  // (cell index, variable) -> series
  std::vector<std::array<const CellSeries*, kVariableCount>> lookup(grid.size());
  for (const auto& s : monthly) lookup[grid.index(s.cell)][index_of(s.variable)] = &s;

  const auto cells = grid.active_cells();
  auto& rows = result.dataset.rows;
  rows.resize(cells.size());
  std::vector<std::size_t> clamped(cells.size(), 0);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& c = cells[i];
      FeatureRow& row = rows[i];
      row.cell = c;
      for (auto v : kAllVariables) {
        const CellSeries* s = lookup[grid.index(c)][index_of(v)];
        if (s == nullptr) continue;
        auto h = histogram_features(*s, result.dataset.edges[index_of(v)]);
        clamped[i] += h.clamped;
        std::copy(h.mass.begin(), h.mass.end(), row.hist.begin() + histogram_feature(v, 0));
      }
      auto nf = neighbor_features(grid, counts, c);
      row.nbr_presence = nf.presence;
      row.nbr_count = nf.count;
      row.label = counts[grid.index(c)] > 0 ? 1 : 0;
    }
  };
  const unsigned n_workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(cells.size())));
  if (n_workers == 1) {
    work(0, cells.size());
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (cells.size() + n_workers - 1) / n_workers;
    for (unsigned w = 0; w < n_workers; ++w) {
      std::size_t b = w * chunk;
      std::size_t e = std::min(cells.size(), b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
  }
  for (auto n : clamped) result.clamped_samples += n;
  return result;
}

// ---------------------------------------------------------------------------
// Serialization

inline void write_dataset_csv(std::ostream& out, const Dataset& ds) {
  out << "row,col,label";
  for (const auto& name : feature_names()) out << ',' << name;
  out << '\n';
  for (const auto& r : ds.rows) {
    out << r.cell.row << ',' << r.cell.col << ',' << r.label;
    for (double v : r.hist) out << ',' << csv::format_double(v);
    for (bool b : r.nbr_presence) out << ',' << (b ? 1 : 0);
    for (auto n : r.nbr_count) out << ',' << n;
    out << '\n';
  }
}

inline std::vector<FeatureRow> read_dataset_csv(std::istream& in) {
  csv::Reader reader(in);
  if (!reader.has_header()) throw Error(Errc::schema, "dataset CSV is empty");
  const auto i_row = reader.require("row");
  const auto i_col = reader.require("col");
  const auto i_label = reader.require("label");
  std::vector<std::size_t> cols;
  for (const auto& name : feature_names()) cols.push_back(reader.require(name));

  std::vector<FeatureRow> rows;
  csv::Record rec;
  while (reader.next(rec)) {
    if (rec.fields.size() != reader.header().size()) {
      throw Error(Errc::schema, fmt::format("line {}: {} fields, header has {}", rec.line,
                                            rec.fields.size(), reader.header().size()));
    }
    auto as_int = [&](std::size_t i) {
      auto v = csv::parse_int(rec.fields[i]);
      if (!v || *v < 0) {
        throw Error(Errc::invalid_input, fmt::format("line {}: bad integer '{}'", rec.line, rec.fields[i]));
      }
      return *v;
    };
    FeatureRow r;
    r.cell = {static_cast<std::size_t>(as_int(i_row)), static_cast<std::size_t>(as_int(i_col))};
    r.label = static_cast<int>(as_int(i_label));
    if (r.label > 1) throw Error(Errc::invalid_input, fmt::format("line {}: label not binary", rec.line));
    for (std::size_t f = 0; f < kHistogramFeatures; ++f) {
      auto v = csv::parse_double(rec.fields[cols[f]]);
      if (!v) throw Error(Errc::invalid_input, fmt::format("line {}: bad value", rec.line));
      r.hist[f] = *v;
    }
    for (std::size_t j = 0; j < kNeighborRadii; ++j) {
      r.nbr_presence[j] = as_int(cols[kHistogramFeatures + j]) != 0;
      r.nbr_count[j] = as_int(cols[kHistogramFeatures + kNeighborRadii + j]);
    }
    rows.push_back(r);
  }
  return rows;
}

inline nlohmann::json edges_to_json(const EdgeSet& edges) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& e : edges) {
    nlohmann::json bounds = nlohmann::json::array();
    for (std::size_t k = 0; k <= kBins; ++k) bounds.push_back(e.edge(k));
    j[std::string(variable_name(e.variable))] = {{"min", e.min}, {"max", e.max}, {"edges", bounds}};
  }
  return j;
}

inline EdgeSet edges_from_json(const nlohmann::json& j) {
  EdgeSet out;
  for (auto v : kAllVariables) {
    const auto& e = j.at(std::string(variable_name(v)));
    out[index_of(v)] = {v, e.at("min").get<double>(), e.at("max").get<double>()};
  }
  return out;
}

}  // namespace pcrisk

#endif  // PCRISK_FEATURES_HPP
