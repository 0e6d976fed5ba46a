#ifndef PCRISK_RISKMAP_HPP
#define PCRISK_RISKMAP_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "pcrisk/csv.hpp"
#include "pcrisk/error.hpp"
#include "pcrisk/grid.hpp"

namespace pcrisk {

struct RiskMetadata {
  std::string model;
  double cell_km = 0;
  std::string timestamp;
};

/// One probability per masked cell; unmasked cells hold NaN.
struct RiskSurface {
  Grid grid;
  std::vector<double> values;  // indexed by Grid::index
  RiskMetadata meta;

  static RiskSurface empty(const Grid& grid, RiskMetadata meta = {}) {
    return {grid, std::vector<double>(grid.size(), std::numeric_limits<double>::quiet_NaN()),
            std::move(meta)};
  }

  void set(const CellId& c, double risk) {
    if (!grid.contains(c) || !grid.in_mask(c)) {
      throw Error(Errc::out_of_bounds, "risk for a cell outside the mask " + to_string(c));
    }
    values[grid.index(c)] = risk;
  }

  [[nodiscard]] double at(const CellId& c) const { return values[grid.index(c)]; }

  void validate() const {
    if (values.size() != grid.size()) throw Error(Errc::validation, "risk surface size does not match grid");
    for (const auto& c : grid.active_cells()) {
      const double v = at(c);
      if (!(v >= 0 && v <= 1)) {
        throw Error(Errc::validation, fmt::format("risk {} at {} outside [0,1]", v, to_string(c)));
      }
    }
  }
};

inline constexpr std::array<std::uint32_t, 5> kColorStops = {0x1a9850, 0x91cf60, 0xffffbf, 0xfc8d59,
                                                            0xd73027};

/// Linear interpolation across the five stops, green (0) to red (1).
inline std::string risk_color(double risk) {
  if (!(risk >= 0 && risk <= 1)) throw Error(Errc::validation, fmt::format("risk {} outside [0,1]", risk));
  const double pos = risk * static_cast<double>(kColorStops.size() - 1);
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(pos), kColorStops.size() - 2);
  const double t = pos - static_cast<double>(k);
  auto channel = [&](int shift) {
    const double a = static_cast<double>((kColorStops[k] >> shift) & 0xff);
    const double b = static_cast<double>((kColorStops[k + 1] >> shift) & 0xff);
    return static_cast<unsigned>(std::lround(a + (b - a) * t));
  };
  return fmt::format("#{:02x}{:02x}{:02x}", channel(16), channel(8), channel(0));
}

inline std::uint8_t risk_intensity(double risk) {
  return static_cast<std::uint8_t>(std::lround(255.0 * risk));
}

inline nlohmann::json render_geojson(const RiskSurface& s) {
  s.validate();
  nlohmann::json features = nlohmann::json::array();
  for (const auto& c : s.grid.active_cells()) {
    const auto b = s.grid.bounds(c);
    const double risk = s.at(c);
    nlohmann::json ring = nlohmann::json::array({{b.west, b.south},
                                                 {b.east, b.south},
                                                 {b.east, b.north},
                                                 {b.west, b.north},
                                                 {b.west, b.south}});
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", "Polygon"}, {"coordinates", {ring}}}},
                        {"properties",
                         {{"row", c.row}, {"col", c.col}, {"risk", risk}, {"color", risk_color(risk)}}}});
  }
  return {{"type", "FeatureCollection"},
          {"metadata",
           {{"model", s.meta.model}, {"cell_km", s.meta.cell_km}, {"timestamp", s.meta.timestamp}}},
          {"features", features}};
}

/// Binary P5 graymap, one pixel per cell, first row northernmost. Cells
/// outside the mask are black.
inline void render_pgm(std::ostream& out, const RiskSurface& s) {
  s.validate();
  const auto& g = s.grid;
  out << "P5\n" << g.n_cols() << ' ' << g.n_rows() << "\n255\n";
  for (std::size_t r = g.n_rows(); r-- > 0;) {
    for (std::size_t col = 0; col < g.n_cols(); ++col) {
      const CellId c{r, col};
      const std::uint8_t px = g.in_mask(c) ? risk_intensity(s.at(c)) : 0;
      out.put(static_cast<char>(px));
    }
  }
}

/// Columns: row,col,risk
inline void write_risk_csv(std::ostream& out, const RiskSurface& s) {
  s.validate();
  out << "row,col,risk\n";
  for (const auto& c : s.grid.active_cells()) {
    out << c.row << ',' << c.col << ',' << csv::format_double(s.at(c)) << '\n';
  }
}

}  // namespace pcrisk

#endif  // PCRISK_RISKMAP_HPP
