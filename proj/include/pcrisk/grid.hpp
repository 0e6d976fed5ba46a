#ifndef PCRISK_GRID_HPP
#define PCRISK_GRID_HPP

#include <cmath>
#include <compare>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "pcrisk/error.hpp"

namespace pcrisk {

inline constexpr double kEarthRadiusKm = 6371.0088;
inline constexpr double kKmPerDegreeLat = kEarthRadiusKm * std::numbers::pi / 180.0;

struct LatLon {
  double lat = 0;
  double lon = 0;
};

struct BBox {
  double lat_min = 0;
  double lat_max = 0;
  double lon_min = 0;
  double lon_max = 0;
};

struct CellId {
  std::size_t row = 0;
  std::size_t col = 0;

  friend auto operator<=>(const CellId&, const CellId&) = default;
};

inline std::string to_string(const CellId& c) { return fmt::format("({},{})", c.row, c.col); }

/// Closed ring of (lat, lon) vertices; the closing vertex may be omitted.
using Polygon = std::vector<LatLon>;

/// Even-odd ray casting in lon/lat space.
inline bool point_in_polygon(const Polygon& poly, double lat, double lon) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const auto& a = poly[i];
    const auto& b = poly[j];
    if ((a.lat > lat) != (b.lat > lat)) {
      double x = (b.lon - a.lon) * (lat - a.lat) / (b.lat - a.lat) + a.lon;
      if (lon < x) inside = !inside;
    }
  }
  return inside;
}

struct CellBounds {
  double south = 0;
  double north = 0;
  double west = 0;
  double east = 0;
};

/// Square-cell lattice over a bounding box. Cells are cell_km on a side under an
/// equirectangular projection anchored at the bbox centre; the lattice is
/// centred on the bbox so partial cells overhang evenly. Row 0 is the southern
/// edge, column 0 the western edge. Immutable once built.
class Grid {
 public:
  Grid() = default;

  [[nodiscard]] const BBox& bbox() const { return bbox_; }
  [[nodiscard]] double cell_km() const { return cell_km_; }
  [[nodiscard]] std::size_t n_rows() const { return n_rows_; }
  [[nodiscard]] std::size_t n_cols() const { return n_cols_; }
  [[nodiscard]] std::size_t size() const { return n_rows_ * n_cols_; }
  [[nodiscard]] double origin_lat() const { return origin_lat_; }
  [[nodiscard]] double origin_lon() const { return origin_lon_; }
  [[nodiscard]] double cell_deg_lat() const { return deg_lat_; }
  [[nodiscard]] double cell_deg_lon() const { return deg_lon_; }

  [[nodiscard]] bool contains(const CellId& c) const { return c.row < n_rows_ && c.col < n_cols_; }

  [[nodiscard]] std::size_t index(const CellId& c) const {
    check(c);
    return c.row * n_cols_ + c.col;
  }

  [[nodiscard]] CellId cell_at(std::size_t index) const {
    if (index >= size()) throw Error(Errc::out_of_bounds, fmt::format("cell index {}", index));
    return {index / n_cols_, index % n_cols_};
  }

  [[nodiscard]] bool in_mask(const CellId& c) const { return mask_[index(c)]; }
  [[nodiscard]] const std::vector<bool>& mask() const { return mask_; }

  [[nodiscard]] std::size_t masked_count() const {
    std::size_t n = 0;
    for (bool b : mask_) n += b ? 1 : 0;
    return n;
  }

  /// Cells inside the mask in row-major order.
  [[nodiscard]] std::vector<CellId> active_cells() const {
    std::vector<CellId> out;
    for (std::size_t i = 0; i < size(); ++i) {
      if (mask_[i]) out.push_back(cell_at(i));
    }
    return out;
  }

  [[nodiscard]] CellBounds bounds(const CellId& c) const {
    check(c);
    return {origin_lat_ + static_cast<double>(c.row) * deg_lat_,
            origin_lat_ + static_cast<double>(c.row + 1) * deg_lat_,
            origin_lon_ + static_cast<double>(c.col) * deg_lon_,
            origin_lon_ + static_cast<double>(c.col + 1) * deg_lon_};
  }

  [[nodiscard]] LatLon center(const CellId& c) const {
    auto b = bounds(c);
    return {(b.south + b.north) / 2, (b.west + b.east) / 2};
  }

  /// Containing cell, half-open: a point on a cell boundary belongs to the cell
  /// with the larger index. Accepts any point in the lattice extent.
  [[nodiscard]] CellId cell_of(double lat, double lon) const {
    if (!std::isfinite(lat) || !std::isfinite(lon)) {
      throw Error(Errc::out_of_bounds, "non-finite coordinate");
    }
    double u = (lat - origin_lat_) / deg_lat_;
    double v = (lon - origin_lon_) / deg_lon_;
    constexpr double kSnap = 1e-9;
    const double rows = static_cast<double>(n_rows_);
    const double cols = static_cast<double>(n_cols_);
    if (u < -kSnap || v < -kSnap || u > rows + kSnap || v > cols + kSnap) {
      throw Error(Errc::out_of_bounds, fmt::format("point ({}, {}) outside grid", lat, lon));
    }
    auto row = static_cast<std::size_t>(std::max(0.0, std::floor(u + kSnap)));
    auto col = static_cast<std::size_t>(std::max(0.0, std::floor(v + kSnap)));
    return {std::min(row, n_rows_ - 1), std::min(col, n_cols_ - 1)};
  }

  /// Nbr(j, c): cells c' != c with Euclidean lattice distance <= j, clipped.
  [[nodiscard]] std::vector<CellId> neighbors(const CellId& c, int j) const {
    check(c);
    if (j < 1) throw Error(Errc::invalid_input, fmt::format("neighbour radius {} < 1", j));
    std::vector<CellId> out;
    const long r0 = static_cast<long>(c.row);
    const long c0 = static_cast<long>(c.col);
    for (long dr = -j; dr <= j; ++dr) {
      for (long dc = -j; dc <= j; ++dc) {
        if ((dr == 0 && dc == 0) || dr * dr + dc * dc > static_cast<long>(j) * j) continue;
        long r = r0 + dr;
        long k = c0 + dc;
        if (r < 0 || k < 0 || r >= static_cast<long>(n_rows_) || k >= static_cast<long>(n_cols_)) {
          continue;
        }
        out.push_back({static_cast<std::size_t>(r), static_cast<std::size_t>(k)});
      }
    }
    return out;
  }

  [[nodiscard]] nlohmann::json to_json() const {
    std::string bits;
    bits.reserve(mask_.size());
    for (bool b : mask_) bits.push_back(b ? '1' : '0');
    return {{"bbox",
             {{"lat_min", bbox_.lat_min},
              {"lat_max", bbox_.lat_max},
              {"lon_min", bbox_.lon_min},
              {"lon_max", bbox_.lon_max}}},
            {"origin_lat", origin_lat_},
            {"origin_lon", origin_lon_},
            {"cell_km", cell_km_},
            {"cell_deg_lat", deg_lat_},
            {"cell_deg_lon", deg_lon_},
            {"n_rows", n_rows_},
            {"n_cols", n_cols_},
            {"mask", bits}};
  }

  static Grid from_json(const nlohmann::json& j) {
    Grid g;
    try {
      const auto& b = j.at("bbox");
      g.bbox_ = {b.at("lat_min").get<double>(), b.at("lat_max").get<double>(),
                 b.at("lon_min").get<double>(), b.at("lon_max").get<double>()};
      g.origin_lat_ = j.at("origin_lat").get<double>();
      g.origin_lon_ = j.at("origin_lon").get<double>();
      g.cell_km_ = j.at("cell_km").get<double>();
      g.deg_lat_ = j.at("cell_deg_lat").get<double>();
      g.deg_lon_ = j.at("cell_deg_lon").get<double>();
      g.n_rows_ = j.at("n_rows").get<std::size_t>();
      g.n_cols_ = j.at("n_cols").get<std::size_t>();
      auto bits = j.at("mask").get<std::string>();
      if (g.n_rows_ == 0 || g.n_cols_ == 0 || bits.size() != g.n_rows_ * g.n_cols_) {
        throw Error(Errc::invalid_input, "grid descriptor mask size mismatch");
      }
      g.mask_.reserve(bits.size());
      for (char ch : bits) g.mask_.push_back(ch == '1');
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::invalid_input, std::string("grid descriptor: ") + e.what());
    }
    return g;
  }

  friend Grid build_grid(const BBox& bbox, double cell_km, const std::optional<Polygon>& mask);

 private:
  void check(const CellId& c) const {
    if (!contains(c)) {
      throw Error(Errc::out_of_bounds, fmt::format("cell {} outside {}x{} grid", to_string(c),
                                                   n_rows_, n_cols_));
    }
  }

  BBox bbox_{};
  double cell_km_ = 0;
  double origin_lat_ = 0;
  double origin_lon_ = 0;
  double deg_lat_ = 0;
  double deg_lon_ = 0;
  std::size_t n_rows_ = 0;
  std::size_t n_cols_ = 0;
  std::vector<bool> mask_;
};

inline Grid build_grid(const BBox& bbox, double cell_km, const std::optional<Polygon>& mask = {}) {
  if (!(cell_km > 0) || !std::isfinite(cell_km)) {
    throw Error(Errc::invalid_input, fmt::format("cell_km must be positive, got {}", cell_km));
  }
  if (!(bbox.lat_max > bbox.lat_min) || !(bbox.lon_max > bbox.lon_min) || bbox.lat_min < -90 ||
      bbox.lat_max > 90) {
    throw Error(Errc::invalid_input, "degenerate bounding box");
  }
  if (mask && mask->size() < 3) throw Error(Errc::invalid_input, "mask polygon needs >= 3 vertices");

  const double center_lat = (bbox.lat_min + bbox.lat_max) / 2;
  const double center_lon = (bbox.lon_min + bbox.lon_max) / 2;
  const double km_per_deg_lon = kKmPerDegreeLat * std::cos(center_lat * std::numbers::pi / 180.0);
  if (!(km_per_deg_lon > 1e-6)) throw Error(Errc::invalid_input, "bbox centred on a pole");

  const double height_km = (bbox.lat_max - bbox.lat_min) * kKmPerDegreeLat;
  const double width_km = (bbox.lon_max - bbox.lon_min) * km_per_deg_lon;
  // Relative slack so a bbox of exactly k cells is not bumped to k+1.
  auto count = [cell_km](double span) {
    return static_cast<std::size_t>(std::max(1.0, std::ceil(span / cell_km * (1 - 1e-9))));
  };

  Grid g;
  g.bbox_ = bbox;
  g.cell_km_ = cell_km;
  g.n_rows_ = count(height_km);
  g.n_cols_ = count(width_km);
  g.deg_lat_ = cell_km / kKmPerDegreeLat;
  g.deg_lon_ = cell_km / km_per_deg_lon;
  g.origin_lat_ = center_lat - static_cast<double>(g.n_rows_) / 2 * g.deg_lat_;
  g.origin_lon_ = center_lon - static_cast<double>(g.n_cols_) / 2 * g.deg_lon_;
  g.mask_.assign(g.size(), true);
  if (mask) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      auto c = g.center(g.cell_at(i));
      g.mask_[i] = point_in_polygon(*mask, c.lat, c.lon);
    }
  }
  return g;
}

/// Reads the first ring of a GeoJSON Polygon (bare geometry, Feature, or a
/// FeatureCollection's first feature). Coordinates are [lon, lat].
inline Polygon polygon_from_geojson(const nlohmann::json& j) {
  const nlohmann::json* geom = &j;
  if (j.value("type", "") == "FeatureCollection") {
    if (j.at("features").empty()) throw Error(Errc::invalid_input, "empty FeatureCollection");
    geom = &j.at("features").at(0).at("geometry");
  } else if (j.value("type", "") == "Feature") {
    geom = &j.at("geometry");
  }
  if (geom->value("type", "") != "Polygon") {
    throw Error(Errc::invalid_input, "mask must be a GeoJSON Polygon");
  }
  Polygon poly;
  for (const auto& pt : geom->at("coordinates").at(0)) {
    poly.push_back({pt.at(1).get<double>(), pt.at(0).get<double>()});
  }
  return poly;
}

}  // namespace pcrisk

#endif  // PCRISK_GRID_HPP
