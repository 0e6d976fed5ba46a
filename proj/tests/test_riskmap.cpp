#include <gtest/gtest.h>

#include <sstream>

#include "pcrisk/riskmap.hpp"

using namespace pcrisk;

namespace {

Grid cells(std::size_t rows, std::size_t cols) {
  const double deg = 100 / kKmPerDegreeLat;
  return build_grid({0, static_cast<double>(rows) * deg, 0, static_cast<double>(cols) * deg * 1.00001}, 100);
}

std::string pgm_pixels(const RiskSurface& s) {
  std::ostringstream out;
  render_pgm(out, s);
  const auto str = out.str();
  const std::string header = fmt::format("P5\n{} {}\n255\n", s.grid.n_cols(), s.grid.n_rows());
  EXPECT_EQ(str.substr(0, header.size()), header);
  return str.substr(header.size());
}

}  // namespace

TEST(RiskColor, EndStops) {
  EXPECT_EQ(risk_color(0.0), "#1a9850");
  EXPECT_EQ(risk_color(1.0), "#d73027");
  EXPECT_EQ(risk_color(0.5), "#ffffbf");
  EXPECT_THROW(risk_color(1.2), Error);
}

TEST(GeoJson, SingleCellZeroRisk) {
  auto g = cells(1, 1);
  ASSERT_EQ(g.size(), 1u);
  auto s = RiskSurface::empty(g, {"RandomForest", 100, "2024-01-01T00:00:00Z"});
  s.set({0, 0}, 0.0);
  auto j = render_geojson(s);
  ASSERT_EQ(j["features"].size(), 1u);
  EXPECT_EQ(j["features"][0]["properties"]["color"], "#1a9850");
  EXPECT_EQ(j["metadata"]["model"], "RandomForest");
  s.set({0, 0}, 1.0);
  EXPECT_EQ(render_geojson(s)["features"][0]["properties"]["color"], "#d73027");
}

TEST(GeoJson, FourCellsInvertThroughCellOf) {
  auto g = cells(2, 2);
  ASSERT_EQ(g.size(), 4u);
  auto s = RiskSurface::empty(g);
  for (const auto& c : g.active_cells()) s.set(c, 0.25 * static_cast<double>(g.index(c)));
  auto j = render_geojson(s);
  ASSERT_EQ(j["features"].size(), 4u);
  for (const auto& f : j["features"]) {
    const auto& ring = f["geometry"]["coordinates"][0];
    ASSERT_EQ(ring.size(), 5u);
    EXPECT_EQ(ring[0], ring[4]);
    double lat = 0, lon = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      lon += ring[k][0].get<double>() / 4;
      lat += ring[k][1].get<double>() / 4;
    }
    const CellId c{f["properties"]["row"].get<std::size_t>(), f["properties"]["col"].get<std::size_t>()};
    EXPECT_EQ(g.cell_of(lat, lon), c);
    EXPECT_DOUBLE_EQ(f["properties"]["risk"].get<double>(), s.at(c));
  }
}

TEST(GeoJson, OutOfRangeRiskRejected) {
  auto g = cells(1, 2);
  auto s = RiskSurface::empty(g);
  s.set({0, 0}, 0.4);
  s.set({0, 1}, 1.5);
  try {
    render_geojson(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::validation);
  }
}

TEST(Pgm, AllZeroIsBlack) {
  auto g = cells(3, 4);
  auto s = RiskSurface::empty(g);
  for (const auto& c : g.active_cells()) s.set(c, 0);
  auto px = pgm_pixels(s);
  ASSERT_EQ(px.size(), 12u);
  for (char p : px) EXPECT_EQ(static_cast<unsigned char>(p), 0);
}

TEST(Pgm, SingleHotCellAndRounding) {
  auto g = cells(3, 4);
  auto s = RiskSurface::empty(g);
  for (const auto& c : g.active_cells()) s.set(c, 0);
  s.set({0, 2}, 1.0);
  auto px = pgm_pixels(s);
  std::size_t hot = 0;
  for (std::size_t i = 0; i < px.size(); ++i) {
    if (static_cast<unsigned char>(px[i]) == 255) {
      ++hot;
      EXPECT_EQ(i, 2 * 4 + 2u);  // row 0 is the southernmost, written last
    }
  }
  EXPECT_EQ(hot, 1u);
  EXPECT_EQ(risk_intensity(0.5), 128);
}

TEST(RiskCsv, OneLinePerActiveCell) {
  auto g = cells(2, 3);
  auto s = RiskSurface::empty(g);
  for (const auto& c : g.active_cells()) s.set(c, 0.5);
  std::ostringstream out;
  write_risk_csv(out, s);
  const auto str = out.str();
  EXPECT_EQ(std::count(str.begin(), str.end(), '\n'), 7);
  EXPECT_EQ(str.substr(0, 13), "row,col,risk\n");
}

TEST(RiskSurface, SetOutsideMaskThrows) {
  auto g = cells(2, 2);
  auto s = RiskSurface::empty(g);
  EXPECT_THROW(s.set({5, 0}, 0.1), Error);
}
