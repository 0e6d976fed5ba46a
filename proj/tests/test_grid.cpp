#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "oracles.hpp"
#include "pcrisk/grid.hpp"

using namespace pcrisk;

namespace {

// great-circle length of a meridian arc / parallel arc at the bbox centre
double haversine_km(double lat1, double lon1, double lat2, double lon2) {
  const double r = kEarthRadiusKm, k = std::numbers::pi / 180;
  const double dlat = (lat2 - lat1) * k, dlon = (lon2 - lon1) * k;
  const double a = std::pow(std::sin(dlat / 2), 2) +
                   std::cos(lat1 * k) * std::cos(lat2 * k) * std::pow(std::sin(dlon / 2), 2);
  return 2 * r * std::asin(std::sqrt(a));
}

std::set<std::pair<std::size_t, std::size_t>> as_set(const std::vector<CellId>& v) {
  std::set<std::pair<std::size_t, std::size_t>> out;
  for (const auto& c : v) out.insert({c.row, c.col});
  return out;
}

}  // namespace

TEST(BuildGrid, ThreeDegreeSquareAt100kmIs4x4) {
  const BBox b{0, 3, 0, 3};
  auto g = build_grid(b, 100);
  const double span = haversine_km(0, 0, 3, 0);
  EXPECT_NEAR(span, 333.6, 0.1);
  EXPECT_EQ(g.n_rows(), static_cast<std::size_t>(std::ceil(span / 100)));
  EXPECT_EQ(g.n_rows(), 4u);
  EXPECT_EQ(g.n_cols(), 4u);
}

TEST(BuildGrid, OneCellWide) {
  const double deg = 100 / kKmPerDegreeLat;
  auto g = build_grid({0, deg, 0, deg}, 100);
  EXPECT_EQ(g.n_rows(), 1u);
  EXPECT_EQ(g.n_cols(), 1u);
}

TEST(BuildGrid, HalvingCellDoublesCounts) {
  const BBox b{2, 13, 8, 16};
  auto g100 = build_grid(b, 100), g50 = build_grid(b, 50);
  EXPECT_LE(std::abs(static_cast<long>(g50.n_rows()) - 2 * static_cast<long>(g100.n_rows())), 1);
  EXPECT_LE(std::abs(static_cast<long>(g50.n_cols()) - 2 * static_cast<long>(g100.n_cols())), 1);
}

TEST(BuildGrid, DegenerateBboxRejected) {
  try {
    build_grid({1, 1, 0, 3}, 100);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invalid_input);
  }
  EXPECT_THROW(build_grid({0, 3, 0, 3}, 0), Error);
}

TEST(BuildGrid, MaskExcludesOutsideCells) {
  Polygon tri{{0, 0}, {0, 3}, {3, 0}};
  auto g = build_grid({0, 3, 0, 3}, 100, tri);
  EXPECT_LT(g.masked_count(), g.size());
  EXPECT_GT(g.masked_count(), 0u);
  for (const auto& c : g.active_cells()) {
    auto ctr = g.center(c);
    EXPECT_TRUE(point_in_polygon(tri, ctr.lat, ctr.lon));
  }
}

TEST(CellOf, OriginCorner) {
  auto g = build_grid({0, 3, 0, 3}, 100);
  EXPECT_EQ(g.cell_of(g.origin_lat(), g.origin_lon()), (CellId{0, 0}));
}

TEST(CellOf, BoundaryBelongsToHigherColumn) {
  auto g = build_grid({0, 3, 0, 3}, 100);
  const double lat = g.origin_lat() + 0.5 * g.cell_deg_lat();
  EXPECT_EQ(g.cell_of(lat, g.origin_lon() + g.cell_deg_lon()), (CellId{0, 1}));
}

TEST(CellOf, CentreOf4x4IsCell22) {
  auto g = build_grid({0, 3, 0, 3}, 100);
  EXPECT_EQ(g.cell_of(1.5, 1.5), (CellId{2, 2}));
}

TEST(CellOf, OutsideThrows) {
  auto g = build_grid({0, 3, 0, 3}, 100);
  try {
    (void)g.cell_of(10, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::out_of_bounds);
  }
}

TEST(CellOf, RoundTripsCellCentres) {
  auto g = build_grid({-4, 9, 12, 25}, 75);
  for (const auto& c : g.active_cells()) {
    auto p = g.center(c);
    EXPECT_EQ(g.cell_of(p.lat, p.lon), c);
  }
}

TEST(Neighbors, J1InteriorOf3x3) {
  auto g = build_grid({0, 3 * 100 / kKmPerDegreeLat, 0, 3 * 100 / kKmPerDegreeLat}, 100);
  ASSERT_EQ(g.n_rows(), 3u);
  ASSERT_EQ(g.n_cols(), 3u);
  std::set<std::pair<std::size_t, std::size_t>> want{{0, 1}, {2, 1}, {1, 0}, {1, 2}};
  EXPECT_EQ(as_set(g.neighbors({1, 1}, 1)), want);
}

TEST(Neighbors, J1CornerOf3x3) {
  auto g = build_grid({0, 3 * 100 / kKmPerDegreeLat, 0, 3 * 100 / kKmPerDegreeLat}, 100);
  std::set<std::pair<std::size_t, std::size_t>> want{{0, 1}, {1, 0}};
  EXPECT_EQ(as_set(g.neighbors({0, 0}, 1)), want);
}

TEST(Neighbors, J2In20x20IsEuclideanDisc) {
  const double deg = 20 * 100 / kKmPerDegreeLat;
  auto g = build_grid({0, deg, 0, deg}, 100);
  ASSERT_EQ(g.n_rows(), 20u);
  auto got = g.neighbors({5, 5}, 2);
  auto want = oracle::neighbors(20, g.n_cols(), 5, 5, 2);
  EXPECT_EQ(want.size(), 12u);  // 4 axial at 1, 4 diagonal at sqrt2, 4 axial at 2
  EXPECT_EQ(as_set(got), want);
}

TEST(Neighbors, MatchBruteForceNestedAndSymmetric) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    std::uniform_int_distribution<int> dim(1, 20);
    const double h = dim(rng) * 100 / kKmPerDegreeLat, w = dim(rng) * 100 / kKmPerDegreeLat;
    auto g = build_grid({0, h, 0, w}, 100);
    for (const auto& c : g.active_cells()) {
      std::set<std::pair<std::size_t, std::size_t>> prev;
      for (int j = 1; j <= 5; ++j) {
        auto got = as_set(g.neighbors(c, j));
        EXPECT_EQ(got, oracle::neighbors(g.n_rows(), g.n_cols(), c.row, c.col, j));
        EXPECT_TRUE(std::includes(got.begin(), got.end(), prev.begin(), prev.end()));
        EXPECT_EQ(got.count({c.row, c.col}), 0u);
        for (auto [r, k] : got) {
          auto back = as_set(g.neighbors({r, k}, j));
          EXPECT_EQ(back.count({c.row, c.col}), 1u);
        }
        prev = std::move(got);
      }
    }
  }
}

TEST(Neighbors, OutOfGridThrows) {
  auto g = build_grid({0, 3, 0, 3}, 100);
  try {
    (void)g.neighbors({9, 0}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::out_of_bounds);
  }
}

TEST(GridJson, RoundTrip) {
  Polygon tri{{0, 0}, {0, 3}, {3, 0}};
  auto g = build_grid({0, 3, 0, 3}, 50, tri);
  auto h = Grid::from_json(g.to_json());
  EXPECT_EQ(h.n_rows(), g.n_rows());
  EXPECT_EQ(h.n_cols(), g.n_cols());
  EXPECT_EQ(h.mask(), g.mask());
  EXPECT_DOUBLE_EQ(h.origin_lat(), g.origin_lat());
}
