#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace pcrisk;
using stats::ContingencyTable;

TEST(Welch, IdenticalSamples) {
  std::vector<double> x{1, 2, 3};
  auto r = stats::welch_t_test(x, x);
  EXPECT_EQ(r.diff, 0.0);
  EXPECT_EQ(r.p_raw, 1.0);
  EXPECT_LT(r.ci_low, 0.0);
  EXPECT_GT(r.ci_high, 0.0);
}

TEST(Welch, ShiftedByThree) {
  std::vector<double> x0{1, 2, 3}, x1{4, 5, 6};
  auto r = stats::welch_t_test(x0, x1);
  auto o = oracle::welch(x0, x1);
  EXPECT_DOUBLE_EQ(r.diff, 3.0);
  EXPECT_NEAR(r.t, 3.674, 5e-4);
  EXPECT_NEAR(r.df, 4.0, 1e-12);
  EXPECT_NEAR(r.p_raw, 0.0213, 5e-5);
  EXPECT_NEAR(r.p_raw, o.p, 1e-6);
  EXPECT_LT(r.ci_low, 3.0);
  EXPECT_GT(r.ci_low, 0.0);
}

TEST(Welch, MatchesQuadratureOracle) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> size(2, 12);
  std::normal_distribution<double> noise(0, 1);
  std::uniform_real_distribution<double> shift(-2, 2), spread(0.2, 3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x0(static_cast<std::size_t>(size(rng))), x1(static_cast<std::size_t>(size(rng)));
    const double s0 = spread(rng), s1 = spread(rng), mu = shift(rng);
    for (auto& v : x0) v = s0 * noise(rng);
    for (auto& v : x1) v = mu + s1 * noise(rng);
    auto r = stats::welch_t_test(x0, x1);
    auto o = oracle::welch(x0, x1);
    EXPECT_NEAR(r.t, o.t, 1e-9 * std::max(1.0, std::abs(o.t)));
    EXPECT_NEAR(r.df, o.df, 1e-9 * o.df);
    EXPECT_NEAR(r.p_raw, o.p, 1e-6) << "trial " << trial;
  }
}

TEST(Welch, TooFewSamples) {
  std::vector<double> one{1}, three{1, 2, 3};
  try {
    stats::welch_t_test(one, three);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::insufficient_data);
  }
}

TEST(Welch, ZeroVarianceBothClasses) {
  std::vector<double> a{2, 2, 2}, b{5, 5};
  auto same = stats::welch_t_test(a, a);
  EXPECT_TRUE(same.degenerate);
  EXPECT_EQ(same.p_raw, 1.0);
  auto diff = stats::welch_t_test(a, b);
  EXPECT_TRUE(diff.degenerate);
  EXPECT_EQ(diff.p_raw, 0.0);
}

TEST(Bonferroni, Cases) {
  EXPECT_NEAR(stats::bonferroni(0.001, 120), 0.12, 1e-15);
  EXPECT_EQ(stats::bonferroni(0.5, 120), 1.0);
  EXPECT_EQ(stats::bonferroni(0.0371, 1), 0.0371);
  EXPECT_THROW(stats::bonferroni(0.1, 0), Error);
  EXPECT_THROW(stats::bonferroni(1.5, 3), Error);
}

namespace {

std::vector<FeatureRow> two_class_rows(std::size_t n_per_class, double shift, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0, 1);
  std::vector<FeatureRow> rows;
  for (int cls : {0, 1}) {
    for (std::size_t i = 0; i < n_per_class; ++i) {
      FeatureRow r;
      r.label = cls;
      for (auto& h : r.hist) h = noise(rng);
      r.hist[histogram_feature(Variable::GRN, 2)] += cls * shift;
      r.hist[histogram_feature(Variable::LAI, 0)] = 0.25;  // identical across classes
      rows.push_back(r);
    }
  }
  return rows;
}

}  // namespace

TEST(RunUnivariate, ConstantFeatureHasZeroDiffAndPOne) {
  auto rows = two_class_rows(20, 0, 1);
  auto fam = stats::feature_family("histogram");
  auto res = stats::run_univariate(rows, fam);
  ASSERT_EQ(res.size(), 110u);
  EXPECT_EQ(res[0].variable, "LAI1");
  EXPECT_EQ(res[0].diff, 0.0);
  EXPECT_EQ(res[0].p_bonferroni, 1.0);
}

TEST(RunUnivariate, PlantedShiftDetectedAfterCorrection) {
  int hits = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto rows = two_class_rows(200, 3.0, seed);
    auto fam = stats::feature_family("histogram");
    auto res = stats::run_univariate(rows, fam);
    hits += res[histogram_feature(Variable::GRN, 2)].p_bonferroni < 0.05 ? 1 : 0;
  }
  EXPECT_EQ(hits, 20);
}

TEST(RunUnivariate, FamilySizeOverride) {
  auto rows = two_class_rows(30, 0.8, 3);
  std::vector<std::size_t> fam{histogram_feature(Variable::GRN, 2)};
  auto one = stats::run_univariate(rows, fam);
  auto many = stats::run_univariate(rows, fam, 120);
  EXPECT_NEAR(many[0].p_bonferroni, std::min(1.0, 120 * one[0].p_raw), 1e-15);
  EXPECT_EQ(one[0].p_bonferroni, one[0].p_raw);
}

TEST(RunUnivariate, SingleClassRejected) {
  auto rows = two_class_rows(5, 0, 1);
  for (auto& r : rows) r.label = 0;
  auto fam = stats::feature_family("all");
  try {
    stats::run_univariate(rows, fam);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::insufficient_data);
  }
}

TEST(Fisher, PublishedHyp3) {
  EXPECT_NEAR(std::log(stats::fisher_exact({11, 1, 2, 126}) / 1.36e-13), 0.0, std::log(2.0));
}

TEST(Fisher, BalancedTablesGiveOne) {
  EXPECT_NEAR(stats::fisher_exact({5, 5, 5, 5}), 1.0, 1e-12);
  EXPECT_NEAR(stats::fisher_exact({2, 1, 1, 2}), 1.0, 1e-12);
  EXPECT_NEAR(oracle::fisher_two_sided(2, 1, 1, 2), 1.0, 1e-15);
}

TEST(Fisher, MatchesEnumerationUpToTwelve) {
  int checked = 0;
  for (int n = 1; n <= 12; ++n) {
    for (int a = 0; a <= n; ++a) {
      for (int b = 0; a + b <= n; ++b) {
        for (int c = 0; a + b + c <= n; ++c) {
          const int d = n - a - b - c;
          const ContingencyTable t{a, b, c, d};
          if (a + b == 0 || c + d == 0 || a + c == 0 || b + d == 0) {
            EXPECT_THROW(stats::fisher_exact(t), Error);
            continue;
          }
          EXPECT_NEAR(stats::fisher_exact(t), oracle::fisher_two_sided(a, b, c, d), 1e-10)
              << a << ' ' << b << ' ' << c << ' ' << d;
          ++checked;
        }
      }
    }
  }
  EXPECT_GT(checked, 1000);
}

TEST(Fisher, ZeroMarginIsUndefined) {
  try {
    stats::fisher_exact({0, 0, 3, 4});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::undefined_test);
  }
}

TEST(OddsRatio, PublishedValues) {
  EXPECT_NEAR(stats::odds_ratio({11, 1, 2, 126}).value, 693, 1e-9);
  EXPECT_NEAR(stats::odds_ratio({14, 2, 24, 136}).value, 39.67, 0.01);
  EXPECT_DOUBLE_EQ(stats::odds_ratio({5, 5, 5, 5}).value, 1.0);
}

TEST(OddsRatio, HaldaneCorrectionOnZeroCell) {
  auto r = stats::odds_ratio({3, 0, 1, 4});
  EXPECT_TRUE(r.corrected);
  EXPECT_NEAR(r.value, (3.5 * 4.5) / (0.5 * 1.5), 1e-12);
}

TEST(OddsRatio, SwappingRowsInverts) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> cell(1, 40);
  for (int i = 0; i < 50; ++i) {
    ContingencyTable t{cell(rng), cell(rng), cell(rng), cell(rng)};
    ContingencyTable s{t.c, t.d, t.a, t.b};
    EXPECT_NEAR(stats::odds_ratio(t).value * stats::odds_ratio(s).value, 1.0, 1e-12);
    EXPECT_NEAR(stats::fisher_exact(t), stats::fisher_exact(s), 1e-12);
    auto ci = stats::woolf_ci(t);
    EXPECT_LE(ci.low, stats::odds_ratio(t).value);
    EXPECT_GE(ci.high, stats::odds_ratio(t).value);
  }
}

TEST(Woolf, PublishedIntervals) {
  auto h3 = stats::woolf_ci({11, 1, 2, 126});
  EXPECT_NEAR(h3.low / 58.13, 1.0, 0.015);
  EXPECT_NEAR(h3.high / 8261.12, 1.0, 0.015);
  auto h5 = stats::woolf_ci({8, 3, 30, 135});
  EXPECT_NEAR(h5.low, 3.0, 0.02);
  EXPECT_NEAR(h5.high, 47.9, 0.1);
}

TEST(Woolf, NullTableContainsOne) {
  auto ci = stats::woolf_ci({5, 5, 5, 5});
  EXPECT_LT(ci.low, 1.0);
  EXPECT_GT(ci.high, 1.0);
  EXPECT_NEAR(ci.low * ci.high, 1.0, 1e-12);
}
