#include <gtest/gtest.h>

#include <numeric>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace pcrisk;
using namespace pcrisk::ml;

namespace {

std::vector<int> labels_with(std::size_t n, std::size_t positives) {
  std::vector<int> y(n, 0);
  for (std::size_t i = 0; i < positives; ++i) y[i * (n / positives)] = 1;
  return y;
}

// Two Gaussian blobs in d dimensions, centres `gap` apart on every axis.
LabeledData blobs(std::size_t n, std::size_t d, double gap, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0, 1);
  LabeledData out{Matrix(n, d), Labels(n)};
  for (std::size_t i = 0; i < n; ++i) {
    out.y[i] = i % 3 == 0 ? 1 : 0;
    for (std::size_t j = 0; j < d; ++j) out.x(i, j) = noise(rng) + (out.y[i] ? gap : 0.0);
  }
  return out;
}

double rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

ClassifierSpec spec(ClassifierKind k, nlohmann::json hp = nlohmann::json::object(), std::uint64_t seed = 1) {
  return {k, std::move(hp), seed};
}

}  // namespace

// ---------------------------------------------------------------------------
// split

TEST(Split, StratifiedArithmetic) {
  auto y = labels_with(100, 10);
  auto s = stratified_split(y, 0.2, 5);
  ASSERT_EQ(s.test.size(), 20u);
  std::size_t pos = 0;
  for (auto i : s.test) pos += y[i];
  EXPECT_EQ(pos, 2u);
  EXPECT_EQ(s.train.size(), 80u);
  std::vector<std::size_t> all(s.train);
  all.insert(all.end(), s.test.begin(), s.test.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(all[i], i);
}

TEST(Split, SameSeedSameSplit) {
  auto y = labels_with(100, 10);
  auto a = stratified_split(y, 0.2, 5), b = stratified_split(y, 0.2, 5), c = stratified_split(y, 0.2, 6);
  EXPECT_EQ(a.test, b.test);
  EXPECT_EQ(a.train, b.train);
  EXPECT_NE(a.test, c.test);
}

TEST(Split, HalfOfFourRows) {
  std::vector<int> y{1, 0, 1, 0};
  auto s = stratified_split(y, 0.5, 1);
  ASSERT_EQ(s.test.size(), 2u);
  EXPECT_EQ(y[s.test[0]] + y[s.test[1]], 1);
  EXPECT_EQ(y[s.train[0]] + y[s.train[1]], 1);
}

TEST(Split, TinyClassCannotStratify) {
  std::vector<int> y{1, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  try {
    stratified_split(y, 0.2, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::stratification);
  }
}

// ---------------------------------------------------------------------------
// metrics

TEST(Metrics, CameroonBestRow) {
  Confusion c{5, 1, 10, 0};
  EXPECT_NEAR(c.precision(), 5.0 / 6, 1e-15);
  EXPECT_EQ(c.recall(), 1.0);
  EXPECT_NEAR(c.f1(), 10.0 / 11, 1e-15);
  EXPECT_EQ(fmt::format("{:.2f} {:.2f} {:.2f}", c.precision(), c.recall(), c.f1()), "0.83 1.00 0.91");
}

TEST(Metrics, ConfusionFromScoresAtThreshold) {
  std::vector<double> s{0.9, 0.5, 0.49, 0.1};
  std::vector<int> y{1, 0, 1, 0};
  auto c = confusion(s, y);
  EXPECT_EQ(c.tp, 1u);
  EXPECT_EQ(c.fp, 1u);
  EXPECT_EQ(c.fn, 1u);
  EXPECT_EQ(c.tn, 1u);
}

TEST(Metrics, F1MatchesCountFormulaExhaustively) {
  for (std::size_t tp = 0; tp <= 20; ++tp) {
    for (std::size_t fp = 0; tp + fp <= 20; ++fp) {
      for (std::size_t fn = 0; tp + fp + fn <= 20; ++fn) {
        Confusion c{tp, fp, 0, fn};
        const double want = tp == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
        EXPECT_NEAR(c.f1(), want, 1e-12);
      }
    }
  }
}

TEST(Metrics, AucEdgeCases) {
  std::vector<int> y{0, 0, 1, 1};
  EXPECT_EQ(roc_auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, y), 1.0);
  EXPECT_EQ(roc_auc(std::vector<double>{0.4, 0.4, 0.4, 0.4}, y), 0.5);
  std::vector<int> one{1, 1};
  auto m = metrics(std::vector<double>{0.7, 0.2}, one);
  EXPECT_FALSE(m.auc.has_value());
  EXPECT_EQ(m.recall, 0.5);
  EXPECT_THROW(roc_auc(std::vector<double>{0.7, 0.2}, one), Error);
}

TEST(Metrics, AucMatchesPairwiseAndIsRankInvariant) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> level(0, 9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(40);
    std::vector<int> y(40);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = level(rng) / 10.0;  // ties on purpose
      y[i] = static_cast<int>(i % 3 == 0);
    }
    const double auc = roc_auc(s, y);
    EXPECT_NEAR(auc, oracle::pairwise_auc(s, y), 1e-12);
    std::vector<double> t(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) t[i] = std::exp(3 * s[i]) - 7;
    EXPECT_NEAR(roc_auc(t, y), auc, 1e-12);
  }
}

// ---------------------------------------------------------------------------
// optimisation and gradients

TEST(GradientDescent, QuadraticConvergesMonotonically) {
  Objective f = [](const std::vector<double>& p, std::vector<double>* g) {
    if (g) *g = {2 * (p[0] - 3), 20 * (p[1] + 1)};
    return (p[0] - 3) * (p[0] - 3) + 10 * (p[1] + 1) * (p[1] + 1);
  };
  auto r = gradient_descent(f, {0, 0}, {1000, 1e-10});
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.params[0], 3, 1e-4);
  EXPECT_NEAR(r.params[1], -1, 1e-4);
  for (std::size_t i = 1; i < r.losses.size(); ++i) EXPECT_LE(r.losses[i], r.losses[i - 1]);
}

TEST(GradientDescent, NonFiniteLossThrows) {
  Objective f = [](const std::vector<double>&, std::vector<double>* g) {
    if (g) *g = {1};
    return std::numeric_limits<double>::quiet_NaN();
  };
  try {
    gradient_descent(f, {0}, {});
    FAIL();
  } catch (const NonConvergenceError& e) {
    EXPECT_EQ(e.code(), Errc::non_convergence);
  }
}

TEST(Gradients, LogisticMatchesFiniteDifferences) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> noise(0, 1);
  std::uniform_real_distribution<double> weight(0.2, 3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 8 + static_cast<std::size_t>(trial), d = 1 + static_cast<std::size_t>(trial % 6);
    auto data = blobs(n, d, 1.0, 100 + static_cast<std::uint64_t>(trial));
    std::vector<double> w(n);
    for (auto& v : w) v = weight(rng);
    const double l2 = trial % 2 ? 0.05 : 0.0;
    std::vector<double> p(d + 1);
    for (auto& v : p) v = noise(rng);
    std::vector<double> g(p.size());
    logistic_loss(p, data.x, data.y, w, l2, &g);
    auto fd = oracle::central_difference(
        [&](const std::vector<double>& q) { return logistic_loss(q, data.x, data.y, w, l2, nullptr); }, p);
    EXPECT_LE(rel_err(g, fd), 1e-4) << "trial " << trial;
  }
}

TEST(Gradients, MlpMatchesFiniteDifferences) {
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> weight(0.2, 3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 6 + static_cast<std::size_t>(trial % 7), d = 1 + static_cast<std::size_t>(trial % 4);
    auto data = blobs(n, d, 1.0, 200 + static_cast<std::uint64_t>(trial));
    MlpLayout layout{{d, 2 + static_cast<std::size_t>(trial % 3)}};
    if (trial % 2) layout.sizes.push_back(3);
    layout.sizes.push_back(1);
    std::vector<double> w(n);
    for (auto& v : w) v = weight(rng);
    auto p = mlp_init(layout, 300 + static_cast<std::uint64_t>(trial));
    std::normal_distribution<double> noise(0, 0.3);
    for (auto& v : p) v += noise(rng);  // non-zero biases too
    const double l2 = trial % 3 ? 0.01 : 0.0;
    std::vector<double> g(p.size());
    mlp_loss(layout, p, data.x, data.y, w, l2, &g);
    auto fd = oracle::central_difference(
        [&](const std::vector<double>& q) { return mlp_loss(layout, q, data.x, data.y, w, l2, nullptr); }, p);
    EXPECT_LE(rel_err(g, fd), 1e-4) << "trial " << trial;
  }
}

// ---------------------------------------------------------------------------
// models

TEST(Models, LogisticSeparableFitsTrainingSet) {
  auto x = Matrix::from_rows({{0, 0}, {1, 0}, {0, 1}, {1, 1}, {3, 3}, {4, 3}, {3, 4}, {4, 4}});
  std::vector<int> y{0, 0, 0, 0, 1, 1, 1, 1};
  auto m = train(spec(ClassifierKind::LogisticRegression), x, y);
  auto c = confusion(m.predict_proba(x), y);
  EXPECT_EQ(c.tp + c.tn, 8u);
  const auto& lr = std::get<LogisticModel>(m.impl());
  for (std::size_t i = 1; i < lr.losses.size(); ++i) EXPECT_LE(lr.losses[i], lr.losses[i - 1]);
}

TEST(Models, MlpLossNeverIncreases) {
  auto data = blobs(60, 3, 1.5, 9);
  for (auto k : {ClassifierKind::MLP, ClassifierKind::DeepNN}) {
    auto m = train(spec(k, {{"max_iter", 80}}), data.x, data.y);
    const auto& mlp = std::get<MlpModel>(m.impl());
    ASSERT_GT(mlp.losses.size(), 2u);
    for (std::size_t i = 1; i < mlp.losses.size(); ++i) EXPECT_LE(mlp.losses[i], mlp.losses[i - 1]);
  }
}

TEST(Models, GaussianNbMatchesClosedFormPosterior) {
  auto x = Matrix::from_rows({{1.0, 2.0}, {1.5, 1.0}, {0.5, 1.5}, {3.0, 4.0}, {3.5, 5.0}});
  std::vector<int> y{0, 0, 0, 1, 1};
  const double smoothing = 1e-3;
  auto m = train(spec(ClassifierKind::GaussianNB, {{"var_smoothing", smoothing}}), x, y);

  // largest per-feature population variance over all rows
  double max_var = 0;
  for (std::size_t j = 0; j < 2; ++j) {
    double mu = 0, v = 0;
    for (std::size_t i = 0; i < 5; ++i) mu += x(i, j) / 5;
    for (std::size_t i = 0; i < 5; ++i) v += (x(i, j) - mu) * (x(i, j) - mu) / 5;
    max_var = std::max(max_var, v);
  }
  auto density = [&](int cls, double a, double b) {
    double joint = cls ? 2.0 / 5 : 3.0 / 5;
    const double pt[2] = {a, b};
    for (std::size_t j = 0; j < 2; ++j) {
      double mu = 0, v = 0, n = 0;
      for (std::size_t i = 0; i < 5; ++i) {
        if (y[i] != cls) continue;
        mu += x(i, j);
        n += 1;
      }
      mu /= n;
      for (std::size_t i = 0; i < 5; ++i) {
        if (y[i] == cls) v += (x(i, j) - mu) * (x(i, j) - mu);
      }
      v = v / n + smoothing * max_var;
      joint *= std::exp(-(pt[j] - mu) * (pt[j] - mu) / (2 * v)) / std::sqrt(2 * std::numbers::pi * v);
    }
    return joint;
  };
  for (auto [a, b] : std::vector<std::pair<double, double>>{{1, 2}, {2, 2.5}, {2.6, 3.1}, {4, 4}}) {
    const double p1 = density(1, a, b), p0 = density(0, a, b);
    const std::vector<double> pt{a, b};
    EXPECT_NEAR(m.predict_proba(pt), p1 / (p0 + p1), 1e-9);
  }
}

TEST(Models, StumpMatchesExhaustiveSearch) {
  std::mt19937_64 rng(64);
  std::uniform_int_distribution<int> level(0, 8);
  std::uniform_real_distribution<double> weight(0.1, 2);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 5 + static_cast<std::size_t>(trial), d = 1 + static_cast<std::size_t>(trial % 4);
    oracle::Rows rows(n, std::vector<double>(d));
    std::vector<int> y(n);
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (auto& v : rows[i]) v = level(rng);
      y[i] = static_cast<int>(rng() % 2);
      w[i] = trial % 2 ? weight(rng) : 1.0;
    }
    auto got = best_stump(Matrix::from_rows(rows), y, w);
    auto want = oracle::best_stump(rows, y, w);
    if (!std::isfinite(want.error)) {  // every feature constant
      EXPECT_FALSE(std::isfinite(got.threshold));
      continue;
    }
    EXPECT_NEAR(got.error, want.error, 1e-9) << trial;
    EXPECT_EQ(got.feature, want.feature) << trial;
    EXPECT_DOUBLE_EQ(got.threshold, want.threshold) << trial;
  }
}

TEST(Models, AdaBoostFirstRoundIsBestUniformStump) {
  auto data = blobs(40, 3, 1.2, 21);
  auto m = train(spec(ClassifierKind::AdaBoost, {{"n_estimators", 5}}), data.x, data.y);
  const auto& ada = std::get<AdaBoostModel>(m.impl());
  ASSERT_FALSE(ada.stumps.empty());
  oracle::Rows rows;
  for (std::size_t i = 0; i < data.x.rows(); ++i) rows.emplace_back(data.x.row(i).begin(), data.x.row(i).end());
  auto want = oracle::best_stump(rows, data.y, std::vector<double>(40, 1.0 / 40));
  EXPECT_EQ(ada.stumps[0].feature, want.feature);
  EXPECT_DOUBLE_EQ(ada.stumps[0].threshold, want.threshold);
  const double e = want.error;
  EXPECT_NEAR(ada.alphas[0], std::log((1 - e) / e), 1e-9);
}

TEST(Models, SingleUnbaggedForestEqualsTree) {
  auto data = blobs(80, 4, 0.8, 17);
  nlohmann::json tree_hp{{"max_depth", 4}, {"min_leaf", 2}};
  nlohmann::json forest_hp{{"max_depth", 4}, {"min_leaf", 2}, {"n_trees", 1}, {"bootstrap", false}, {"max_features", 0}};
  auto dt = train(spec(ClassifierKind::DecisionTree, tree_hp, 3), data.x, data.y);
  auto rf = train(spec(ClassifierKind::RandomForest, forest_hp, 3), data.x, data.y);
  EXPECT_EQ(dt.predict_proba(data.x), rf.predict_proba(data.x));
  EXPECT_EQ(std::get<TreeModel>(dt.impl()).tree.to_json(), std::get<ForestModel>(rf.impl()).trees[0].to_json());
}

TEST(Models, DepthOneTreeIsStepFunction) {
  Matrix x(20, 1);
  std::vector<int> y(20);
  for (std::size_t i = 0; i < 20; ++i) {
    x(i, 0) = static_cast<double>(i);
    y[i] = i >= 10;
  }
  auto m = train(spec(ClassifierKind::DecisionTree, {{"max_depth", 1}}), x, y);
  std::vector<double> s;
  for (double v = -5; v <= 25; v += 0.25) s.push_back(m.predict_proba(std::vector<double>{v}));
  std::size_t changes = 0;
  for (std::size_t i = 1; i < s.size(); ++i) {
    EXPECT_GE(s[i], s[i - 1]);
    changes += s[i] != s[i - 1];
  }
  EXPECT_EQ(changes, 1u);
}

TEST(Models, AllKindsScoreInUnitIntervalAndRoundTrip) {
  auto data = blobs(60, 5, 1.0, 2);
  for (std::size_t i = 0; i < 5; ++i) data.x(59, i) = data.x(58, i);  // duplicate row
  for (auto k : kAllKinds) {
    auto s = spec(k, nlohmann::json::object(), 4);
    if (k == ClassifierKind::RandomForest) s.hyperparams = {{"n_trees", 10}};
    if (k == ClassifierKind::MLP || k == ClassifierKind::DeepNN) s.hyperparams = {{"max_iter", 40}};
    auto m = train(s, data.x, data.y);
    auto p = m.predict_proba(data.x);
    for (double v : p) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_EQ(p[58], p[59]) << kind_name(k);
    auto back = Model::from_json(nlohmann::json::parse(m.to_json().dump()));
    auto q = back.predict_proba(data.x);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(q[i], p[i], 1e-12) << kind_name(k);
    EXPECT_THROW((void)m.predict_proba(std::vector<double>{1, 2}), Error);
  }
}

TEST(Models, TrainingIsDeterministic) {
  auto data = blobs(50, 4, 1.0, 6);
  for (auto k : kAllKinds) {
    auto s = spec(k, nlohmann::json::object(), 11);
    if (k == ClassifierKind::RandomForest) s.hyperparams = {{"n_trees", 5}};
    if (k == ClassifierKind::MLP || k == ClassifierKind::DeepNN) s.hyperparams = {{"max_iter", 30}};
    EXPECT_EQ(train(s, data.x, data.y).to_json().dump(), train(s, data.x, data.y).to_json().dump())
        << kind_name(k);
  }
}

TEST(Models, InputValidation) {
  auto x = Matrix::from_rows({{1, 2}, {std::numeric_limits<double>::infinity(), 0}, {3, 1}});
  std::vector<int> y{0, 1, 1};
  try {
    train(spec(ClassifierKind::LogisticRegression), x, y);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invalid_input);
  }
  auto ok = Matrix::from_rows({{1, 2}, {2, 3}});
  EXPECT_THROW(train(spec(ClassifierKind::GaussianNB), ok, std::vector<int>{1, 1}), Error);
  EXPECT_THROW((void)spec(ClassifierKind::AdaBoost, {{"depth", 3}}).resolved(), Error);
  EXPECT_THROW((void)spec(ClassifierKind::MLP, {{"hidden", {4, 4}}}).resolved(), Error);
  EXPECT_THROW((void)spec(ClassifierKind::DeepNN, {{"hidden", {4}}}).resolved(), Error);
  EXPECT_THROW((void)spec(ClassifierKind::LinearSVM, {{"lambda", "big"}}).resolved(), Error);
}

// ---------------------------------------------------------------------------
// suite

TEST(Suite, CardinalityAndDeterminism) {
  auto data = blobs(120, 6, 1.0, 13);
  auto specs = default_specs(5);
  for (auto& s : specs) {
    if (s.kind == ClassifierKind::RandomForest) s.hyperparams = {{"n_trees", 20}};
    if (s.kind == ClassifierKind::MLP || s.kind == ClassifierKind::DeepNN) s.hyperparams = {{"max_iter", 50}};
  }
  auto a = run_suite(data, specs, {0.2, 5});
  auto b = run_suite(data, specs, {0.2, 5});
  ASSERT_EQ(a.rows.size(), 8u);
  std::ostringstream sa, sb;
  write_report_csv(sa, a);
  write_report_csv(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(a.rows[i].classifier, kind_name(kAllKinds[i]));
  EXPECT_EQ(a.n_test, 24u);
}

TEST(Suite, SeparableSyntheticCountryReachesHighF1) {
  auto g = fixture::synth_grid();
  auto cfg = fixture::planted_config();
  cfg.base_rate = 0;
  cfg.exposed_rate = 1.0;  // conflict exactly on the exposed cells
  auto ds = fixture::synth_dataset(19, g, cfg);
  auto report = run_suite(to_labeled(ds.rows), default_specs(19), {0.2, 19});
  EXPECT_GE(report.best().metrics.f1, 0.9) << report.best().classifier;
}
