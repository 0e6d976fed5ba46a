#ifndef PCRISK_HYPOTHESES_HPP
#define PCRISK_HYPOTHESES_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "pcrisk/cart.hpp"
#include "pcrisk/csv.hpp"
#include "pcrisk/error.hpp"
#include "pcrisk/features.hpp"
#include "pcrisk/matrix.hpp"
#include "pcrisk/stats.hpp"
#include "pcrisk/variables.hpp"

namespace pcrisk::hypotheses {

enum class Comparator { greater, less_equal };

struct Condition {
  std::size_t feature = 0;
  std::string name;
  Comparator op = Comparator::greater;
  double threshold = 0;

  [[nodiscard]] bool holds(double v) const {
    return op == Comparator::greater ? v > threshold : v <= threshold;
  }

  [[nodiscard]] std::string to_string() const {
    return fmt::format("{} {} {}", name, op == Comparator::greater ? ">" : "<=", threshold);
  }

  friend bool operator==(const Condition&, const Condition&) = default;
};

/// Conjunction of threshold conditions; defines the set S.
struct HypothesisPredicate {
  std::vector<Condition> conditions;

  [[nodiscard]] bool matches(std::span<const double> x) const {
    for (const auto& c : conditions) {
      if (c.feature >= x.size()) {
        throw Error(Errc::invalid_input, fmt::format("predicate feature {} missing", c.name));
      }
      if (!c.holds(x[c.feature])) return false;
    }
    return true;
  }

  [[nodiscard]] std::string to_string() const {
    std::string out;
    for (const auto& c : conditions) {
      if (!out.empty()) out += " AND ";
      out += c.to_string();
    }
    return out.empty() ? "TRUE" : out;
  }

  [[nodiscard]] bool uses_feature(std::size_t f) const {
    return std::any_of(conditions.begin(), conditions.end(),
                       [f](const Condition& c) { return c.feature == f; });
  }

  [[nodiscard]] nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : conditions) {
      arr.push_back({{"feature", c.name},
                     {"index", c.feature},
                     {"op", c.op == Comparator::greater ? ">" : "<="},
                     {"threshold", c.threshold}});
    }
    return arr;
  }

  static HypothesisPredicate from_json(const nlohmann::json& j) {
    HypothesisPredicate p;
    for (const auto& jc : j) {
      Condition c;
      c.name = jc.at("feature").get<std::string>();
      if (jc.contains("index")) {
        c.feature = jc.at("index").get<std::size_t>();
      } else if (auto f = feature_index(c.name)) {
        c.feature = *f;
      } else {
        throw Error(Errc::invalid_input, "unknown feature '" + c.name + "'");
      }
      auto op = jc.at("op").get<std::string>();
      if (op == ">") {
        c.op = Comparator::greater;
      } else if (op == "<=") {
        c.op = Comparator::less_equal;
      } else {
        throw Error(Errc::invalid_input, "comparator must be '>' or '<='");
      }
      c.threshold = jc.at("threshold").get<double>();
      p.conditions.push_back(std::move(c));
    }
    if (p.conditions.empty()) throw Error(Errc::invalid_input, "empty predicate");
    return p;
  }

  friend bool operator==(const HypothesisPredicate&, const HypothesisPredicate&) = default;
};

inline Condition make_condition(std::string_view feature, Comparator op, double threshold) {
  auto f = feature_index(feature);
  if (!f) throw Error(Errc::invalid_input, fmt::format("unknown feature '{}'", feature));
  return {*f, std::string(feature), op, threshold};
}

/// A root-to-leaf path turned into a predicate, with the leaf's training counts.
struct ExtractedHypothesis {
  HypothesisPredicate predicate;
  std::size_t leaf = 0;
  std::size_t n_samples = 0;
  std::size_t n_class1 = 0;

  [[nodiscard]] double purity() const {
    return n_samples ? static_cast<double>(n_class1) / static_cast<double>(n_samples) : 0.0;
  }
};

namespace detail {

/// Collapses repeated conditions on one feature to the tightest interval
/// (largest '>' bound, smallest '<=' bound), keeping first-appearance order.
inline HypothesisPredicate merge_path(const std::vector<Condition>& path) {
  HypothesisPredicate out;
  for (const auto& c : path) {
    auto it = std::find_if(out.conditions.begin(), out.conditions.end(), [&](const Condition& e) {
      return e.feature == c.feature && e.op == c.op;
    });
    if (it == out.conditions.end()) {
      out.conditions.push_back(c);
    } else if (c.op == Comparator::greater) {
      it->threshold = std::max(it->threshold, c.threshold);
    } else {
      it->threshold = std::min(it->threshold, c.threshold);
    }
  }
  return out;
}

}  // namespace detail

/// Leaves with >= min_support rows and class-1 share >= min_purity, in
/// depth-first (left before right) order.
inline std::vector<ExtractedHypothesis> extract_paths(const DecisionTree& tree, std::size_t min_support,
                                                      double min_purity) {
  std::vector<ExtractedHypothesis> out;
  std::vector<Condition> path;
  const auto& nodes = tree.nodes();
  auto walk = [&](auto&& self, std::size_t id) -> void {
    const auto& n = nodes[id];
    if (n.leaf) {
      if (path.empty()) return;  // a single-leaf tree defines no set S
      ExtractedHypothesis h{detail::merge_path(path), id, n.n_samples, n.n_class1};
      if (h.n_samples >= min_support && h.purity() >= min_purity) out.push_back(std::move(h));
      return;
    }
    const auto name = tree.feature_name(n.feature);
    path.push_back({n.feature, name, Comparator::less_equal, n.threshold});
    self(self, n.left);
    path.back().op = Comparator::greater;
    self(self, n.right);
    path.pop_back();
  };
  walk(walk, 0);
  return out;
}

struct HypothesisEvaluation {
  stats::ContingencyTable table;
  stats::ExactTestResult test;
  double pct_s = 0;     // % of S with an attack
  double pct_sbar = 0;  // % of S-bar with an attack
};

inline HypothesisEvaluation evaluate_table(const stats::ContingencyTable& t) {
  if (t.size_s() == 0 || t.size_sbar() == 0) {
    throw Error(Errc::degenerate_partition,
                fmt::format("|S| = {}, |S-bar| = {}", t.size_s(), t.size_sbar()));
  }
  HypothesisEvaluation e;
  e.table = t;
  e.test = stats::exact_test(t);
  e.pct_s = 100.0 * static_cast<double>(t.a) / static_cast<double>(t.size_s());
  e.pct_sbar = 100.0 * static_cast<double>(t.c) / static_cast<double>(t.size_sbar());
  return e;
}

/// Splits rows into S (predicate holds) and S-bar, tabulates attacks, and runs
/// the odds ratio, Woolf interval and Fisher exact test.
inline HypothesisEvaluation evaluate_hypothesis(const HypothesisPredicate& pred, const Matrix& x,
                                                std::span<const int> y) {
  if (pred.conditions.empty()) throw Error(Errc::invalid_input, "empty predicate");
  if (y.size() != x.rows()) throw Error(Errc::invalid_input, "label count does not match rows");
  stats::ContingencyTable t;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const bool in_s = pred.matches(x.row(i));
    const bool attack = y[i] == 1;
    if (in_s) {
      (attack ? t.a : t.b) += 1;
    } else {
      (attack ? t.c : t.d) += 1;
    }
  }
  return evaluate_table(t);
}

inline HypothesisEvaluation evaluate_hypothesis(const HypothesisPredicate& pred,
                                                std::span<const FeatureRow> rows) {
  auto data = to_labeled(rows);
  return evaluate_hypothesis(pred, data.x, data.y);
}

// ---------------------------------------------------------------------------
// Published decision-tree hypotheses (100 km cells)

/// One row of the published exact-test table.
struct PublishedRow {
  std::int64_t count_s = 0;     // attacks in S
  double pct_s = 0;
  std::int64_t count_sbar = 0;  // attacks in S-bar
  double pct_sbar = 0;
  double odds_ratio = 0;
  double ci_low = 0;
  double ci_high = 0;
  double p = 0;
};

struct BuiltinHypothesis {
  std::string name;
  std::string country;
  HypothesisPredicate predicate;
  stats::ContingencyTable table;  // reconstructed from counts and percentages
  PublishedRow expected;
};

inline std::map<std::string, BuiltinHypothesis> builtin_hypotheses() {
  using C = Comparator;
  auto pred = [](std::initializer_list<Condition> cs) { return HypothesisPredicate{cs}; };
  auto gt = [](std::string_view f, double t) { return make_condition(f, C::greater, t); };
  auto le = [](std::string_view f, double t) { return make_condition(f, C::less_equal, t); };

  std::map<std::string, BuiltinHypothesis> out;
  auto add = [&](BuiltinHypothesis h) { out.emplace(h.name, std::move(h)); };
  add({"Hyp3", "Cameroon", pred({gt("NBRC1", 9.5), le("SSW4", 0.09)}), {11, 1, 2, 126},
       {11, 91.67, 2, 1.56, 693, 58.13, 8261.12, 1.36e-13}});
  add({"Hyp4", "CAR", pred({gt("NBRC1", 5.5), le("RH2M5", 0.059), le("SSW8", 0.274)}),
       {14, 2, 24, 136}, {14, 87.5, 24, 15, 39.67, 8.471, 185.74, 4.66e-9}});
  // Conditions (1) and (3) both bound NBRC1 from below; merged to the tighter one.
  add({"Hyp5", "CAR", pred({gt("NBRC1", 31.5), gt("RH2M5", 0.059)}), {8, 3, 30, 135},
       {8, 72.73, 30, 18.18, 12, 3.005, 47.92, 2.47e-4}});
  add({"Hyp6", "Chad", pred({gt("T2M_MIN8", 0.376), le("SSW8", 0.054)}), {5, 3, 22, 191},
       {5, 62.5, 22, 10.33, 14.47, 3.236, 64.71, 8.25e-4}});
  add({"Hyp7", "Chad", pred({gt("T2M_MIN8", 0.376), gt("SSW8", 0.054), gt("NBRC1", 15.5)}),
       {10, 4, 17, 190}, {10, 71.43, 17, 8.21, 27.94, 7.916, 98.63, 9.98e-8}});
  add({"Hyp8", "Chad",
       pred({gt("T2M_MIN8", 0.376), gt("SSW8", 0.054), le("NBRC1", 15.5), gt("SSW10", 0.038)}),
       {5, 2, 22, 192}, {5, 71.43, 22, 10.28, 21.82, 3.993, 119.21, 3.38e-4}});
  add({"Hyp9", "DRC", pred({gt("NBRC1", 4.5), le("WS10M_MIN3", 0.306), gt("T2M_MIN9", 0.027)}),
       {5, 1, 25, 475}, {5, 83.33, 25, 5, 95, 10.69, 844.08, 3.02e-6}});
  add({"Hyp10", "DRC", pred({gt("NBRC1", 4.5), gt("WS10M_MIN3", 0.306)}), {11, 3, 19, 473},
       {11, 78.57, 19, 3.86, 91.28, 23.51, 354.39, 1.43e-12}});
  return out;
}

namespace detail {

/// A feature value satisfying every condition the predicate places on `f`.
inline double witness(const HypothesisPredicate& pred, std::size_t f) {
  double lo = is_count_feature(f) ? -1.0 : 0.0;  // exclusive lower bound
  double hi = is_count_feature(f) ? 1e6 : 1.0;   // inclusive upper bound
  bool has_lo = false;
  for (const auto& c : pred.conditions) {
    if (c.feature != f) continue;
    if (c.op == Comparator::greater) {
      lo = std::max(lo, c.threshold);
      has_lo = true;
    } else {
      hi = std::min(hi, c.threshold);
    }
  }
  if (is_count_feature(f)) return has_lo ? std::floor(lo) + 1 : std::max(0.0, std::floor(hi));
  return has_lo ? (lo + hi) / 2 : hi / 2;
}

}  // namespace detail

/// Synthetic rows reproducing the published table: a rows in S with attack,
/// b in S without, c and d likewise in S-bar. S-bar rows violate the first
/// condition and satisfy the rest.
inline LabeledData golden_dataset(const BuiltinHypothesis& h) {
  const auto& t = h.table;
  const auto n = static_cast<std::size_t>(t.total());
  LabeledData out{Matrix(n, kFeatureCount), Labels(n)};
  std::vector<double> in_s(kFeatureCount, 0.0);
  for (const auto& c : h.predicate.conditions) in_s[c.feature] = detail::witness(h.predicate, c.feature);
  std::vector<double> out_s = in_s;
  const auto& first = h.predicate.conditions.front();
  out_s[first.feature] = first.op == Comparator::greater
                             ? (is_count_feature(first.feature) ? std::floor(first.threshold)
                                                                : first.threshold / 2)
                             : (is_count_feature(first.feature) ? std::floor(first.threshold) + 1
                                                                : (first.threshold + 1) / 2);
  std::size_t i = 0;
  auto emit = [&](std::int64_t count, const std::vector<double>& v, int label) {
    for (std::int64_t k = 0; k < count; ++k, ++i) {
      std::copy(v.begin(), v.end(), out.x.row(i).begin());
      out.y[i] = label;
    }
  };
  emit(t.a, in_s, 1);
  emit(t.b, in_s, 0);
  emit(t.c, out_s, 1);
  emit(t.d, out_s, 0);
  return out;
}

struct GoldenCheck {
  std::string name;
  HypothesisEvaluation result;
  bool or_ok = false;  // within 0.01
  bool ci_ok = false;  // both bounds within 1.5% relative
  bool p_ok = false;   // within a factor of 2
  [[nodiscard]] bool ok() const { return or_ok && ci_ok && p_ok; }
};

inline GoldenCheck check_golden(const BuiltinHypothesis& h) {
  auto data = golden_dataset(h);
  GoldenCheck g{h.name, evaluate_hypothesis(h.predicate, data.x, data.y)};
  const auto& r = g.result.test;
  const auto& e = h.expected;
  g.or_ok = std::abs(r.odds_ratio - e.odds_ratio) <= 0.01;
  g.ci_ok = std::abs(r.ci_low / e.ci_low - 1) <= 0.015 && std::abs(r.ci_high / e.ci_high - 1) <= 0.015;
  g.p_ok = std::abs(std::log(r.p / e.p)) <= std::log(2.0);
  return g;
}

/// Columns: Country,Hypothesis,Count S,% S,Count S̄,% S̄,Odds Ratio,95% CI lower,95% CI upper,P-value
struct ReportRow {
  std::string country;
  std::string hypothesis;
  std::optional<HypothesisEvaluation> eval;  // empty when the partition was degenerate
  std::string note;
};

inline void write_table_csv(std::ostream& out, std::span<const ReportRow> rows) {
  out << "Country,Hypothesis,Count S,% S,Count S\xCC\x84,% S\xCC\x84,Odds Ratio,95% CI lower,"
         "95% CI upper,P-value\n";
  for (const auto& r : rows) {
    out << csv::escape(r.country) << ',' << csv::escape(r.hypothesis) << ',';
    if (!r.eval) {
      out << ",,,,,,,\n";
      continue;
    }
    const auto& e = *r.eval;
    out << fmt::format("{},{:.2f},{},{:.2f},{:.2f},{:.6g},{:.6g},{:.2E}", e.table.a, e.pct_s,
                       e.table.c, e.pct_sbar, e.test.odds_ratio, e.test.ci_low, e.test.ci_high,
                       e.test.p)
        << '\n';
  }
}

}  // namespace pcrisk::hypotheses

#endif  // PCRISK_HYPOTHESES_HPP
