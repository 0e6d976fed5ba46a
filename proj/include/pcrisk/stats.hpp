#ifndef PCRISK_STATS_HPP
#define PCRISK_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "pcrisk/error.hpp"
#include "pcrisk/features.hpp"
#include "pcrisk/variables.hpp"

namespace pcrisk::stats {

// ---------------------------------------------------------------------------
// Univariate class-difference tests

struct MeanDiffResult {
  std::string variable;
  double diff = 0;       // mean(class 1) - mean(class 0)
  double ci_low = 0;
  double ci_high = 0;
  double t = 0;
  double df = 0;         // Welch-Satterthwaite
  double p_raw = 1;
  double p_bonferroni = 1;
  bool degenerate = false;  // both classes had zero variance
};

namespace detail {

struct Moments {
  double mean = 0;
  double var = 0;  // unbiased
  double n = 0;
};

inline Moments moments(std::span<const double> x) {
  Moments m;
  m.n = static_cast<double>(x.size());
  for (double v : x) m.mean += v;
  m.mean /= m.n;
  for (double v : x) m.var += (v - m.mean) * (v - m.mean);
  m.var /= m.n - 1;
  return m;
}

}  // namespace detail

/// Two-sided Welch t-test of mean(x1) - mean(x0) with a 95% (1 - alpha) CI.
inline MeanDiffResult welch_t_test(std::span<const double> x0, std::span<const double> x1,
                                   double alpha = 0.05) {
  if (x0.size() < 2 || x1.size() < 2) {
    throw Error(Errc::insufficient_data,
                fmt::format("welch t-test needs >= 2 samples per class, got {} and {}", x0.size(),
                            x1.size()));
  }
  const auto m0 = detail::moments(x0);
  const auto m1 = detail::moments(x1);
  MeanDiffResult r;
  r.diff = m1.mean - m0.mean;
  const double a = m0.var / m0.n;
  const double b = m1.var / m1.n;
  const double se2 = a + b;
  if (!(se2 > 0)) {
    r.degenerate = true;
    r.df = m0.n + m1.n - 2;
    r.ci_low = r.ci_high = r.diff;
    r.t = r.diff == 0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), r.diff);
    r.p_raw = r.diff == 0 ? 1.0 : 0.0;
    r.p_bonferroni = r.p_raw;
    return r;
  }
  const double se = std::sqrt(se2);
  r.t = r.diff / se;
  r.df = se2 * se2 / (a * a / (m0.n - 1) + b * b / (m1.n - 1));
  boost::math::students_t_distribution<double> dist(r.df);
  r.p_raw = std::min(1.0, 2 * boost::math::cdf(dist, -std::abs(r.t)));
  const double q = boost::math::quantile(dist, 1 - alpha / 2);
  r.ci_low = r.diff - q * se;
  r.ci_high = r.diff + q * se;
  r.p_bonferroni = r.p_raw;
  return r;
}

inline double bonferroni(double p, std::size_t m) {
  if (!(p >= 0 && p <= 1)) throw Error(Errc::invalid_input, fmt::format("p-value {} outside [0,1]", p));
  if (m < 1) throw Error(Errc::invalid_input, "bonferroni family size must be >= 1");
  return std::min(1.0, static_cast<double>(m) * p);
}

/// Named feature families for the univariate battery.
inline std::vector<std::size_t> feature_family(const std::string& name) {
  std::vector<std::size_t> out;
  if (name == "all") {
    for (std::size_t f = 0; f < kFeatureCount; ++f) out.push_back(f);
  } else if (name == "histogram") {
    for (std::size_t f = 0; f < kHistogramFeatures; ++f) out.push_back(f);
  } else if (name == "weather" || name == "terrain") {
    const bool weather = name == "weather";
    for (std::size_t f = 0; f < kHistogramFeatures; ++f) {
      if (is_weather(*feature_variable(f)) == weather) out.push_back(f);
    }
  } else if (auto v = parse_variable(name)) {
    for (std::size_t b = 0; b < kBins; ++b) out.push_back(histogram_feature(*v, b));
  } else {
    throw Error(Errc::invalid_input, "unknown feature family '" + name + "'");
  }
  return out;
}

/// Class 1 vs class 0 Welch test per feature, Bonferroni-corrected with
/// family size `m` (defaults to the number of features tested). Rows come back
/// in feature-dictionary order.
inline std::vector<MeanDiffResult> run_univariate(std::span<const FeatureRow> rows,
                                                  std::span<const std::size_t> family,
                                                  std::size_t m = 0) {
  std::size_t n1 = 0;
  for (const auto& r : rows) n1 += r.label == 1 ? 1 : 0;
  if (n1 == 0 || n1 == rows.size()) {
    throw Error(Errc::insufficient_data, "univariate testing needs both classes");
  }
  if (m == 0) m = family.size();
  std::vector<std::size_t> order(family.begin(), family.end());
  std::sort(order.begin(), order.end());
  std::vector<MeanDiffResult> out;
  out.reserve(order.size());
  std::vector<double> x0, x1;
  for (auto f : order) {
    if (f >= kFeatureCount) throw Error(Errc::out_of_bounds, fmt::format("feature index {}", f));
    x0.clear();
    x1.clear();
    for (const auto& r : rows) (r.label == 1 ? x1 : x0).push_back(r.feature(f));
    auto res = welch_t_test(x0, x1);
    res.variable = feature_names()[f];
    res.p_bonferroni = bonferroni(res.p_raw, m);
    out.push_back(std::move(res));
  }
  return out;
}

/// Columns: Variable,Difference in mean,95% CI lower,95% CI upper,Bonferroni P-value
inline void write_univariate_csv(std::ostream& out, std::span<const MeanDiffResult> results,
                                 double significance = 1.0) {
  out << "Variable,Difference in mean,95% CI lower,95% CI upper,Bonferroni P-value\n";
  for (const auto& r : results) {
    if (r.p_bonferroni > significance) continue;
    out << r.variable << ',' << fmt::format("{:.4g},{:.4g},{:.4g},{:.3g}", r.diff, r.ci_low,
                                            r.ci_high, r.p_bonferroni)
        << '\n';
  }
}

// ---------------------------------------------------------------------------
// 2x2 exact inference

/// Rows: attack = 1 / attack = 0; columns: in S / in S-bar.
///   a = attacks in S      b = non-attacks in S
///   c = attacks in S-bar  d = non-attacks in S-bar
struct ContingencyTable {
  std::int64_t a = 0;
  std::int64_t b = 0;
  std::int64_t c = 0;
  std::int64_t d = 0;

  [[nodiscard]] std::int64_t total() const { return a + b + c + d; }
  [[nodiscard]] std::int64_t size_s() const { return a + b; }
  [[nodiscard]] std::int64_t size_sbar() const { return c + d; }

  void validate() const {
    if (a < 0 || b < 0 || c < 0 || d < 0) throw Error(Errc::invalid_input, "negative table cell");
    if (total() == 0) throw Error(Errc::undefined_test, "empty contingency table");
  }

  friend bool operator==(const ContingencyTable&, const ContingencyTable&) = default;
};

namespace detail {

inline double log_choose(std::int64_t n, std::int64_t k) {
  return std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(k) + 1) -
         std::lgamma(static_cast<double>(n - k) + 1);
}

}  // namespace detail

/// Two-sided Fisher exact p: sum of hypergeometric probabilities (fixed
/// margins) of every table no more likely than the observed one, with a 1e-7
/// relative tolerance for ties. Evaluated in log space.
inline double fisher_exact(const ContingencyTable& t) {
  t.validate();
  const std::int64_t row1 = t.a + t.b;  // |S|
  const std::int64_t row2 = t.c + t.d;  // |S-bar|
  const std::int64_t col1 = t.a + t.c;  // attacks
  const std::int64_t n = t.total();
  if (row1 == 0 || row2 == 0 || col1 == 0 || col1 == n) {
    throw Error(Errc::undefined_test, "fisher exact test with an all-zero margin");
  }
  const double log_denom = detail::log_choose(n, col1);
  auto log_p = [&](std::int64_t x) {
    return detail::log_choose(row1, x) + detail::log_choose(row2, col1 - x) - log_denom;
  };
  const std::int64_t lo = std::max<std::int64_t>(0, col1 - row2);
  const std::int64_t hi = std::min(row1, col1);
  const double observed = log_p(t.a);
  const double cutoff = observed + std::log1p(1e-7);

  // log-sum-exp over qualifying tables
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(hi - lo + 1));
  for (std::int64_t x = lo; x <= hi; ++x) {
    double lp = log_p(x);
    if (lp <= cutoff) terms.push_back(lp);
  }
  const double peak = *std::max_element(terms.begin(), terms.end());
  double sum = 0;
  for (double lp : terms) sum += std::exp(lp - peak);
  return std::min(1.0, std::exp(peak + std::log(sum)));
}

struct OddsRatio {
  double value = 1;
  bool corrected = false;  // Haldane-Anscombe +0.5 applied
};

namespace detail {

struct Cells {
  double a, b, c, d;
  bool corrected;
};

inline Cells cells(const ContingencyTable& t) {
  t.validate();
  const bool zero = t.a == 0 || t.b == 0 || t.c == 0 || t.d == 0;
  const double add = zero ? 0.5 : 0.0;
  return {static_cast<double>(t.a) + add, static_cast<double>(t.b) + add,
          static_cast<double>(t.c) + add, static_cast<double>(t.d) + add, zero};
}

}  // namespace detail

/// (a*d)/(b*c); any zero cell adds 0.5 to all four.
inline OddsRatio odds_ratio(const ContingencyTable& t) {
  auto k = detail::cells(t);
  return {(k.a * k.d) / (k.b * k.c), k.corrected};
}

struct Interval {
  double low = 0;
  double high = 0;
};

inline double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

/// Woolf logit interval exp(ln OR -/+ z * sqrt(1/a + 1/b + 1/c + 1/d)).
inline Interval woolf_ci(const ContingencyTable& t, double alpha = 0.05) {
  if (!(alpha > 0 && alpha < 1)) throw Error(Errc::invalid_input, "alpha outside (0,1)");
  auto k = detail::cells(t);
  const double log_or = std::log((k.a * k.d) / (k.b * k.c));
  const double se = std::sqrt(1 / k.a + 1 / k.b + 1 / k.c + 1 / k.d);
  const double z = normal_quantile(1 - alpha / 2);
  return {std::exp(log_or - z * se), std::exp(log_or + z * se)};
}

struct ExactTestResult {
  double odds_ratio = 1;
  double ci_low = 0;
  double ci_high = 0;
  double p = 1;
  bool corrected = false;
};

inline ExactTestResult exact_test(const ContingencyTable& t, double alpha = 0.05) {
  auto orr = odds_ratio(t);
  auto ci = woolf_ci(t, alpha);
  return {orr.value, ci.low, ci.high, fisher_exact(t), orr.corrected};
}

}  // namespace pcrisk::stats

#endif  // PCRISK_STATS_HPP
