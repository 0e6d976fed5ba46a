#ifndef PCRISK_ML_SUITE_HPP
#define PCRISK_ML_SUITE_HPP

#include <future>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "pcrisk/matrix.hpp"
#include "pcrisk/ml/metrics.hpp"
#include "pcrisk/ml/models.hpp"
#include "pcrisk/ml/split.hpp"

namespace pcrisk::ml {

struct SplitConfig {
  double test_fraction = 0.2;
  std::uint64_t seed = 0;

  [[nodiscard]] std::string describe() const {
    return fmt::format("stratified random, test fraction {}, seed {}", test_fraction, seed);
  }
};

struct SuiteRow {
  std::string classifier;
  MetricsRow metrics;
};

struct SuiteReport {
  std::vector<SuiteRow> rows;  // in spec order
  std::string split;
  std::size_t n_train = 0;
  std::size_t n_test = 0;

  /// Highest F1, ties broken by AUC, then by spec order.
  [[nodiscard]] const SuiteRow& best() const {
    if (rows.empty()) throw Error(Errc::invalid_input, "empty suite report");
    const SuiteRow* b = &rows.front();
    for (const auto& r : rows) {
      const double auc_r = r.metrics.auc.value_or(-1), auc_b = b->metrics.auc.value_or(-1);
      if (r.metrics.f1 > b->metrics.f1 || (r.metrics.f1 == b->metrics.f1 && auc_r > auc_b)) b = &r;
    }
    return *b;
  }
};

/// Trains every spec on one shared split (concurrently) and scores the test side.
inline SuiteReport run_suite(const LabeledData& data, std::span<const ClassifierSpec> specs,
                             const SplitConfig& split) {
  const auto idx = stratified_split(data.y, split.test_fraction, split.seed);
  const Matrix x_train = data.x.select(idx.train);
  const Matrix x_test = data.x.select(idx.test);
  Labels y_train, y_test;
  for (auto i : idx.train) y_train.push_back(data.y[i]);
  for (auto i : idx.test) y_test.push_back(data.y[i]);

  std::vector<std::future<SuiteRow>> jobs;
  for (const auto& spec : specs) {
    jobs.push_back(std::async(std::launch::async, [&, spec] {
      auto model = train(spec, x_train, y_train);
      return SuiteRow{spec.name(), metrics(model.predict_proba(x_test), y_test)};
    }));
  }
  SuiteReport report;
  report.split = split.describe();
  report.n_train = idx.train.size();
  report.n_test = idx.test.size();
  for (auto& j : jobs) report.rows.push_back(j.get());
  return report;
}

inline std::string format_metric(std::optional<double> v) {
  return v ? fmt::format("{:.4f}", *v) : std::string("NA");
}

inline std::string format_row(const SuiteRow& r) {
  return fmt::format("{},{:.4f},{:.4f},{:.4f},{}", r.classifier, r.metrics.precision, r.metrics.recall,
                     r.metrics.f1, format_metric(r.metrics.auc));
}

/// Columns: Classifier,Precision,Recall,F1-Score,AUC
inline void write_report_csv(std::ostream& out, const SuiteReport& report) {
  out << "Classifier,Precision,Recall,F1-Score,AUC\n";
  for (const auto& r : report.rows) out << format_row(r) << '\n';
}

}  // namespace pcrisk::ml

#endif  // PCRISK_ML_SUITE_HPP
