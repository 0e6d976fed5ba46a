#ifndef PCRISK_ML_METRICS_HPP
#define PCRISK_ML_METRICS_HPP

#include <algorithm>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <fmt/format.h>

#include "pcrisk/error.hpp"

namespace pcrisk::ml {

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  [[nodiscard]] double precision() const {
    return tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  }
  [[nodiscard]] double recall() const {
    return tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  }
  [[nodiscard]] double f1() const {
    const double p = precision(), r = recall();
    return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
  }
};

inline Confusion confusion(std::span<const double> scores, std::span<const int> labels,
                           double threshold = 0.5) {
  if (scores.size() != labels.size()) throw Error(Errc::invalid_input, "score and label counts differ");
  Confusion c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (labels[i] == 1) {
      (pred ? c.tp : c.fn) += 1;
    } else {
      (pred ? c.fp : c.tn) += 1;
    }
  }
  return c;
}

/// Mann-Whitney estimate of P(score_pos > score_neg), ties counted as 1/2.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(Errc::invalid_input, "score and label counts differ");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  double n_pos = 0, n_neg = 0, rank_sum = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        rank_sum += mid_rank;
        ++n_pos;
      } else {
        ++n_neg;
      }
    }
    i = j;
  }
  if (n_pos == 0 || n_neg == 0) throw Error(Errc::undefined_test, "AUC needs both classes");
  return (rank_sum - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg);
}

struct MetricsRow {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::optional<double> auc;  // empty when the labels hold one class
  Confusion counts;
};

inline MetricsRow metrics(std::span<const double> scores, std::span<const int> labels,
                          double threshold = 0.5) {
  MetricsRow m;
  m.counts = confusion(scores, labels, threshold);
  m.precision = m.counts.precision();
  m.recall = m.counts.recall();
  m.f1 = m.counts.f1();
  try {
    m.auc = roc_auc(scores, labels);
  } catch (const Error& e) {
    if (e.code() != Errc::undefined_test) throw;
  }
  return m;
}

}  // namespace pcrisk::ml

#endif  // PCRISK_ML_METRICS_HPP
