#ifndef PCRISK_MATRIX_HPP
#define PCRISK_MATRIX_HPP

#include <cstddef>
#include <span>
#include <vector>

#include <fmt/format.h>

#include "pcrisk/error.hpp"
#include "pcrisk/features.hpp"

namespace pcrisk {

/// Dense row-major design matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

  static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != m.cols_) throw Error(Errc::invalid_input, "ragged matrix rows");
      std::copy(rows[i].begin(), rows[i].end(), m.values_.begin() + static_cast<std::ptrdiff_t>(i * m.cols_));
    }
    return m;
  }

  [[nodiscard]] std::size_t rows() const { return rows_; }
  [[nodiscard]] std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  [[nodiscard]] std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }
  [[nodiscard]] std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }

  /// Rows picked by index (duplicates allowed).
  [[nodiscard]] Matrix select(std::span<const std::size_t> idx) const {
    Matrix out(idx.size(), cols_);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      auto src = row(idx[i]);
      std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

using Labels = std::vector<int>;

struct LabeledData {
  Matrix x;
  Labels y;
};

inline LabeledData to_labeled(std::span<const FeatureRow> rows) {
  LabeledData out{Matrix(rows.size(), kFeatureCount), Labels(rows.size())};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto v = rows[i].vector();
    std::copy(v.begin(), v.end(), out.x.row(i).begin());
    out.y[i] = rows[i].label;
  }
  return out;
}

inline void check_binary(std::span<const int> y) {
  for (int v : y) {
    if (v != 0 && v != 1) throw Error(Errc::invalid_input, fmt::format("label {} is not binary", v));
  }
}

}  // namespace pcrisk

#endif  // PCRISK_MATRIX_HPP
