#ifndef PCRISK_ML_SPLIT_HPP
#define PCRISK_ML_SPLIT_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <fmt/format.h>

#include "pcrisk/error.hpp"

namespace pcrisk::ml {

struct SplitIndices {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;   // ascending
};

/// Stratified random split: round(test_fraction * n_c) rows of each class go
/// to the test side. Each class must land on both sides.
inline SplitIndices stratified_split(std::span<const int> labels, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0 && test_fraction < 1)) {
    throw Error(Errc::invalid_input, fmt::format("test fraction {} outside (0,1)", test_fraction));
  }
  std::mt19937_64 rng(seed);
  SplitIndices out;
  for (int cls : {0, 1}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) idx.push_back(i);
    }
    const auto n_test = static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(idx.size())));
    if (n_test == 0 || n_test >= idx.size()) {
      throw Error(Errc::stratification,
                  fmt::format("class {} has {} rows, too few to stratify at fraction {}", cls,
                              idx.size(), test_fraction));
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    out.test.insert(out.test.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    out.train.insert(out.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

}  // namespace pcrisk::ml

#endif  // PCRISK_ML_SPLIT_HPP
