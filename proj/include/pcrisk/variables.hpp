#ifndef PCRISK_VARIABLES_HPP
#define PCRISK_VARIABLES_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

namespace pcrisk {

/// The eleven environmental variables, in feature-vector order.
enum class Variable : std::uint8_t {
  LAI,
  GRN,
  SSW,
  SST,
  LNDEV,
  WS10M_MAX,
  WS10M_MIN,
  RH2M,
  PRECTOTCORR,
  T2M_MAX,
  T2M_MIN,
};

inline constexpr std::size_t kVariableCount = 11;
inline constexpr std::size_t kBins = 10;
inline constexpr std::size_t kNeighborRadii = 5;
inline constexpr std::size_t kHistogramFeatures = kVariableCount * kBins;
inline constexpr std::size_t kFeatureCount = kHistogramFeatures + 2 * kNeighborRadii;
static_assert(kFeatureCount == 120);

inline constexpr std::array<Variable, kVariableCount> kAllVariables = {
    Variable::LAI,       Variable::GRN,     Variable::SSW,         Variable::SST,
    Variable::LNDEV,     Variable::WS10M_MAX, Variable::WS10M_MIN, Variable::RH2M,
    Variable::PRECTOTCORR, Variable::T2M_MAX, Variable::T2M_MIN};

inline constexpr std::size_t index_of(Variable v) { return static_cast<std::size_t>(v); }

inline constexpr std::string_view variable_name(Variable v) {
  constexpr std::array<std::string_view, kVariableCount> names = {
      "LAI",  "GRN",  "SSW",         "SST",     "LNDEV",  "WS10M_MAX",
      "WS10M_MIN", "RH2M", "PRECTOTCORR", "T2M_MAX", "T2M_MIN"};
  return names[index_of(v)];
}

inline constexpr std::string_view variable_description(Variable v) {
  constexpr std::array<std::string_view, kVariableCount> text = {
      "leaf area index",
      "greenness fraction",
      "surface soil wetness",
      "surface skin temperature",
      "land evaporation rate",
      "maximum wind speed at 10 meters",
      "minimum wind speed at 10 meters",
      "relative humidity at 2 meters",
      "corrected total precipitation",
      "maximum temperature at 2 meters",
      "minimum temperature at 2 meters"};
  return text[index_of(v)];
}

inline std::optional<Variable> parse_variable(std::string_view name) {
  for (auto v : kAllVariables) {
    if (variable_name(v) == name) return v;
  }
  return std::nullopt;
}

inline constexpr bool is_weather(Variable v) { return index_of(v) >= index_of(Variable::WS10M_MAX); }

/// How daily samples collapse to one monthly value.
enum class MonthlyAggregation { mean, min, max };

inline constexpr MonthlyAggregation monthly_aggregation(Variable v) {
  switch (v) {
    case Variable::WS10M_MAX:
    case Variable::T2M_MAX:
      return MonthlyAggregation::max;
    case Variable::WS10M_MIN:
    case Variable::T2M_MIN:
      return MonthlyAggregation::min;
    default:
      return MonthlyAggregation::mean;
  }
}

// Feature dictionary: LAI1..T2M_MIN10, NBRP1..5, NBRC1..5.

inline constexpr std::size_t histogram_feature(Variable v, std::size_t bin) {
  return index_of(v) * kBins + bin;
}
inline constexpr std::size_t presence_feature(std::size_t radius) {
  return kHistogramFeatures + radius - 1;
}
inline constexpr std::size_t count_feature(std::size_t radius) {
  return kHistogramFeatures + kNeighborRadii + radius - 1;
}
inline constexpr bool is_count_feature(std::size_t f) {
  return f >= kHistogramFeatures + kNeighborRadii && f < kFeatureCount;
}
inline constexpr bool is_presence_feature(std::size_t f) {
  return f >= kHistogramFeatures && f < kHistogramFeatures + kNeighborRadii;
}

inline const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    out.reserve(kFeatureCount);
    for (auto v : kAllVariables) {
      for (std::size_t b = 1; b <= kBins; ++b) out.push_back(fmt::format("{}{}", variable_name(v), b));
    }
    for (std::size_t j = 1; j <= kNeighborRadii; ++j) out.push_back(fmt::format("NBRP{}", j));
    for (std::size_t j = 1; j <= kNeighborRadii; ++j) out.push_back(fmt::format("NBRC{}", j));
    return out;
  }();
  return names;
}

inline std::optional<std::size_t> feature_index(std::string_view name) {
  const auto& names = feature_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  return std::nullopt;
}

inline std::optional<Variable> feature_variable(std::size_t f) {
  if (f >= kHistogramFeatures) return std::nullopt;
  return kAllVariables[f / kBins];
}

/// Human-readable definition; bin k covers the k-th tenth of the variable's
/// dataset-wide [min, max] range, written as a percentage interval.
inline std::string feature_description(std::size_t f) {
  if (auto v = feature_variable(f)) {
    std::size_t bin = f % kBins;
    return fmt::format("Fraction of months in which the cell's {} lies in the [{}, {}]% band of its "
                       "dataset-wide range",
                       variable_description(*v), bin * 10, bin * 10 + 10);
  }
  if (is_presence_feature(f)) {
    return fmt::format("1 if any cell within lattice distance {} had a pastoral conflict",
                       f - kHistogramFeatures + 1);
  }
  return fmt::format("Number of pastoral conflicts in cells within lattice distance {}",
                     f - kHistogramFeatures - kNeighborRadii + 1);
}

}  // namespace pcrisk

#endif  // PCRISK_VARIABLES_HPP
