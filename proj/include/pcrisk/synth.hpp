#ifndef PCRISK_SYNTH_HPP
#define PCRISK_SYNTH_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcrisk/date.hpp"
#include "pcrisk/error.hpp"
#include "pcrisk/grid.hpp"
#include "pcrisk/ingest.hpp"
#include "pcrisk/variables.hpp"

namespace pcrisk {

/// A cell-level exposure that multiplies the odds of conflict. Exposed cells
/// spend every month in the bottom (or top) 2-10% of the variable's range;
/// unexposed cells stay above 30% (or below 70%), so the exposure is visible
/// as mass in histogram bin 1 (or 10).
struct PlantedEffect {
  enum class Direction { low, high };

  Variable variable = Variable::SSW;
  Direction direction = Direction::low;
  double exposure_fraction = 0.3;
  double odds_ratio = 20.0;
};

struct SynthConfig {
  std::string country = "Synthland";
  Date start = default_study_window().first;
  std::size_t months = 93;
  double base_rate = 0.1;                // P(conflict) for unexposed cells
  std::optional<double> exposed_rate;    // overrides the odds-ratio link when set
  std::vector<PlantedEffect> planted;
  double mean_events_per_conflict_cell = 2.0;
  std::size_t noise_events = 0;          // non-pastoral events for the filter to drop

  void validate() const {
    if (months < 1) throw Error(Errc::config, "synthetic months must be >= 1");
    if (!(base_rate >= 0 && base_rate <= 1)) throw Error(Errc::config, "base_rate outside [0,1]");
    if (exposed_rate && !(*exposed_rate >= 0 && *exposed_rate <= 1)) {
      throw Error(Errc::config, "exposed_rate outside [0,1]");
    }
    if (!(mean_events_per_conflict_cell >= 1)) {
      throw Error(Errc::config, "mean_events_per_conflict_cell must be >= 1");
    }
    for (const auto& p : planted) {
      if (!(p.exposure_fraction >= 0 && p.exposure_fraction <= 1)) {
        throw Error(Errc::config, "exposure_fraction outside [0,1]");
      }
      if (!(p.odds_ratio > 0)) throw Error(Errc::config, "planted odds_ratio must be > 0");
    }
  }

  static SynthConfig from_json(const nlohmann::json& j) {
    SynthConfig c;
    try {
      c.country = j.value("country", c.country);
      if (j.contains("start")) c.start = parse_date(j.at("start").get<std::string>());
      c.months = j.value("months", c.months);
      c.base_rate = j.value("base_rate", c.base_rate);
      if (j.contains("exposed_rate") && !j.at("exposed_rate").is_null()) {
        c.exposed_rate = j.at("exposed_rate").get<double>();
      }
      c.mean_events_per_conflict_cell =
          j.value("mean_events_per_conflict_cell", c.mean_events_per_conflict_cell);
      c.noise_events = j.value("noise_events", c.noise_events);
      for (const auto& p : j.value("planted", nlohmann::json::array())) {
        PlantedEffect e;
        auto name = p.at("variable").get<std::string>();
        auto v = parse_variable(name);
        if (!v) throw Error(Errc::config, "unknown planted variable '" + name + "'");
        e.variable = *v;
        auto dir = p.value("direction", std::string("low"));
        if (dir != "low" && dir != "high") throw Error(Errc::config, "direction must be low|high");
        e.direction = dir == "low" ? PlantedEffect::Direction::low : PlantedEffect::Direction::high;
        e.exposure_fraction = p.value("exposure_fraction", e.exposure_fraction);
        e.odds_ratio = p.value("odds_ratio", e.odds_ratio);
        c.planted.push_back(e);
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::config, std::string("synthetic config: ") + e.what());
    }
    c.validate();
    return c;
  }

  [[nodiscard]] nlohmann::json to_json() const {
    nlohmann::json planted_json = nlohmann::json::array();
    for (const auto& p : planted) {
      planted_json.push_back({{"variable", variable_name(p.variable)},
                              {"direction", p.direction == PlantedEffect::Direction::low ? "low" : "high"},
                              {"exposure_fraction", p.exposure_fraction},
                              {"odds_ratio", p.odds_ratio}});
    }
    nlohmann::json j = {{"country", country},
                        {"start", format_date(start)},
                        {"months", months},
                        {"base_rate", base_rate},
                        {"mean_events_per_conflict_cell", mean_events_per_conflict_cell},
                        {"noise_events", noise_events},
                        {"planted", planted_json}};
    j["exposed_rate"] = exposed_rate ? nlohmann::json(*exposed_rate) : nlohmann::json(nullptr);
    return j;
  }
};

struct SynthTruth {
  std::vector<CellId> exposed;         // exposed to any planted effect
  std::vector<CellId> conflict_cells;
};

struct SynthCountry {
  std::vector<CellSeries> series;      // all 11 variables, active cells
  std::vector<ConflictEvent> events;   // pastoral and noise events, unfiltered
  SynthTruth truth;
};

namespace detail {

struct VariableShape {
  double lo, hi;          // physical range
  double row_weight;      // north-south vs east-west gradient mix
  double amplitude;       // seasonal swing, fraction of range
  double phase;           // months
};

inline constexpr std::array<VariableShape, kVariableCount> kShapes = {{
    {0.0, 6.0, 0.8, 0.15, 0.0},      // LAI
    {0.0, 1.0, 0.7, 0.18, 0.5},      // GRN
    {0.0, 1.0, 0.6, 0.20, 1.0},      // SSW
    {285.0, 325.0, 0.4, 0.12, 3.0},  // SST (K)
    {0.0, 150.0, 0.5, 0.16, 1.5},    // LNDEV (W/m^2)
    {2.0, 14.0, 0.3, 0.10, 4.0},     // WS10M_MAX (m/s)
    {0.0, 4.0, 0.3, 0.10, 4.5},      // WS10M_MIN (m/s)
    {10.0, 95.0, 0.7, 0.20, 1.0},    // RH2M (%)
    {0.0, 15.0, 0.8, 0.22, 0.5},     // PRECTOTCORR (mm/day)
    {25.0, 45.0, 0.5, 0.12, 3.5},    // T2M_MAX (C)
    {10.0, 28.0, 0.5, 0.12, 3.0},    // T2M_MIN (C)
}};

inline constexpr std::array<const char*, 5> kPastoralNotes = {
    "Herders clashed with farmers over crop damage near the village; several killed.",
    "Suspected pastoralists attacked a farming settlement and stole cattle.",
    "Transhumant herders and local farmers fought over access to grazing land.",
    "Armed men believed to be Fulani herders raided the village, burning homes.",
    "Livestock owners and cultivators clashed after cattle strayed into fields.",
};

inline constexpr std::array<const char*, 4> kNoiseNotes = {
    "Market bombing in the town centre; casualties reported.",
    "Peaceful protest by traders over new taxes.",
    "Military forces clashed with a rebel group near the border.",
    "Unidentified gunmen kidnapped a local official.",
};

}  // namespace detail

/// Deterministic desk-scale country: seasonal series for every variable and
/// conflicts whose log-odds rise by log(OR) in each planted exposure.
inline SynthCountry synth_country(std::uint64_t seed, const Grid& grid, const SynthConfig& config) {
  config.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const auto cells = grid.active_cells();
  const double row_span = std::max<double>(1, static_cast<double>(grid.n_rows()) - 1);
  const double col_span = std::max<double>(1, static_cast<double>(grid.n_cols()) - 1);

  // exposure[k][i]: cell i exposed to planted effect k
  std::vector<std::vector<bool>> exposure(config.planted.size(), std::vector<bool>(cells.size()));
  for (std::size_t k = 0; k < config.planted.size(); ++k) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      exposure[k][i] = unit(rng) < config.planted[k].exposure_fraction;
    }
  }

  SynthCountry out;
  for (auto v : kAllVariables) {
    const auto& shape = detail::kShapes[index_of(v)];
    const PlantedEffect* effect = nullptr;
    std::size_t effect_k = 0;
    for (std::size_t k = 0; k < config.planted.size(); ++k) {
      if (config.planted[k].variable == v) {
        effect = &config.planted[k];
        effect_k = k;
        break;
      }
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto& c = cells[i];
      const double fr = static_cast<double>(c.row) / row_span;
      const double fc = static_cast<double>(c.col) / col_span;
      const double base =
          0.35 + 0.3 * (shape.row_weight * fr + (1 - shape.row_weight) * fc) + 0.04 * normal(rng);
      const bool exposed = effect != nullptr && exposure[effect_k][i];
      CellSeries s{c, v, {}};
      s.samples.reserve(config.months);
      for (std::size_t m = 0; m < config.months; ++m) {
        const double season =
            std::sin(2 * std::numbers::pi * (static_cast<double>(m) + shape.phase) / 12.0);
        double u = std::clamp(base + shape.amplitude * season + 0.04 * normal(rng), 0.0, 1.0);
        if (effect != nullptr) {
          if (exposed) {
            u = 0.02 + 0.08 * std::clamp(0.5 + 0.3 * season + 0.1 * normal(rng), 0.0, 1.0);
          } else {
            u = 0.30 + 0.67 * u;
          }
          if (effect->direction == PlantedEffect::Direction::high) u = 1.0 - u;
        }
        s.samples.push_back({add_months(config.start, static_cast<int>(m)),
                             shape.lo + (shape.hi - shape.lo) * u});
      }
      out.series.push_back(std::move(s));
    }
  }

  const double base_logit = config.base_rate <= 0 ? -std::numeric_limits<double>::infinity()
                            : config.base_rate >= 1 ? std::numeric_limits<double>::infinity()
                                                    : std::log(config.base_rate / (1 - config.base_rate));
  std::poisson_distribution<int> extra(config.mean_events_per_conflict_cell - 1.0);
  auto random_event = [&](const CellId& c, const char* notes) {
    auto b = grid.bounds(c);
    ConflictEvent ev;
    ev.lat = b.south + (b.north - b.south) * (0.01 + 0.98 * unit(rng));
    ev.lon = b.west + (b.east - b.west) * (0.01 + 0.98 * unit(rng));
    auto month = static_cast<int>(unit(rng) * static_cast<double>(config.months));
    auto first = add_months(config.start, month);
    auto day = 1 + static_cast<unsigned>(unit(rng) * 28);
    ev.date = Date{first.year(), first.month(), std::chrono::day{day}};
    ev.country = config.country;
    ev.notes = notes;
    return ev;
  };

  for (std::size_t i = 0; i < cells.size(); ++i) {
    bool any_exposed = false;
    double logit = base_logit;
    for (std::size_t k = 0; k < config.planted.size(); ++k) {
      if (exposure[k][i]) {
        any_exposed = true;
        logit += std::log(config.planted[k].odds_ratio);
      }
    }
    if (any_exposed) out.truth.exposed.push_back(cells[i]);
    double p = any_exposed && config.exposed_rate ? *config.exposed_rate
               : std::isinf(logit)                ? (logit > 0 ? 1.0 : 0.0)
                                                  : 1.0 / (1.0 + std::exp(-logit));
    const double draw = unit(rng);
    if (draw >= p) continue;
    out.truth.conflict_cells.push_back(cells[i]);
    const int n = 1 + (config.mean_events_per_conflict_cell > 1 ? extra(rng) : 0);
    for (int e = 0; e < n; ++e) {
      auto which = static_cast<std::size_t>(unit(rng) * detail::kPastoralNotes.size());
      out.events.push_back(random_event(cells[i], detail::kPastoralNotes[which]));
    }
  }
  for (std::size_t e = 0; e < config.noise_events && !cells.empty(); ++e) {
    auto ci = static_cast<std::size_t>(unit(rng) * static_cast<double>(cells.size()));
    auto which = static_cast<std::size_t>(unit(rng) * detail::kNoiseNotes.size());
    out.events.push_back(random_event(cells[std::min(ci, cells.size() - 1)],
                                      detail::kNoiseNotes[which]));
  }
  return out;
}

}  // namespace pcrisk

#endif  // PCRISK_SYNTH_HPP
