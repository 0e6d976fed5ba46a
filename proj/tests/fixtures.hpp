// Shared builders for synthetic datasets and CLI invocation.
#ifndef PCRISK_TESTS_FIXTURES_HPP
#define PCRISK_TESTS_FIXTURES_HPP

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "pcrisk/pcrisk.hpp"

namespace fixture {

namespace fs = std::filesystem;

// 20 x 25 = 500 cells at 100 km, same box as config/synthetic.json
inline pcrisk::Grid synth_grid(double km = 100) { return pcrisk::build_grid({0.0, 17.9, 10.0, 32.7}, km); }

inline pcrisk::SynthConfig planted_config(double odds_ratio = 20, double exposure = 0.3) {
  pcrisk::SynthConfig c;
  c.base_rate = 0.1;
  c.noise_events = 10;
  c.planted.push_back({pcrisk::Variable::SSW, pcrisk::PlantedEffect::Direction::low, exposure, odds_ratio});
  return c;
}

inline pcrisk::Dataset synth_dataset(std::uint64_t seed, const pcrisk::Grid& grid,
                                     const pcrisk::SynthConfig& cfg) {
  auto world = pcrisk::synth_country(seed, grid, cfg);
  const auto window = pcrisk::default_study_window();
  auto pastoral = pcrisk::filter_pastoral(world.events, window, pcrisk::KeywordRules::defaults());
  return pcrisk::assemble_dataset(grid, world.series, pastoral, window).dataset;
}

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct RunResult {
  int code = -1;
  std::string output;  // stdout + stderr
};

inline RunResult run(const std::string& args) {
  const std::string cmd = std::string(PCRISK_CLI) + " " + args + " 2>&1";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

inline std::string config_path(const std::string& name) { return std::string(PCRISK_CONFIG_DIR) + "/" + name; }

/// Fresh empty directory under the system temp dir.
inline fs::path scratch(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  auto p = fs::temp_directory_path() / ("pcrisk_" + tag + "_" + std::to_string(rng() % 1000000000));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

/// Writes `j` as a config next to the shipped keyword rules.
inline fs::path write_config(const fs::path& dir, nlohmann::json j) {
  fs::copy_file(config_path("keyword_rules.json"), dir / "keyword_rules.json",
                fs::copy_options::overwrite_existing);
  auto p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

inline nlohmann::json synthetic_config() {
  std::ifstream in(config_path("synthetic.json"));
  return nlohmann::json::parse(in);
}

}  // namespace fixture

#endif  // PCRISK_TESTS_FIXTURES_HPP
