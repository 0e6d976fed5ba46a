#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pcrisk/pipeline.hpp"

namespace fs = std::filesystem;
using namespace pcrisk;

int main(int argc, char** argv) {
  CLI::App app{"Pastoral conflict risk pipeline: build features, test, learn trees, score and map cells."};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> cell_km;
  std::string out_dir = ".";
  app.add_option("--config", config_path, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "override the config seed");
  app.add_option("--cell-km", cell_km, "run at a single granularity")->check(CLI::IsMember({50.0, 75.0, 100.0}));
  app.add_option("--out-dir", out_dir, "directory for outputs and manifest.json");

  auto* build = app.add_subcommand("build-dataset", "grid the country, ingest inputs, write the feature table");
  auto* univariate = app.add_subcommand("test-univariate", "Welch tests per feature with Bonferroni correction");
  auto* tree = app.add_subcommand("learn-tree", "grow a CART tree and extract leaf-path hypotheses");
  auto* eval = app.add_subcommand("eval-hypotheses", "odds ratio, Woolf CI and Fisher p per hypothesis");
  auto* suite = app.add_subcommand("train-suite", "train and score the eight classifiers");
  auto* risk = app.add_subcommand("riskmap", "score every cell and render GeoJSON, PGM and CSV maps");

  std::optional<std::size_t> bonferroni_m;
  univariate->add_option("--bonferroni-m", bonferroni_m, "Bonferroni family size (default: features tested)")
      ->check(CLI::PositiveNumber);

  pipeline::EvalOptions eval_opt;
  std::string hypothesis;
  eval->add_flag("--golden", eval_opt.golden, "check built-ins against tables rebuilt from published counts");
  eval->add_option("--which", eval_opt.which, "builtin or tree")->check(CLI::IsMember({"builtin", "tree"}));
  eval->add_option("--hypothesis", hypothesis, "evaluate a single hypothesis by name");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : pipeline::kUsage;
  }
  if (!hypothesis.empty()) eval_opt.hypothesis = hypothesis;

  try {
    auto cfg = pipeline::RunConfig::load(config_path);
    if (seed) cfg.seed = seed;
    if (cell_km) cfg.cell_km = {*cell_km};
    if (bonferroni_m) cfg.bonferroni_m = *bonferroni_m;
    fs::create_directories(out_dir);
    pipeline::Context ctx{std::move(cfg), config_path, out_dir, std::cout, std::cerr};
    if (*build) return pipeline::cmd_build_dataset(ctx);
    if (*univariate) return pipeline::cmd_test_univariate(ctx);
    if (*tree) return pipeline::cmd_learn_tree(ctx);
    if (*eval) return pipeline::cmd_eval_hypotheses(ctx, eval_opt);
    if (*suite) return pipeline::cmd_train_suite(ctx);
    if (*risk) return pipeline::cmd_riskmap(ctx);
  } catch (const pipeline::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return pipeline::kUsage;
  } catch (const NonConvergenceError& e) {
    std::cerr << "error: " << e.what() << " (last loss " << e.last_loss() << ")\n";
    return pipeline::kComputation;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pipeline::exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pipeline::kConfigIo;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pipeline::kData;
  }
  return pipeline::kUsage;
}
