#ifndef PCRISK_PIPELINE_HPP
#define PCRISK_PIPELINE_HPP

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "pcrisk/cart.hpp"
#include "pcrisk/date.hpp"
#include "pcrisk/digest.hpp"
#include "pcrisk/error.hpp"
#include "pcrisk/features.hpp"
#include "pcrisk/grid.hpp"
#include "pcrisk/hypotheses.hpp"
#include "pcrisk/ingest.hpp"
#include "pcrisk/matrix.hpp"
#include "pcrisk/ml/models.hpp"
#include "pcrisk/ml/suite.hpp"
#include "pcrisk/riskmap.hpp"
#include "pcrisk/stats.hpp"
#include "pcrisk/synth.hpp"

namespace pcrisk::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum ExitCode : int { kOk = 0, kUsage = 2, kConfigIo = 3, kData = 4, kComputation = 5 };

inline int exit_code(Errc c) {
  switch (c) {
    case Errc::config:
    case Errc::io: return kConfigIo;
    case Errc::degenerate_variance:
    case Errc::undefined_test:
    case Errc::degenerate_partition:
    case Errc::non_convergence: return kComputation;
    default: return kData;
  }
}

struct RunConfig {
  int version = 1;
  std::string country = "Synthland";
  BBox bbox{};
  std::optional<fs::path> mask;
  std::vector<double> cell_km{100};
  DateWindow window = default_study_window();
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> events;
  EventColumns event_columns;
  std::vector<std::string> country_filter;
  std::map<Variable, fs::path> series;
  std::optional<fs::path> keyword_rules;
  std::optional<SynthConfig> synthetic;
  CartParams tree{4, 5, 2, 0, 0, "gini"};
  std::size_t min_support = 5;
  double min_purity = 0.6;
  std::string univariate_family = "all";
  double significance = 1.0;
  std::size_t bonferroni_m = 0;  // 0 = number of features tested
  double test_fraction = 0.2;
  std::vector<ml::ClassifierSpec> classifiers;  // empty = all eight with defaults
  ml::ClassifierSpec risk_classifier{ml::ClassifierKind::RandomForest};
  unsigned threads = 0;  // 0 = hardware concurrency

  static RunConfig from_json(const json& j, const fs::path& base_dir) {
    RunConfig c;
    auto path_of = [&](const json& v, const char* what) {
      fs::path p = v.get<std::string>();
      if (p.is_relative()) p = base_dir / p;
      p = p.lexically_normal();
      if (!fs::exists(p)) throw Error(Errc::io, fmt::format("{} '{}' does not exist", what, p.string()));
      return p;
    };
    auto only = [](const json& obj, std::initializer_list<const char*> keys, const char* where) {
      if (!obj.is_object()) throw Error(Errc::config, fmt::format("'{}' must be an object", where));
      for (const auto& [k, v] : obj.items()) {
        if (std::find_if(keys.begin(), keys.end(), [&](const char* s) { return k == s; }) == keys.end()) {
          throw Error(Errc::config, fmt::format("unknown key '{}' in {}", k, where));
        }
      }
    };
    try {
      only(j,
           {"version", "country", "cell_km", "window", "seed", "inputs", "synthetic", "tree",
            "univariate", "suite", "riskmap", "threads"},
           "config");
      c.version = j.value("version", 1);
      if (c.version != 1) throw Error(Errc::config, fmt::format("unsupported config version {}", c.version));

      const auto& country = j.at("country");
      only(country, {"name", "bbox", "mask"}, "country");
      c.country = country.value("name", c.country);
      const auto& b = country.at("bbox");
      c.bbox = {b.at("lat_min").get<double>(), b.at("lat_max").get<double>(),
                b.at("lon_min").get<double>(), b.at("lon_max").get<double>()};
      if (country.contains("mask")) c.mask = path_of(country.at("mask"), "mask");

      if (j.contains("cell_km")) {
        const auto& km = j.at("cell_km");
        c.cell_km = km.is_array() ? km.get<std::vector<double>>() : std::vector<double>{km.get<double>()};
      }
      if (c.cell_km.empty()) throw Error(Errc::config, "cell_km is empty");
      for (double km : c.cell_km) {
        if (!(km > 0)) throw Error(Errc::config, fmt::format("cell_km {} must be positive", km));
      }

      if (j.contains("window")) {
        const auto& w = j.at("window");
        only(w, {"start", "end"}, "window");
        c.window = {parse_date(w.at("start").get<std::string>()), parse_date(w.at("end").get<std::string>())};
      }
      c.window.validate();
      if (j.contains("seed") && !j.at("seed").is_null()) c.seed = j.at("seed").get<std::uint64_t>();

      if (j.contains("inputs")) {
        const auto& in = j.at("inputs");
        only(in, {"events", "event_columns", "country_filter", "series", "keyword_rules"}, "inputs");
        if (in.contains("events")) c.events = path_of(in.at("events"), "events file");
        if (in.contains("event_columns")) {
          const auto& ec = in.at("event_columns");
          only(ec, {"date", "lat", "lon", "country", "notes"}, "event_columns");
          c.event_columns.date = ec.value("date", c.event_columns.date);
          c.event_columns.lat = ec.value("lat", c.event_columns.lat);
          c.event_columns.lon = ec.value("lon", c.event_columns.lon);
          c.event_columns.country = ec.value("country", c.event_columns.country);
          c.event_columns.notes = ec.value("notes", c.event_columns.notes);
        }
        c.country_filter = in.value("country_filter", std::vector<std::string>{});
        if (in.contains("series")) {
          for (const auto& [name, p] : in.at("series").items()) {
            auto v = parse_variable(name);
            if (!v) throw Error(Errc::config, "unknown series variable '" + name + "'");
            c.series[*v] = path_of(p, "series file");
          }
        }
        if (in.contains("keyword_rules")) c.keyword_rules = path_of(in.at("keyword_rules"), "keyword rules");
      }
      if (j.contains("synthetic")) c.synthetic = SynthConfig::from_json(j.at("synthetic"));
      if (!c.synthetic && (!c.events || c.series.empty())) {
        throw Error(Errc::config, "config needs either 'synthetic' or inputs.events and inputs.series");
      }

      if (j.contains("tree")) {
        const auto& t = j.at("tree");
        only(t, {"max_depth", "min_leaf", "min_split", "min_support", "min_purity"}, "tree");
        c.tree.max_depth = t.value("max_depth", c.tree.max_depth);
        c.tree.min_leaf = t.value("min_leaf", c.tree.min_leaf);
        c.tree.min_split = t.value("min_split", c.tree.min_split);
        c.min_support = t.value("min_support", c.min_support);
        c.min_purity = t.value("min_purity", c.min_purity);
        c.tree.validate();
      }
      if (j.contains("univariate")) {
        const auto& u = j.at("univariate");
        only(u, {"family", "significance", "bonferroni_m"}, "univariate");
        c.univariate_family = u.value("family", c.univariate_family);
        c.significance = u.value("significance", c.significance);
        c.bonferroni_m = u.value("bonferroni_m", c.bonferroni_m);
        (void)stats::feature_family(c.univariate_family);
      }
      if (j.contains("suite")) {
        const auto& s = j.at("suite");
        only(s, {"test_fraction", "classifiers"}, "suite");
        c.test_fraction = s.value("test_fraction", c.test_fraction);
        if (!(c.test_fraction > 0 && c.test_fraction < 1)) throw Error(Errc::config, "test_fraction outside (0,1)");
        for (const auto& spec : s.value("classifiers", json::array())) {
          c.classifiers.push_back(ml::ClassifierSpec::from_json(spec));
        }
      }
      if (j.contains("riskmap")) {
        const auto& r = j.at("riskmap");
        only(r, {"classifier"}, "riskmap");
        if (r.contains("classifier")) c.risk_classifier = ml::ClassifierSpec::from_json(r.at("classifier"));
      }
      c.threads = j.value("threads", 0u);
    } catch (const json::exception& e) {
      throw Error(Errc::config, e.what());
    } catch (const Error& e) {
      if (e.code() == Errc::io) throw;
      throw Error(Errc::config, e.what());
    }
    return c;
  }

  static RunConfig load(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(Errc::io, "cannot open config " + file.string());
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(Errc::config, file.string() + ": " + e.what());
    }
    return from_json(j, fs::absolute(file).parent_path());
  }

  [[nodiscard]] std::uint64_t require_seed(std::string_view command) const {
    if (!seed) throw Error(Errc::config, fmt::format("{} needs a seed (config 'seed' or --seed)", command));
    return *seed;
  }

  [[nodiscard]] unsigned worker_count() const {
    return threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  }

  /// Fully resolved settings, recorded in the manifest.
  [[nodiscard]] json to_json() const {
    json j;
    j["version"] = version;
    j["country"] = {{"name", country},
                    {"bbox",
                     {{"lat_min", bbox.lat_min},
                      {"lat_max", bbox.lat_max},
                      {"lon_min", bbox.lon_min},
                      {"lon_max", bbox.lon_max}}}};
    if (mask) j["country"]["mask"] = mask->generic_string();
    j["cell_km"] = cell_km;
    j["window"] = {{"start", format_date(window.first)}, {"end", format_date(window.last)}};
    j["seed"] = seed ? json(*seed) : json(nullptr);
    json in = json::object();
    if (events) in["events"] = events->generic_string();
    in["event_columns"] = {{"date", event_columns.date},
                           {"lat", event_columns.lat},
                           {"lon", event_columns.lon},
                           {"country", event_columns.country},
                           {"notes", event_columns.notes}};
    in["country_filter"] = country_filter;
    json s = json::object();
    for (const auto& [v, p] : series) s[std::string(variable_name(v))] = p.generic_string();
    in["series"] = s;
    if (keyword_rules) in["keyword_rules"] = keyword_rules->generic_string();
    j["inputs"] = in;
    if (synthetic) j["synthetic"] = synthetic->to_json();
    j["tree"] = {{"max_depth", tree.max_depth},
                 {"min_leaf", tree.min_leaf},
                 {"min_split", tree.min_split},
                 {"min_support", min_support},
                 {"min_purity", min_purity}};
    j["univariate"] = {{"family", univariate_family}, {"significance", significance}, {"bonferroni_m", bonferroni_m}};
    json specs = json::array();
    for (const auto& sp : classifiers) specs.push_back(sp.to_json());
    j["suite"] = {{"test_fraction", test_fraction}, {"classifiers", specs}};
    j["riskmap"] = {{"classifier", risk_classifier.to_json()}};
    return j;
  }

  [[nodiscard]] std::vector<fs::path> input_files() const {
    std::vector<fs::path> out;
    if (mask) out.push_back(*mask);
    if (!synthetic) {
      if (events) out.push_back(*events);
      for (const auto& [v, p] : series) out.push_back(p);
    }
    if (keyword_rules) out.push_back(*keyword_rules);
    return out;
  }
};

inline std::string km_tag(double km) { return fmt::format("{}km", km); }

struct Context {
  RunConfig cfg;
  fs::path config_file;
  fs::path out_dir;
  std::ostream& out;
  std::ostream& err;
};

namespace detail {

/// Files read and written by one command, for the manifest.
struct Record {
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;
  json extra = json::object();
};

inline void write_file(const fs::path& path, const std::string& content, Record& rec) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::io, "cannot write " + path.string());
  f << content;
  if (!f) throw Error(Errc::io, "write failed for " + path.string());
  rec.outputs.push_back(path);
}

inline std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::io, "cannot open " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

inline fs::path require_artifact(const Context& ctx, const std::string& name, std::string_view producer) {
  auto p = ctx.out_dir / name;
  if (!fs::exists(p)) {
    throw Error(Errc::io, fmt::format("{} not found in {}; run {} first", name, ctx.out_dir.string(), producer));
  }
  return p;
}

inline std::vector<FeatureRow> load_dataset(const Context& ctx, double km, Record& rec) {
  auto p = require_artifact(ctx, "dataset_" + km_tag(km) + ".csv", "build-dataset");
  rec.inputs.push_back(p);
  std::ifstream in(p, std::ios::binary);
  return read_dataset_csv(in);
}

inline void write_manifest(const Context& ctx, const std::string& command, const Record& rec) {
  const auto path = ctx.out_dir / "manifest.json";
  json m = json::object();
  if (fs::exists(path)) {
    try {
      m = json::parse(read_file(path));
    } catch (const json::exception&) {
      m = json::object();
    }
  }
  auto digest_map = [&](const std::vector<fs::path>& files, bool relative) {
    json d = json::object();
    for (const auto& f : files) {
      const auto key = relative ? fs::relative(f, ctx.out_dir).generic_string() : f.generic_string();
      d[key] = sha256_file(f);
    }
    return d;
  };
  std::vector<fs::path> inputs = ctx.cfg.input_files();
  if (!ctx.config_file.empty()) inputs.insert(inputs.begin(), fs::absolute(ctx.config_file).lexically_normal());
  inputs.insert(inputs.end(), rec.inputs.begin(), rec.inputs.end());
  m["commands"][command] = {{"config", ctx.cfg.to_json()},
                            {"inputs", digest_map(inputs, false)},
                            {"outputs", digest_map(rec.outputs, true)},
                            {"details", rec.extra}};
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::io, "cannot write " + path.string());
  f << m.dump(2) << '\n';
}

inline Grid make_grid(const RunConfig& cfg, double km) {
  std::optional<Polygon> mask;
  if (cfg.mask) mask = polygon_from_geojson(json::parse(read_file(*cfg.mask)));
  return build_grid(cfg.bbox, km, mask);
}

}  // namespace detail

inline int cmd_build_dataset(Context& ctx) {
  const auto& cfg = ctx.cfg;
  detail::Record rec;
  std::optional<std::uint64_t> seed;
  if (cfg.synthetic) seed = cfg.require_seed("build-dataset");
  const auto rules = cfg.keyword_rules ? KeywordRules::from_file(cfg.keyword_rules->string()) : KeywordRules::defaults();

  std::vector<ConflictEvent> loaded;
  if (!cfg.synthetic) {
    auto parsed = parse_events_file(cfg.events->string(), cfg.event_columns);
    for (const auto& s : parsed.skipped) ctx.err << fmt::format("warning: events line {}: {}\n", s.line, s.reason);
    for (const auto& w : parsed.warnings) ctx.err << "warning: " << w << '\n';
    loaded = filter_country(parsed.events, cfg.country_filter);
  }

  json details = json::object();
  for (double km : cfg.cell_km) {
    const auto grid = detail::make_grid(cfg, km);
    std::vector<CellSeries> series;
    std::vector<ConflictEvent> events = loaded;
    if (cfg.synthetic) {
      auto world = synth_country(*seed, grid, *cfg.synthetic);
      series = std::move(world.series);
      events = std::move(world.events);
    } else {
      for (const auto& [v, p] : cfg.series) {
        auto s = parse_series_file(p.string(), v, grid);
        series.insert(series.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
      }
    }
    const auto pastoral = filter_pastoral(events, cfg.window, rules);
    if (pastoral.empty()) ctx.err << fmt::format("warning: {}: no pastoral events; every label is 0\n", km_tag(km));
    auto result = assemble_dataset(grid, series, pastoral, cfg.window, cfg.worker_count());
    if (!result.skipped_events.empty()) {
      ctx.err << fmt::format("warning: {}: {} events outside the grid mask or window\n", km_tag(km),
                             result.skipped_events.size());
    }
    const auto tag = km_tag(km);
    std::ostringstream ds, ev;
    write_dataset_csv(ds, result.dataset);
    write_events(ev, pastoral);
    detail::write_file(ctx.out_dir / ("dataset_" + tag + ".csv"), ds.str(), rec);
    detail::write_file(ctx.out_dir / ("bin_edges_" + tag + ".json"),
                       edges_to_json(result.dataset.edges).dump(2) + "\n", rec);
    detail::write_file(ctx.out_dir / ("grid_" + tag + ".json"), grid.to_json().dump(2) + "\n", rec);
    detail::write_file(ctx.out_dir / ("events_" + tag + ".csv"), ev.str(), rec);
    const auto n = result.dataset.rows.size();
    const auto pos = result.dataset.positives();
    details[tag] = {{"cells", n}, {"positive", pos}, {"negative", n - pos},
                    {"pastoral_events", pastoral.size()}, {"clamped_samples", result.clamped_samples}};
    ctx.out << fmt::format("build-dataset {}: {}x{} grid, {} cells, {} positive, {} negative\n", tag,
                           grid.n_rows(), grid.n_cols(), n, pos, n - pos);
  }
  rec.extra = details;
  detail::write_manifest(ctx, "build-dataset", rec);
  return kOk;
}

inline int cmd_test_univariate(Context& ctx) {
  const auto& cfg = ctx.cfg;
  detail::Record rec;
  const auto family = stats::feature_family(cfg.univariate_family);
  for (double km : cfg.cell_km) {
    const auto rows = detail::load_dataset(ctx, km, rec);
    const auto results = stats::run_univariate(rows, family, cfg.bonferroni_m);
    std::ostringstream s;
    stats::write_univariate_csv(s, results, cfg.significance);
    detail::write_file(ctx.out_dir / ("univariate_" + km_tag(km) + ".csv"), s.str(), rec);
    std::size_t significant = 0;
    for (const auto& r : results) significant += r.p_bonferroni < 0.05 ? 1 : 0;
    ctx.out << fmt::format("test-univariate {}: {} features tested, {} with corrected p < 0.05\n",
                           km_tag(km), results.size(), significant);
  }
  detail::write_manifest(ctx, "test-univariate", rec);
  return kOk;
}

inline int cmd_learn_tree(Context& ctx) {
  const auto& cfg = ctx.cfg;
  detail::Record rec;
  auto params = cfg.tree;
  params.seed = cfg.require_seed("learn-tree");
  for (double km : cfg.cell_km) {
    const auto tag = km_tag(km);
    const auto rows = detail::load_dataset(ctx, km, rec);
    const auto data = to_labeled(rows);
    const auto tree = train_cart(data.x, data.y, params, {}, feature_names());
    const auto paths = hypotheses::extract_paths(tree, cfg.min_support, cfg.min_purity);
    json jp = json::array();
    for (std::size_t i = 0; i < paths.size(); ++i) {
      jp.push_back({{"name", fmt::format("Tree{}", i + 1)},
                    {"conditions", paths[i].predicate.to_json()},
                    {"leaf", paths[i].leaf},
                    {"n_samples", paths[i].n_samples},
                    {"n_class1", paths[i].n_class1}});
    }
    detail::write_file(ctx.out_dir / ("tree_" + tag + ".json"), tree.to_json().dump(2) + "\n", rec);
    detail::write_file(ctx.out_dir / ("tree_" + tag + ".dot"), tree.to_dot(), rec);
    detail::write_file(ctx.out_dir / ("paths_" + tag + ".json"), jp.dump(2) + "\n", rec);
    ctx.out << fmt::format("learn-tree {}: {} nodes, depth {}, {} hypotheses\n", tag, tree.nodes().size(),
                           tree.depth(), paths.size());
    for (std::size_t i = 0; i < paths.size(); ++i) {
      ctx.out << fmt::format("  Tree{}: {} ({} of {} in class 1)\n", i + 1, paths[i].predicate.to_string(),
                             paths[i].n_class1, paths[i].n_samples);
    }
  }
  detail::write_manifest(ctx, "learn-tree", rec);
  return kOk;
}

struct EvalOptions {
  std::string which = "builtin";  // builtin | tree
  std::optional<std::string> hypothesis;
  bool golden = false;
};

inline int cmd_eval_golden(Context& ctx, const EvalOptions& opt) {
  detail::Record rec;
  const auto builtins = hypotheses::builtin_hypotheses();
  if (opt.hypothesis && !builtins.contains(*opt.hypothesis)) {
    throw UsageError("unknown hypothesis '" + *opt.hypothesis + "'");
  }
  std::vector<hypotheses::ReportRow> rows;
  bool all_ok = true;
  std::size_t n = 0, matched = 0;
  for (int k = 3; k <= 10; ++k) {
    const auto& h = builtins.at(fmt::format("Hyp{}", k));
    if (opt.hypothesis && *opt.hypothesis != h.name) continue;
    const auto g = hypotheses::check_golden(h);
    rows.push_back({h.country, h.name, g.result, ""});
    ++n;
    matched += g.or_ok ? 1 : 0;
    all_ok = all_ok && g.ok();
    ctx.out << fmt::format("{} {}: OR {:.2f} (expected {}), CI {:.6g}-{:.6g} (expected {}-{}), p {:.2E} "
                           "(expected {:.2E}) {}\n",
                           h.name, h.country, g.result.test.odds_ratio, h.expected.odds_ratio,
                           g.result.test.ci_low, g.result.test.ci_high, h.expected.ci_low,
                           h.expected.ci_high, g.result.test.p, h.expected.p, g.ok() ? "ok" : "MISMATCH");
  }
  std::ostringstream s;
  hypotheses::write_table_csv(s, rows);
  detail::write_file(ctx.out_dir / "golden_hypotheses.csv", s.str(), rec);
  ctx.out << fmt::format("eval-hypotheses --golden: {}/{} odds ratios match\n", matched, n);
  rec.extra = {{"matched", matched}, {"total", n}};
  detail::write_manifest(ctx, "eval-hypotheses-golden", rec);
  return all_ok ? kOk : kComputation;
}

inline int cmd_eval_hypotheses(Context& ctx, const EvalOptions& opt) {
  if (opt.golden) return cmd_eval_golden(ctx, opt);
  if (opt.which != "builtin" && opt.which != "tree") {
    throw UsageError("--which must be 'builtin' or 'tree'");
  }
  const auto& cfg = ctx.cfg;
  detail::Record rec;
  const auto builtins = hypotheses::builtin_hypotheses();
  if (opt.which == "builtin" && opt.hypothesis && !builtins.contains(*opt.hypothesis)) {
    throw UsageError("unknown hypothesis '" + *opt.hypothesis + "'");
  }
  for (double km : cfg.cell_km) {
    const auto tag = km_tag(km);
    std::vector<std::pair<std::string, hypotheses::HypothesisPredicate>> preds;
    if (opt.which == "builtin") {
      for (int k = 3; k <= 10; ++k) {
        const auto& h = builtins.at(fmt::format("Hyp{}", k));
        if (!opt.hypothesis || *opt.hypothesis == h.name) preds.emplace_back(h.name, h.predicate);
      }
    } else {
      auto p = detail::require_artifact(ctx, "paths_" + tag + ".json", "learn-tree");
      rec.inputs.push_back(p);
      const auto jp = json::parse(detail::read_file(p));
      for (const auto& e : jp) {
        auto name = e.at("name").get<std::string>();
        if (!opt.hypothesis || *opt.hypothesis == name) {
          preds.emplace_back(name, hypotheses::HypothesisPredicate::from_json(e.at("conditions")));
        }
      }
      if (opt.hypothesis && preds.empty()) throw UsageError("unknown hypothesis '" + *opt.hypothesis + "'");
    }
    const auto rows = detail::load_dataset(ctx, km, rec);
    const auto data = to_labeled(rows);
    std::vector<hypotheses::ReportRow> report;
    for (const auto& [name, pred] : preds) {
      hypotheses::ReportRow row{cfg.country, name, std::nullopt, ""};
      try {
        row.eval = hypotheses::evaluate_hypothesis(pred, data.x, data.y);
        const auto& e = *row.eval;
        ctx.out << fmt::format("{} {}: S {} ({} attacks), S-bar {} ({} attacks), OR {:.4g}, p {:.3g}\n",
                               tag, name, e.table.size_s(), e.table.a, e.table.size_sbar(), e.table.c,
                               e.test.odds_ratio, e.test.p);
      } catch (const Error& ex) {
        if (ex.code() != Errc::degenerate_partition && ex.code() != Errc::undefined_test) throw;
        row.note = ex.what();
        ctx.err << fmt::format("warning: {} {}: {}\n", tag, name, ex.what());
      }
      report.push_back(std::move(row));
    }
    std::ostringstream s;
    hypotheses::write_table_csv(s, report);
    detail::write_file(ctx.out_dir / ("hypotheses_" + opt.which + "_" + tag + ".csv"), s.str(), rec);
  }
  detail::write_manifest(ctx, "eval-hypotheses-" + opt.which, rec);
  return kOk;
}

inline int cmd_train_suite(Context& ctx) {
  const auto& cfg = ctx.cfg;
  detail::Record rec;
  const auto seed = cfg.require_seed("train-suite");
  auto specs = cfg.classifiers.empty() ? ml::default_specs(seed) : cfg.classifiers;
  for (auto& s : specs) s.seed = seed;
  std::ostringstream all, best;
  all << "Granularity,Classifier,Precision,Recall,F1-Score,AUC\n";
  best << "Granularity,Classifier,Precision,Recall,F1-Score,AUC\n";
  json meta = json::object();
  for (double km : cfg.cell_km) {
    const auto tag = km_tag(km);
    const auto rows = detail::load_dataset(ctx, km, rec);
    const auto report = ml::run_suite(to_labeled(rows), specs, {cfg.test_fraction, seed});
    std::ostringstream s;
    ml::write_report_csv(s, report);
    detail::write_file(ctx.out_dir / ("suite_" + tag + ".csv"), s.str(), rec);
    for (const auto& r : report.rows) all << tag << ',' << ml::format_row(r) << '\n';
    const auto& b = report.best();
    best << tag << ',' << ml::format_row(b) << '\n';
    meta[tag] = {{"split", report.split}, {"n_train", report.n_train}, {"n_test", report.n_test},
                 {"seed", seed}, {"best", b.classifier}};
    ctx.out << fmt::format("train-suite {}: best {} (F1 {:.2f}, AUC {})\n", tag, b.classifier,
                           b.metrics.f1, ml::format_metric(b.metrics.auc));
  }
  detail::write_file(ctx.out_dir / "suite_all.csv", all.str(), rec);
  detail::write_file(ctx.out_dir / "suite_best.csv", best.str(), rec);
  detail::write_file(ctx.out_dir / "suite_meta.json", meta.dump(2) + "\n", rec);
  detail::write_manifest(ctx, "train-suite", rec);
  return kOk;
}

inline int cmd_riskmap(Context& ctx) {
  const auto& cfg = ctx.cfg;
  detail::Record rec;
  auto spec = cfg.risk_classifier;
  spec.seed = cfg.require_seed("riskmap");
  for (double km : cfg.cell_km) {
    const auto tag = km_tag(km);
    auto gp = detail::require_artifact(ctx, "grid_" + tag + ".json", "build-dataset");
    rec.inputs.push_back(gp);
    const auto grid = Grid::from_json(json::parse(detail::read_file(gp)));
    const auto rows = detail::load_dataset(ctx, km, rec);
    const auto data = to_labeled(rows);
    const auto model = ml::train(spec, data.x, data.y);
    const auto scores = model.predict_proba(data.x);
    auto surface = RiskSurface::empty(grid, {spec.name(), km, format_date(cfg.window.last)});
    for (std::size_t i = 0; i < rows.size(); ++i) surface.set(rows[i].cell, scores[i]);
    surface.validate();
    std::ostringstream pgm, csv;
    render_pgm(pgm, surface);
    write_risk_csv(csv, surface);
    detail::write_file(ctx.out_dir / ("risk_" + tag + ".geojson"), render_geojson(surface).dump(1) + "\n", rec);
    detail::write_file(ctx.out_dir / ("risk_" + tag + ".pgm"), pgm.str(), rec);
    detail::write_file(ctx.out_dir / ("risk_" + tag + ".csv"), csv.str(), rec);
    detail::write_file(ctx.out_dir / ("model_" + tag + ".json"), model.to_json().dump() + "\n", rec);
    ctx.out << fmt::format("riskmap {}: {} cells scored with {}\n", tag, rows.size(), spec.name());
  }
  detail::write_manifest(ctx, "riskmap", rec);
  return kOk;
}

}  // namespace pcrisk::pipeline

#endif  // PCRISK_PIPELINE_HPP
