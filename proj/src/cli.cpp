#include "patchscope/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "patchscope/experiment.hpp"
#include "patchscope/image_io.hpp"
#include "patchscope/parallel.hpp"
#include "patchscope/plots.hpp"

namespace patchscope {

using json = nlohmann::json;
namespace fs = std::filesystem;

void ExperimentConfig::validate() const {
  if (strategies.empty()) throw std::invalid_argument("config: strategy list is empty");
  for (const auto& s : strategies) s.validate();
  train.validate();
  augment.validate();
  if (workers < 1) throw std::invalid_argument("config: workers must be >= 1");
  if (layout.grid < 1 || layout.bins < 1 || layout.bins > 256)
    throw std::invalid_argument("config: feature grid and bins must be positive (bins <= 256)");
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument("config: " + where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (std::find_if(keys.begin(), keys.end(), [&](const char* key) { return k == key; }) == keys.end())
      throw std::invalid_argument("config: unknown key '" + k + "' in " + where);
}

template <typename T>
void read(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

json strategy_json(const StrategyConfig& s) {
  return {{"name", s.name()},
          {"vote_threshold", s.vote_threshold},
          {"coverage_threshold", s.coverage_threshold},
          {"background_threshold", s.background_threshold},
          {"aggregation", s.aggregation == Aggregation::HardVote ? "hard-vote" : "mean-probability"}};
}

StrategyConfig strategy_from_json(const json& j) {
  if (j.is_string()) return StrategyConfig::parse(j.get<std::string>());
  reject_unknown(j, {"name", "vote_threshold", "coverage_threshold", "background_threshold", "aggregation"},
                 "strategy");
  StrategyConfig s = StrategyConfig::parse(j.at("name").get<std::string>());
  read(j, "vote_threshold", s.vote_threshold);
  read(j, "coverage_threshold", s.coverage_threshold);
  read(j, "background_threshold", s.background_threshold);
  if (j.contains("aggregation")) {
    const auto a = j.at("aggregation").get<std::string>();
    if (a == "hard-vote") {
      s.aggregation = Aggregation::HardVote;
    } else if (a == "mean-probability") {
      s.aggregation = Aggregation::MeanProbability;
    } else {
      throw std::invalid_argument("config: unknown aggregation '" + a + "'");
    }
  }
  s.validate();
  return s;
}

}  // namespace

json config_json(const ExperimentConfig& cfg) {
  json strategies = json::array();
  for (const auto& s : cfg.strategies) strategies.push_back(strategy_json(s));
  return {{"manifest", cfg.manifest.generic_string()},
          {"strategies", strategies},
          {"train",
           {{"epochs", cfg.train.epochs},
            {"learning_rate", cfg.train.learning_rate},
            {"batch_size", cfg.train.batch_size},
            {"l2", cfg.train.l2},
            {"average_epochs", cfg.train.average_epochs},
            {"standardize", cfg.train.standardize}}},
          {"augment",
           {{"right_angles", cfg.augment.right_angles},
            {"max_extra_rotation_deg", cfg.augment.max_extra_rotation_deg},
            {"max_translation", cfg.augment.max_translation},
            {"scale_lo", cfg.augment.scale_lo},
            {"scale_hi", cfg.augment.scale_hi},
            {"flip_h", cfg.augment.flip_h},
            {"flip_v", cfg.augment.flip_v}}},
          {"split",
           {{"train_per_class", cfg.split.train_per_class},
            {"val_per_class", cfg.split.val_per_class},
            {"per_resolution", cfg.split.per_resolution_counts}}},
          {"features", {{"grid", cfg.layout.grid}, {"bins", cfg.layout.bins}}},
          {"output_dir", cfg.output_dir.generic_string()},
          {"workers", cfg.workers},
          {"master_seed", cfg.master_seed}};
}

ExperimentConfig config_from_json(const json& j) {
  reject_unknown(j, {"manifest", "strategies", "train", "augment", "split", "features", "output_dir", "workers",
                     "master_seed"},
                 "config");
  ExperimentConfig cfg;
  try {
    if (j.contains("manifest")) cfg.manifest = j.at("manifest").get<std::string>();
    if (j.contains("strategies")) {
      cfg.strategies.clear();
      for (const auto& s : j.at("strategies")) cfg.strategies.push_back(strategy_from_json(s));
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      reject_unknown(t, {"epochs", "learning_rate", "batch_size", "l2", "average_epochs", "standardize"}, "train");
      read(t, "epochs", cfg.train.epochs);
      read(t, "learning_rate", cfg.train.learning_rate);
      read(t, "batch_size", cfg.train.batch_size);
      read(t, "l2", cfg.train.l2);
      read(t, "average_epochs", cfg.train.average_epochs);
      read(t, "standardize", cfg.train.standardize);
    }
    if (j.contains("augment")) {
      const auto& a = j.at("augment");
      reject_unknown(a, {"right_angles", "max_extra_rotation_deg", "max_translation", "scale_lo", "scale_hi",
                         "flip_h", "flip_v"},
                     "augment");
      read(a, "right_angles", cfg.augment.right_angles);
      read(a, "max_extra_rotation_deg", cfg.augment.max_extra_rotation_deg);
      read(a, "max_translation", cfg.augment.max_translation);
      read(a, "scale_lo", cfg.augment.scale_lo);
      read(a, "scale_hi", cfg.augment.scale_hi);
      read(a, "flip_h", cfg.augment.flip_h);
      read(a, "flip_v", cfg.augment.flip_v);
    }
    if (j.contains("split")) {
      const auto& s = j.at("split");
      reject_unknown(s, {"train_per_class", "val_per_class", "per_resolution"}, "split");
      read(s, "train_per_class", cfg.split.train_per_class);
      read(s, "val_per_class", cfg.split.val_per_class);
      read(s, "per_resolution", cfg.split.per_resolution_counts);
    }
    if (j.contains("features")) {
      const auto& f = j.at("features");
      reject_unknown(f, {"grid", "bins"}, "features");
      read(f, "grid", cfg.layout.grid);
      read(f, "bins", cfg.layout.bins);
    }
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    read(j, "workers", cfg.workers);
    read(j, "master_seed", cfg.master_seed);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  cfg.split.seed = SeedPlan::from_master(cfg.master_seed).split;
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  if (path.extension() == ".toml")
    throw std::runtime_error("config " + path.string() + ": TOML is not supported, use JSON");
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config " + path.string() + " does not exist or is unreadable");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error("config " + path.string() + ": " + e.what());
  }
  ExperimentConfig cfg = config_from_json(j);
  if (!cfg.manifest.empty() && !fs::exists(cfg.manifest))
    throw std::runtime_error("config " + path.string() + ": manifest " + cfg.manifest.string() + " does not exist");
  return cfg;
}

namespace {

// CLI11 consumes its argument vector back to front.
int parse_args(CLI::App& app, const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
               bool& done) {
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  done = false;
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    done = true;
    return app.exit(e, out, err);
  }
  return 0;
}

std::pair<int, int> parse_dims(const std::string& text) {
  const auto r = ResolutionClass::parse(text);
  return {r.width, r.height};
}

void ensure_writable_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw std::runtime_error("cannot create output directory " + dir.string());
  const fs::path probe = dir / ".patchscope-write-test";
  {
    std::ofstream f(probe);
    if (!f) throw std::runtime_error("output directory " + dir.string() + " is not writable");
  }
  fs::remove(probe, ec);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("error writing " + path.string());
}

std::vector<ImageItem> items_of(const Manifest& m) {
  std::vector<ImageItem> items;
  items.reserve(m.size());
  for (const auto& e : m) items.push_back({e.image_id, e.label, [path = e.path] { return read_image(path); }});
  return items;
}

ExperimentSettings settings_of(const ExperimentConfig& cfg) {
  ExperimentSettings s;
  s.strategies = cfg.strategies;
  s.train = cfg.train;
  s.augment = cfg.augment;
  s.layout = cfg.layout;
  s.workers = cfg.workers;
  s.master_seed = cfg.master_seed;
  return s;
}

// Shared by run and train: config file plus flag overrides.
struct ConfigFlags {
  std::string config_path, manifest, out;
  std::vector<std::string> strategies;
  std::optional<int> workers, epochs;
  std::optional<std::uint64_t> seed;

  void add(CLI::App& app) {
    app.add_option("--config", config_path, "JSON experiment config");
    app.add_option("--manifest", manifest, "manifest CSV (overrides config)");
    app.add_option("--out", out, "output directory (overrides config)");
    app.add_option("--strategy", strategies, "strategy name, repeatable (overrides config)");
    app.add_option("--workers", workers, "worker threads (default PATCHSCOPE_THREADS or 1)");
    app.add_option("--epochs", epochs, "training epochs (overrides config)");
    app.add_option("--seed", seed, "master seed (overrides config)");
  }

  ExperimentConfig resolve() const {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    if (!manifest.empty()) cfg.manifest = manifest;
    if (!out.empty()) cfg.output_dir = out;
    if (!strategies.empty()) {
      cfg.strategies.clear();
      for (const auto& s : strategies) cfg.strategies.push_back(StrategyConfig::parse(s));
    }
    if (workers) cfg.workers = *workers;
    if (epochs) cfg.train.epochs = *epochs;
    if (seed) cfg.master_seed = *seed;
    cfg.split.seed = SeedPlan::from_master(cfg.master_seed).split;
    if (cfg.manifest.empty()) throw std::invalid_argument("no manifest given (use --manifest or a config)");
    if (!fs::exists(cfg.manifest)) throw std::runtime_error("manifest " + cfg.manifest.string() + " does not exist");
    cfg.validate();
    return cfg;
  }
};

}  // namespace

int cmd_synth(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Generate synthetic images with planted features", "patchscope synth");
  std::string pattern_name = "global", dims = "1024x1024", out_dir, labels = "alternating";
  int n = 20, start = 0;
  std::uint64_t seed = 0;
  std::optional<int> feature_size, mark_size, workers;
  std::optional<double> density;
  app.add_option("--pattern", pattern_name, "local, edge, half or global")->capture_default_str();
  app.add_option("--n", n, "number of images")->capture_default_str();
  app.add_option("--start", start, "index of the first image")->capture_default_str();
  app.add_option("--dims", dims, "WxH")->capture_default_str();
  app.add_option("--seed", seed, "generator seed")->capture_default_str();
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--labels", labels, "alternating, positive or negative")->capture_default_str();
  app.add_option("--feature-size", feature_size, "cluster diameter or edge band width in pixels");
  app.add_option("--density", density, "fraction of the feature region covered by marks");
  app.add_option("--mark-size", mark_size, "mark diameter in pixels");
  app.add_option("--workers", workers, "worker threads (default PATCHSCOPE_THREADS or 1)");
  bool done;
  if (const int rc = parse_args(app, args, out, err, done); done) return rc;

  try {
    SynthPattern pattern = SynthPattern::defaults(pattern_from_string(pattern_name));
    if (feature_size) pattern.feature_size = *feature_size;
    if (density) pattern.feature_density = *density;
    if (mark_size) pattern.mark_size = *mark_size;
    pattern.validate();
    LabelRule rule;
    if (labels == "alternating") {
      rule = LabelRule::Alternating;
    } else if (labels == "positive") {
      rule = LabelRule::AllPositive;
    } else if (labels == "negative") {
      rule = LabelRule::AllNegative;
    } else {
      throw std::invalid_argument("unknown label rule '" + labels + "'");
    }
    if (n < 1) throw std::invalid_argument("--n must be positive");
    if (start < 0) throw std::invalid_argument("--start must be non-negative");
    const auto [width, height] = parse_dims(dims);
    check_synth_geometry(pattern, width, height);
    const fs::path dir(out_dir);
    ensure_writable_dir(dir);

    Manifest manifest(static_cast<std::size_t>(n));
    parallel_for(static_cast<std::size_t>(n), workers.value_or(default_workers(1)), [&](std::size_t k) {
      const int index = start + static_cast<int>(k);
      const Label label = synth_label(rule, index);
      const SynthSample s = synth_image(pattern, index, label, width, height, seed);
      const std::string id = s.truth.image_id;
      write_png(s.image, dir / (id + ".png"));
      write_text(dir / (id + ".json"), to_json(s.truth).dump(2) + "\n");
      manifest[k] = {id, id + ".png", label, ResolutionClass::of_dims(width, height)};
    });
    write_manifest(dir / "manifest.csv", manifest);
    const auto positives = std::count_if(manifest.begin(), manifest.end(),
                                         [](const auto& e) { return is_positive(e.label); });
    out << "synth: wrote " << n << " " << to_string(pattern.kind) << " images (" << positives << " ActiveEoE, "
        << n - positives << " NonEoE) at " << width << "x" << height << " to " << dir.string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    err << "synth: " << e.what() << "\n";
    return 1;
  }
}

int cmd_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Split, train, evaluate and report every strategy", "patchscope run");
  ConfigFlags flags;
  flags.add(app);
  std::string control;
  bool svg = false;
  app.add_option("--control", control, "set to random-labels to add the random-label control");
  app.add_flag("--svg", svg, "also write ROC and histogram SVGs");
  bool done;
  if (const int rc = parse_args(app, args, out, err, done); done) return rc;

  ExperimentConfig cfg;
  try {
    if (!control.empty() && control != "random-labels")
      throw std::invalid_argument("unknown control '" + control + "'");
    cfg = flags.resolve();
    ensure_writable_dir(cfg.output_dir);
  } catch (const std::exception& e) {
    err << "run: " << e.what() << "\n";
    return 1;
  }

  json errors = json::array();
  try {
    const Manifest manifest = read_manifest(cfg.manifest);
    const Split split = balanced_split(manifest, cfg.split);
    ExperimentSettings settings = settings_of(cfg);
    settings.random_label_control = !control.empty();
    const auto results = run_strategies(items_of(split.train), items_of(split.validation), settings);

    json report = report_json(results, cfg.master_seed);
    json config = config_json(cfg);
    config.erase("workers");
    config.erase("output_dir");
    report["config"] = config;
    report["split"] = {{"train", split.train.size()}, {"validation", split.validation.size()}};
    write_text(cfg.output_dir / "report.json", report.dump(2) + "\n");

    std::ostringstream jsonl;
    for (const auto& r : results) write_predictions_jsonl(jsonl, r.predictions);
    write_text(cfg.output_dir / "predictions.jsonl", jsonl.str());
    if (svg) {
      write_text(cfg.output_dir / "roc.svg", roc_svg(results));
      for (const auto& r : results)
        write_text(cfg.output_dir / ("hist_" + r.strategy.name() + ".svg"), histogram_svg(r));
    }

    out << metrics_table_header() << "\n";
    for (const auto& r : results) {
      if (r.image_metrics) {
        out << metrics_table_row(r.strategy.name(), r.image_metrics->metrics) << "\n";
      } else {
        out << r.strategy.name() << ": no determinate predictions\n";
      }
      if (r.control)
        out << "  random-label control: central band mass " << format_fraction(r.control->central_band_mass)
            << " (true labels " << (r.central_band_mass ? format_fraction(*r.central_band_mass) : "undefined")
            << ")\n";
    }
    errors = report.at("errors");
  } catch (const std::exception& e) {
    errors.push_back({{"message", e.what()}});
    json partial = {{"schema_version", kReportSchemaVersion},
                    {"master_seed", cfg.master_seed},
                    {"strategies", json::array()},
                    {"errors", errors}};
    try {
      write_text(cfg.output_dir / "report.json", partial.dump(2) + "\n");
    } catch (const std::exception&) {
    }
  }

  if (!errors.empty()) {
    try {
      write_text(cfg.output_dir / "errors.json", errors.dump(2) + "\n");
    } catch (const std::exception&) {
    }
    for (const auto& e : errors) {
      err << "run: ";
      if (e.contains("image_id")) err << e.at("strategy").get<std::string>() << " " << e.at("image_id").get<std::string>() << ": ";
      err << e.at("message").get<std::string>() << "\n";
    }
    return 1;
  }
  return 0;
}

int cmd_eval(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Recompute metrics from stored predictions", "patchscope eval");
  std::string predictions_path, manifest_path, report_path;
  app.add_option("--predictions", predictions_path, "predictions JSONL")->required();
  app.add_option("--manifest", manifest_path, "truth manifest CSV")->required();
  app.add_option("--out", report_path, "write the evaluation report JSON here");
  bool done;
  if (const int rc = parse_args(app, args, out, err, done); done) return rc;

  try {
    std::ifstream in(predictions_path);
    if (!in) throw std::runtime_error("cannot read predictions " + predictions_path);
    auto preds = read_predictions_jsonl(in);
    if (preds.empty()) throw std::runtime_error("predictions file " + predictions_path + " is empty");

    std::map<std::string, Label> truth;
    for (const auto& e : read_manifest(manifest_path)) truth[e.image_id] = e.label;
    std::set<std::string> orphans;
    for (auto& p : preds) {
      const auto it = truth.find(p.image_id);
      if (it == truth.end()) {
        orphans.insert(p.image_id);
      } else {
        p.truth = it->second;
      }
    }
    if (!orphans.empty()) {
      err << "eval: " << orphans.size() << " prediction id(s) missing from the manifest:";
      for (const auto& id : orphans) err << " " << id;
      err << "\n";
      return 1;
    }

    // Group by strategy, keeping first-seen order.
    std::vector<std::string> order;
    std::map<std::string, std::vector<ImagePrediction>> groups;
    for (auto& p : preds) {
      if (!groups.contains(p.strategy)) order.push_back(p.strategy);
      groups[p.strategy].push_back(std::move(p));
    }
    json blocks = json::array();
    out << metrics_table_header() << "\n";
    for (const auto& name : order) {
      const auto& group = groups[name];
      const auto outcomes = image_outcomes(group);
      const std::string label = name.empty() ? "-" : name;
      if (count_outcomes(outcomes).total() == 0) {
        out << label << ": no determinate predictions (" << group.size() << " indeterminate)\n";
        blocks.push_back({{"strategy", name}, {"image_metrics", "undefined"}, {"indeterminate", group.size()}});
        continue;
      }
      const auto result = compute_metrics(outcomes);
      out << metrics_table_row(label, result.metrics) << "\n";
      if (result.indeterminate > 0) out << "  indeterminate: " << result.indeterminate << "\n";
      json block = {{"strategy", name}, {"image_metrics", metrics_json(result)}};
      const auto patches = patch_outcomes(group);
      if (!patches.empty()) block["patch_metrics"] = metrics_json(compute_metrics(patches));
      blocks.push_back(std::move(block));
    }
    if (!report_path.empty()) {
      const json report = {{"schema_version", kReportSchemaVersion}, {"strategies", blocks}, {"errors", json::array()}};
      write_text(report_path, report.dump(2) + "\n");
    }
    return 0;
  } catch (const std::exception& e) {
    err << "eval: " << e.what() << "\n";
    return 1;
  }
}

int cmd_train(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Train one strategy's classifier on the training split", "patchscope train");
  ConfigFlags flags;
  flags.add(app);
  std::string checkpoint;
  app.add_option("--checkpoint", checkpoint, "model JSON to write (default <out>/model_<strategy>.json)");
  bool done;
  if (const int rc = parse_args(app, args, out, err, done); done) return rc;

  try {
    const ExperimentConfig cfg = flags.resolve();
    if (cfg.strategies.size() != 1 && !checkpoint.empty())
      throw std::invalid_argument("--checkpoint needs exactly one strategy");
    const Manifest manifest = read_manifest(cfg.manifest);
    const Split split = balanced_split(manifest, cfg.split);
    const auto items = items_of(split.train);
    const auto sets = collect_training_features(items, cfg.strategies, cfg.layout, cfg.augment,
                                                SeedPlan::from_master(cfg.master_seed).augment, cfg.workers);
    const SeedPlan seeds = SeedPlan::from_master(cfg.master_seed);
    const AugmentSpec per_epoch = split_augment(cfg.augment).second;
    for (std::size_t s = 0; s < cfg.strategies.size(); ++s) {
      const auto& strat = cfg.strategies[s];
      TrainConfig tc = cfg.train;
      tc.seed = seeds.train_for(strat);
      const ToyClassifier model = train(ToyClassifier(strat.input_size(), cfg.layout), sets[s], tc, per_epoch);
      fs::path path = checkpoint;
      if (path.empty()) {
        ensure_writable_dir(cfg.output_dir);
        path = cfg.output_dir / ("model_" + strat.name() + ".json");
      }
      model.save(path);
      out << "train: " << strat.name() << " on " << sets[s].size() << " inputs, final loss "
          << format_fraction(mean_loss(model, sets[s], tc.l2)) << ", wrote " << path.string() << "\n";
    }
    return 0;
  } catch (const std::exception& e) {
    err << "train: " << e.what() << "\n";
    return 1;
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  static const char* usage =
      "usage: patchscope <synth|run|eval|train> [options]\n"
      "       patchscope <command> --help\n";
  if (args.empty()) {
    err << usage;
    return 2;
  }
  const std::vector<std::string> rest(args.begin() + 1, args.end());
  const std::string& cmd = args.front();
  if (cmd == "synth") return cmd_synth(rest, out, err);
  if (cmd == "run") return cmd_run(rest, out, err);
  if (cmd == "eval") return cmd_eval(rest, out, err);
  if (cmd == "train") return cmd_train(rest, out, err);
  if (cmd == "--help" || cmd == "-h" || cmd == "help") {
    out << usage;
    return 0;
  }
  err << "unknown command '" << cmd << "'\n" << usage;
  return 2;
}

}  // namespace patchscope
