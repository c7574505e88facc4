#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "patchscope/cli.hpp"
#include "patchscope/experiment.hpp"

using namespace patchscope;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("patchscope_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct Run {
  int rc;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int rc = run_cli(args, out, err);
  return {rc, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ImagePrediction determinate(const std::string& id, Label label) {
  ImagePrediction p;
  p.image_id = id;
  p.strategy = "full-1000";
  p.patch_probs = {{0, label == Label::ActiveEoE ? 0.8 : 0.2}};
  p.votes_active = label == Label::ActiveEoE;
  p.votes_total = 1;
  p.label = label;
  return p;
}

// 63 + 63 images with the given confusion counts.
void write_counts_fixture(const fs::path& dir, const ConfusionCounts& c, bool add_indeterminate) {
  Manifest m;
  std::vector<ImagePrediction> preds;
  int k = 0;
  auto add = [&](Label truth, Label predicted, long long n) {
    for (long long i = 0; i < n; ++i, ++k) {
      const std::string id = "img" + std::to_string(1000 + k);
      m.push_back({id, id + ".png", truth, ResolutionClass::parse("R2")});
      preds.push_back(determinate(id, predicted));
    }
  };
  add(Label::ActiveEoE, Label::ActiveEoE, c.tp);
  add(Label::ActiveEoE, Label::NonEoE, c.fn);
  add(Label::NonEoE, Label::NonEoE, c.tn);
  add(Label::NonEoE, Label::ActiveEoE, c.fp);
  if (add_indeterminate) {
    m.push_back({"blank", "blank.png", Label::ActiveEoE, ResolutionClass::parse("R2")});
    ImagePrediction p;
    p.image_id = "blank";
    p.strategy = "full-1000";
    p.status = PredictionStatus::Indeterminate;
    p.message = "no tissue patches";
    preds.push_back(p);
  }
  write_manifest(dir / "truth.csv", m);
  std::ofstream out(dir / "preds.jsonl");
  write_predictions_jsonl(out, preds);
}

}  // namespace

TEST_CASE("config round trip") {
  ExperimentConfig cfg;
  cfg.manifest = "data/manifest.csv";
  cfg.strategies = {StrategyConfig::parse("patch-448"), StrategyConfig::parse("full-224")};
  cfg.strategies[0].aggregation = Aggregation::MeanProbability;
  cfg.strategies[1].vote_threshold = 0.6;
  cfg.train.epochs = 7;
  cfg.train.l2 = 1e-3;
  cfg.train.average_epochs = 2;
  cfg.train.standardize = false;
  cfg.augment.max_translation = 0.2;
  cfg.augment.right_angles = {0, 180};
  cfg.split = SplitSpec{10, 4, {{"R1", 6}, {"R3", 8}}, 0};
  cfg.layout = {2, 16};
  cfg.output_dir = "results";
  cfg.workers = 3;
  cfg.master_seed = 99;
  cfg.split.seed = SeedPlan::from_master(99).split;

  const json j = config_json(cfg);
  const ExperimentConfig back = config_from_json(j);
  CHECK(back == cfg);
  CHECK(config_json(back) == j);
  CHECK(config_from_json(json::parse(j.dump())) == cfg);
}

TEST_CASE("config rejects unknown keys, TOML and missing manifests") {
  CHECK_THROWS_AS(config_from_json(json{{"manfest", "x"}}), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(json{{"train", {{"epoch", 3}}}}), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(json{{"strategies", json::array()}}), std::invalid_argument);
  const auto dir = scratch("config");
  std::ofstream(dir / "c.toml") << "manifest = 'x'\n";
  CHECK_THROWS(load_config(dir / "c.toml"));
  std::ofstream(dir / "c.json") << json{{"manifest", (dir / "nope.csv").string()}}.dump();
  CHECK_THROWS(load_config(dir / "c.json"));
}

TEST_CASE("synth writes the requested count deterministically") {
  const auto a = scratch("synth_a"), b = scratch("synth_b");
  const std::vector<std::string> base{"synth", "--pattern", "global", "--n", "6", "--dims", "256x256", "--seed", "7"};
  auto args_a = base, args_b = base;
  args_a.insert(args_a.end(), {"--out", a.string()});
  args_b.insert(args_b.end(), {"--out", b.string(), "--workers", "3"});
  const Run ra = cli(args_a), rb = cli(args_b);
  REQUIRE(ra.rc == 0);
  REQUIRE(rb.rc == 0);
  CHECK(ra.out.find("synth: wrote 6") == 0);
  const Manifest m = read_manifest(a / "manifest.csv");
  CHECK(m.size() == 6);
  int pngs = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    if (e.path().extension() == ".png") ++pngs;
    CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
  }
  CHECK(pngs == 6);
}

TEST_CASE("synth reports infeasible geometry and bad arguments") {
  const auto dir = scratch("synth_bad");
  const Run r = cli({"synth", "--pattern", "local", "--feature-size", "2048", "--dims", "512x512", "--n", "2", "--out",
                     dir.string()});
  CHECK(r.rc != 0);
  CHECK_FALSE(r.err.empty());
  CHECK(cli({"synth", "--pattern", "spiral", "--out", dir.string()}).rc != 0);
  CHECK(cli({"synth", "--n", "2"}).rc != 0);
  CHECK(cli({"frobnicate"}).rc == 2);
}

TEST_CASE("eval reproduces the first published row") {
  const auto dir = scratch("eval");
  write_counts_fixture(dir, {47, 16, 61, 2}, false);
  const Run r = cli({"eval", "--predictions", (dir / "preds.jsonl").string(), "--manifest", (dir / "truth.csv").string(),
                     "--out", (dir / "eval.json").string()});
  REQUIRE(r.rc == 0);
  CHECK(r.out.find("74.6%") != std::string::npos);
  CHECK(r.out.find("96.8%") != std::string::npos);
  CHECK(r.out.find("85.7%") != std::string::npos);
  CHECK(r.out.find("0.39") != std::string::npos);
  CHECK(r.out.find("indeterminate") == std::string::npos);
  const json report = json::parse(slurp(dir / "eval.json"));
  CHECK(report.at("strategies").at(0).at("image_metrics").at("counts").at("tp") == 47);
}

TEST_CASE("eval excludes and counts an Indeterminate entry") {
  const auto dir = scratch("eval_indet");
  write_counts_fixture(dir, {52, 11, 55, 8}, true);
  const Run r = cli({"eval", "--predictions", (dir / "preds.jsonl").string(), "--manifest", (dir / "truth.csv").string()});
  REQUIRE(r.rc == 0);
  CHECK(r.out.find("84.9%") != std::string::npos);
  CHECK(r.out.find("indeterminate: 1") != std::string::npos);
}

TEST_CASE("eval errors: empty predictions and orphan ids") {
  const auto dir = scratch("eval_err");
  write_counts_fixture(dir, {1, 1, 1, 1}, false);
  std::ofstream(dir / "empty.jsonl").close();
  CHECK(cli({"eval", "--predictions", (dir / "empty.jsonl").string(), "--manifest", (dir / "truth.csv").string()}).rc != 0);

  {
    std::ofstream out(dir / "preds.jsonl", std::ios::app);
    out << prediction_json(determinate("ghost", Label::ActiveEoE)).dump() << "\n";
  }
  const Run r = cli({"eval", "--predictions", (dir / "preds.jsonl").string(), "--manifest", (dir / "truth.csv").string()});
  CHECK(r.rc != 0);
  CHECK(r.err.find("ghost") != std::string::npos);
}

TEST_CASE("run: four strategies, control block, worker-count independent bytes") {
  const auto data = scratch("run_data");
  REQUIRE(cli({"synth", "--pattern", "global", "--n", "16", "--dims", "256x256", "--seed", "3", "--out", data.string()})
              .rc == 0);
  json cfg = {{"manifest", (data / "manifest.csv").string()},
              {"train", {{"epochs", 3}}},
              {"split", {{"train_per_class", 5}, {"val_per_class", 3}, {"per_resolution", {{"256x256", 8}}}}},
              {"master_seed", 5}};
  std::ofstream(data / "cfg.json") << cfg.dump(2);

  const auto o1 = scratch("run_w1"), o8 = scratch("run_w8");
  const Run r1 = cli({"run", "--config", (data / "cfg.json").string(), "--out", o1.string(), "--workers", "1",
                      "--control", "random-labels", "--svg"});
  const Run r8 = cli({"run", "--config", (data / "cfg.json").string(), "--out", o8.string(), "--workers", "8",
                      "--control", "random-labels", "--svg"});
  INFO(r1.err);
  REQUIRE(r1.rc == 0);
  REQUIRE(r8.rc == 0);
  CHECK(slurp(o1 / "report.json") == slurp(o8 / "report.json"));
  CHECK(slurp(o1 / "predictions.jsonl") == slurp(o8 / "predictions.jsonl"));
  CHECK(fs::exists(o1 / "roc.svg"));
  CHECK(fs::exists(o1 / "hist_patch-224.svg"));

  const json report = json::parse(slurp(o1 / "report.json"));
  CHECK(report.at("schema_version") == kReportSchemaVersion);
  REQUIRE(report.at("strategies").size() == 4);
  for (const auto& s : report.at("strategies")) {
    CHECK(s.contains("image_metrics"));
    CHECK(s.at("predictions").size() == 6);
    CHECK(s.at("control").contains("central_band_mass"));
  }
  CHECK(report.at("errors").empty());
  CHECK(report.at("split").at("validation") == 6);

  // Re-evaluating the stored predictions reproduces the printed table.
  const Run ev = cli({"eval", "--predictions", (o1 / "predictions.jsonl").string(), "--manifest",
                      (data / "manifest.csv").string()});
  CHECK(ev.rc == 0);
  std::istringstream lines(ev.out);
  for (std::string line; std::getline(lines, line);) CHECK(r1.out.find(line) != std::string::npos);
}

TEST_CASE("run reports a split shortfall with a nonzero exit") {
  const auto data = scratch("run_short");
  REQUIRE(cli({"synth", "--pattern", "global", "--n", "4", "--dims", "128x128", "--out", data.string()}).rc == 0);
  std::ofstream(data / "cfg.json") << json{{"manifest", (data / "manifest.csv").string()},
                                           {"split", {{"train_per_class", 5}, {"val_per_class", 3}, {"per_resolution", {{"128x128", 8}}}}}}
                                          .dump();
  const auto out = scratch("run_short_out");
  const Run r = cli({"run", "--config", (data / "cfg.json").string(), "--out", out.string()});
  CHECK(r.rc != 0);
  CHECK(r.err.find("shortfall") != std::string::npos);
  CHECK(fs::exists(out / "errors.json"));
}

TEST_CASE("train writes a loadable checkpoint") {
  const auto data = scratch("train_data");
  REQUIRE(cli({"synth", "--pattern", "half", "--n", "8", "--dims", "256x256", "--out", data.string()}).rc == 0);
  std::ofstream(data / "cfg.json") << json{{"manifest", (data / "manifest.csv").string()},
                                           {"split", {{"train_per_class", 3}, {"val_per_class", 1}, {"per_resolution", {{"256x256", 4}}}}}}
                                          .dump();
  const auto ckpt = data / "m.json";
  const Run r = cli({"train", "--config", (data / "cfg.json").string(), "--strategy", "patch-224", "--epochs", "2",
                     "--checkpoint", ckpt.string()});
  INFO(r.err);
  REQUIRE(r.rc == 0);
  const ToyClassifier m = ToyClassifier::load(ckpt);
  CHECK(m.input_size() == 224);
  CHECK(m.train_config().epochs == 2);
}

TEST_CASE("the installed binary runs and reports failure through its exit code") {
  const char* bin = PATCHSCOPE_BINARY;
  const auto dir = scratch("binary");
  const std::string ok = std::string(bin) + " synth --n 2 --dims 128x128 --out " + dir.string() + " > /dev/null";
  CHECK(std::system(ok.c_str()) == 0);
  const std::string bad = std::string(bin) + " synth --pattern local --feature-size 2048 --dims 512x512 --out " +
                          dir.string() + " 2> /dev/null";
  CHECK(std::system(bad.c_str()) != 0);
}
