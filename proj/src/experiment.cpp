#include "patchscope/experiment.hpp"

#include <cstdio>
#include <istream>
#include <ostream>

#include "patchscope/parallel.hpp"

namespace patchscope {

using json = nlohmann::json;

SeedPlan SeedPlan::from_master(std::uint64_t master) {
  return {derive_seed(master, "split"), derive_seed(master, "train"), derive_seed(master, "augment"),
          derive_seed(master, "control")};
}

std::uint64_t SeedPlan::train_for(const StrategyConfig& s) const { return derive_seed(train, s.name()); }

std::vector<Outcome> patch_outcomes(std::span<const ImagePrediction> preds) {
  std::vector<Outcome> out;
  for (const auto& p : preds) {
    if (!p.truth) continue;
    for (const auto& [idx, prob] : p.patch_probs) out.push_back({hard_label(prob), *p.truth});
  }
  return out;
}

std::vector<Outcome> image_outcomes(std::span<const ImagePrediction> preds) {
  std::vector<Outcome> out;
  for (const auto& p : preds) {
    if (!p.truth) continue;
    out.push_back({p.status == PredictionStatus::Ok ? p.label : std::nullopt, *p.truth});
  }
  return out;
}

namespace {

std::optional<MetricsResult> try_metrics(std::span<const Outcome> outcomes) {
  if (count_outcomes(outcomes).total() == 0) return std::nullopt;
  return compute_metrics(outcomes);
}

struct PatchProbs {
  std::vector<double> positive, negative, all;
};

PatchProbs split_probs(std::span<const ImagePrediction> preds) {
  PatchProbs out;
  for (const auto& p : preds) {
    if (!p.truth) continue;
    for (const auto& [idx, prob] : p.patch_probs) {
      (is_positive(*p.truth) ? out.positive : out.negative).push_back(prob);
      out.all.push_back(prob);
    }
  }
  return out;
}

ToyClassifier fit(const FeatureTrainingSet& set, const StrategyConfig& s, const ExperimentSettings& settings,
                  std::uint64_t seed) {
  TrainConfig cfg = settings.train;
  cfg.seed = seed;
  const AugmentSpec per_epoch = split_augment(settings.augment).second;
  return train(ToyClassifier(s.input_size(), settings.layout), set, cfg, per_epoch);
}

}  // namespace

std::vector<StrategyResult> run_strategies(std::span<const ImageItem> train_items,
                                           std::span<const ImageItem> validation_items,
                                           const ExperimentSettings& settings) {
  if (settings.strategies.empty()) throw std::invalid_argument("no strategies configured");
  for (const auto& s : settings.strategies) s.validate();
  if (train_items.empty()) throw std::invalid_argument("training set is empty");
  const SeedPlan seeds = SeedPlan::from_master(settings.master_seed);
  const std::size_t n_strat = settings.strategies.size();

  auto sets = collect_training_features(train_items, settings.strategies, settings.layout,
                                        settings.augment, seeds.augment, settings.workers);

  // Model k < n_strat is the true-label model of strategy k; k >= n_strat the control.
  const std::size_t n_models = settings.random_label_control ? 2 * n_strat : n_strat;
  std::vector<std::optional<ToyClassifier>> models(n_models);
  parallel_for(n_models, settings.workers, [&](std::size_t k) {
    const std::size_t s = k % n_strat;
    const auto& strat = settings.strategies[s];
    if (sets[s].size() == 0)
      throw std::runtime_error("strategy " + strat.name() + " has no training inputs");
    if (k < n_strat) {
      models[k] = fit(sets[s], strat, settings, seeds.train_for(strat));
    } else {
      const auto labels = random_labels(sets[s].size(), derive_seed(seeds.control, strat.name()));
      models[k] = fit(sets[s].relabeled(labels), strat, settings,
                      derive_seed(seeds.train_for(strat), "control"));
    }
  });

  std::vector<const PatchClassifier*> model_ptrs;
  std::vector<StrategyConfig> eval_strategies;
  for (std::size_t k = 0; k < n_models; ++k) {
    model_ptrs.push_back(&*models[k]);
    eval_strategies.push_back(settings.strategies[k % n_strat]);
  }
  auto predictions = run_experiment(model_ptrs, validation_items, eval_strategies, settings.workers);

  std::vector<StrategyResult> results;
  for (std::size_t s = 0; s < n_strat; ++s) {
    StrategyResult r;
    r.strategy = settings.strategies[s];
    r.model = *models[s];
    r.training_inputs = sets[s].size();
    r.predictions = std::move(predictions[s]);

    const auto img_out = image_outcomes(r.predictions);
    r.image_metrics = try_metrics(img_out);
    if (r.strategy.kind == StrategyKind::PatchCrop) r.patch_metrics = try_metrics(patch_outcomes(r.predictions));

    const auto probs = split_probs(r.predictions);
    r.truth_positive = probability_histogram(probs.positive, Label::ActiveEoE, settings.histogram_bins);
    r.truth_negative = probability_histogram(probs.negative, Label::NonEoE, settings.histogram_bins);
    if (!probs.all.empty()) r.central_band_mass = central_band_mass(probs.all, settings.band_lo, settings.band_hi);

    std::vector<double> fractions;
    std::vector<Label> truths;
    for (const auto& p : r.predictions) {
      if (p.status == PredictionStatus::Indeterminate) r.indeterminate.push_back(p.image_id);
      if (p.status == PredictionStatus::Error) r.errors.emplace_back(p.image_id, p.message);
      if (p.status == PredictionStatus::Ok && p.truth) {
        fractions.push_back(p.vote_fraction());
        truths.push_back(*p.truth);
      }
    }
    r.vote_fraction_auc = rank_auc(fractions, truths);

    if (settings.random_label_control) {
      const auto& control_preds = predictions[n_strat + s];
      const auto cprobs = split_probs(control_preds);
      ControlResult c;
      c.truth_positive = probability_histogram(cprobs.positive, Label::ActiveEoE, settings.histogram_bins);
      c.truth_negative = probability_histogram(cprobs.negative, Label::NonEoE, settings.histogram_bins);
      if (!cprobs.all.empty()) {
        c.central_band_mass = central_band_mass(cprobs.all, settings.band_lo, settings.band_hi);
        c.patch_metrics = compute_metrics(patch_outcomes(control_preds));
      }
      r.control = std::move(c);
    }
    results.push_back(std::move(r));
  }
  return results;
}

namespace {

json rate_json(std::optional<double> v) { return v ? json(*v) : json("undefined"); }

}  // namespace

json metrics_json(const MetricsResult& r) {
  const auto roc = roc_point(r.metrics);
  return {{"counts", {{"tp", r.counts.tp}, {"fn", r.counts.fn}, {"tn", r.counts.tn}, {"fp", r.counts.fp}}},
          {"indeterminate", r.indeterminate},
          {"tpr", rate_json(r.metrics.tpr)},
          {"tnr", rate_json(r.metrics.tnr)},
          {"accuracy", r.metrics.accuracy},
          {"pp", r.metrics.pp},
          {"roc_point", roc ? json{{"fpr", roc->fpr}, {"tpr", roc->tpr}} : json("undefined")},
          {"display",
           {{"tpr", format_percent(r.metrics.tpr)},
            {"tnr", format_percent(r.metrics.tnr)},
            {"accuracy", format_percent(r.metrics.accuracy)},
            {"pp", format_fraction(r.metrics.pp)}}}};
}

json histogram_json(const ProbHistogram& h) {
  return {{"truth_class", std::string(to_string(h.truth_class))},
          {"bin_edges", h.bin_edges},
          {"counts", h.counts}};
}

json prediction_json(const ImagePrediction& p) {
  json probs = json::array();
  for (const auto& [idx, prob] : p.patch_probs) probs.push_back(json::array({idx, prob}));
  json j = {{"image_id", p.image_id},
            {"strategy", p.strategy},
            {"label", p.status == PredictionStatus::Ok ? std::string(to_string(*p.label))
                      : p.status == PredictionStatus::Indeterminate ? std::string("Indeterminate")
                                                                     : std::string("Error")},
            {"votes_active", p.votes_active},
            {"votes_total", p.votes_total},
            {"patch_probs", probs}};
  if (!p.message.empty()) j["message"] = p.message;
  return j;
}

ImagePrediction prediction_from_json(const json& j) {
  ImagePrediction p;
  p.image_id = j.at("image_id").get<std::string>();
  p.strategy = j.value("strategy", "");
  const auto label = j.at("label").get<std::string>();
  if (label == "Indeterminate") {
    p.status = PredictionStatus::Indeterminate;
  } else if (label == "Error") {
    p.status = PredictionStatus::Error;
  } else {
    p.label = label_from_string(label);
  }
  p.votes_active = j.value("votes_active", 0);
  p.votes_total = j.value("votes_total", 0);
  if (j.contains("patch_probs"))
    for (const auto& pp : j.at("patch_probs")) p.patch_probs.emplace_back(pp.at(0).get<int>(), pp.at(1).get<double>());
  p.message = j.value("message", "");
  return p;
}

json report_json(std::span<const StrategyResult> results, std::uint64_t master_seed) {
  json strategies = json::array();
  json all_errors = json::array();
  for (const auto& r : results) {
    json block;
    block["strategy"] = r.strategy.name();
    block["classifier_input"] = r.strategy.input_size();
    block["training_inputs"] = r.training_inputs;
    block["image_metrics"] = r.image_metrics ? metrics_json(*r.image_metrics) : json("undefined");
    if (r.strategy.kind == StrategyKind::PatchCrop)
      block["patch_metrics"] = r.patch_metrics ? metrics_json(*r.patch_metrics) : json("undefined");
    block["histograms"] = {{"truth_positive", histogram_json(r.truth_positive)},
                           {"truth_negative", histogram_json(r.truth_negative)}};
    block["central_band_mass"] = rate_json(r.central_band_mass);
    block["vote_fraction_auc"] = rate_json(r.vote_fraction_auc);
    block["indeterminate"] = r.indeterminate;
    json errs = json::array();
    for (const auto& [id, msg] : r.errors) {
      errs.push_back({{"image_id", id}, {"message", msg}});
      all_errors.push_back({{"strategy", r.strategy.name()}, {"image_id", id}, {"message", msg}});
    }
    block["errors"] = errs;
    if (r.control) {
      block["control"] = {{"kind", "random-labels"},
                          {"histograms", {{"truth_positive", histogram_json(r.control->truth_positive)},
                                          {"truth_negative", histogram_json(r.control->truth_negative)}}},
                          {"central_band_mass", r.control->central_band_mass},
                          {"patch_metrics", r.control->patch_metrics.counts.total() > 0
                                                ? metrics_json(r.control->patch_metrics)
                                                : json("undefined")}};
    }
    json preds = json::array();
    for (const auto& p : r.predictions) preds.push_back(prediction_json(p));
    block["predictions"] = preds;
    strategies.push_back(std::move(block));
  }
  return {{"schema_version", kReportSchemaVersion},
          {"master_seed", master_seed},
          {"strategies", strategies},
          {"errors", all_errors}};
}

void write_predictions_jsonl(std::ostream& out, std::span<const ImagePrediction> preds) {
  for (const auto& p : preds) out << prediction_json(p).dump() << '\n';
}

std::vector<ImagePrediction> read_predictions_jsonl(std::istream& in) {
  std::vector<ImagePrediction> preds;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      preds.push_back(prediction_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw std::runtime_error("predictions line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return preds;
}

std::string metrics_table_header() {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-12s %9s %9s %9s %6s", "strategy", "TPR", "TNR", "accuracy", "PP");
  return buf;
}

std::string metrics_table_row(const std::string& name, const Metrics& m) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-12s %9s %9s %9s %6s", name.c_str(), format_percent(m.tpr).c_str(),
                format_percent(m.tnr).c_str(), format_percent(m.accuracy).c_str(),
                format_fraction(m.pp).c_str());
  return buf;
}

}  // namespace patchscope
