#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "patchscope/classifier.hpp"
#include "patchscope/evaluation.hpp"
#include "patchscope/pipeline.hpp"

namespace patchscope {

inline constexpr int kReportSchemaVersion = 1;

struct ExperimentSettings {
  std::vector<StrategyConfig> strategies = StrategyConfig::table_strategies();
  TrainConfig train;
  AugmentSpec augment;
  FeatureGrid layout;
  int workers = 1;
  std::uint64_t master_seed = 0;
  bool random_label_control = false;
  int histogram_bins = 20;
  double band_lo = kBandLo;
  double band_hi = kBandHi;
};

/// Patch-level view of a model trained on randomly relabelled inputs.
struct ControlResult {
  ProbHistogram truth_positive;
  ProbHistogram truth_negative;
  double central_band_mass = 0.0;
  MetricsResult patch_metrics;  // against the true parent labels
};

struct StrategyResult {
  StrategyConfig strategy;
  ToyClassifier model{224};
  std::size_t training_inputs = 0;
  std::vector<ImagePrediction> predictions;
  std::optional<MetricsResult> image_metrics;
  std::optional<MetricsResult> patch_metrics;
  ProbHistogram truth_positive;  // validation input probabilities by parent truth
  ProbHistogram truth_negative;
  std::optional<double> central_band_mass;
  std::optional<double> vote_fraction_auc;
  std::vector<std::string> indeterminate;
  std::vector<std::pair<std::string, std::string>> errors;  // (image_id, message)
  std::optional<ControlResult> control;
};

/// Seeds fanned out from the master seed, one per named consumer.
struct SeedPlan {
  std::uint64_t split, train, augment, control;
  static SeedPlan from_master(std::uint64_t master);
  std::uint64_t train_for(const StrategyConfig& s) const;
};

/// Outcomes of every scored validation input against its parent's truth.
std::vector<Outcome> patch_outcomes(std::span<const ImagePrediction> preds);
/// Outcomes of every image; Indeterminate and Error entries are Indeterminate.
std::vector<Outcome> image_outcomes(std::span<const ImagePrediction> preds);

/// Trains one toy classifier per strategy on `train_items`, classifies
/// `validation_items`, and computes image- and patch-level metrics,
/// probability histograms and central-band mass. With
/// random_label_control set, a second model per strategy is trained on the
/// same inputs with random labels and evaluated the same way.
/// Output is independent of settings.workers.
std::vector<StrategyResult> run_strategies(std::span<const ImageItem> train_items,
                                           std::span<const ImageItem> validation_items,
                                           const ExperimentSettings& settings);

nlohmann::json metrics_json(const MetricsResult& r);
nlohmann::json histogram_json(const ProbHistogram& h);
nlohmann::json prediction_json(const ImagePrediction& p);
ImagePrediction prediction_from_json(const nlohmann::json& j);

/// The report: schema_version, master seed, one block per strategy and the
/// flattened error list.
nlohmann::json report_json(std::span<const StrategyResult> results, std::uint64_t master_seed);

/// One JSON object per line, in input order.
void write_predictions_jsonl(std::ostream& out, std::span<const ImagePrediction> preds);
std::vector<ImagePrediction> read_predictions_jsonl(std::istream& in);

/// Fixed-width table row: strategy, TPR, TNR, accuracy, PP.
std::string metrics_table_header();
std::string metrics_table_row(const std::string& name, const Metrics& m);

}  // namespace patchscope
