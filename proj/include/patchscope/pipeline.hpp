#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "patchscope/augment.hpp"
#include "patchscope/classifier.hpp"
#include "patchscope/image.hpp"
#include "patchscope/imaging.hpp"
#include "patchscope/tiling.hpp"

namespace patchscope {

enum class StrategyKind { FullDownscale, PatchCrop };
enum class Aggregation { HardVote, MeanProbability };

/// One input-preparation strategy: resample the whole image to a square
/// target, or tile it into half-overlapping patches resampled to the
/// classifier input.
struct StrategyConfig {
  StrategyKind kind = StrategyKind::PatchCrop;
  int target = 1000;           // FullDownscale side
  int patch = 224;             // PatchCrop window side
  int classifier_input = 224;  // PatchCrop classifier side
  double vote_threshold = 0.5;
  double coverage_threshold = kDefaultCoverageThreshold;
  int background_threshold = kDefaultBackgroundThreshold;
  Aggregation aggregation = Aggregation::HardVote;

  static StrategyConfig full_downscale(int target);
  static StrategyConfig patch_crop(int patch, int classifier_input = 224);
  /// "full-1000", "full-224", "patch-448", "patch-224" (general: full-N, patch-N or patch-N-M).
  static StrategyConfig parse(const std::string& name);
  /// The four whole-image strategies in table order.
  static std::vector<StrategyConfig> table_strategies();

  std::string name() const;
  /// Square side the classifier consumes.
  int input_size() const { return kind == StrategyKind::FullDownscale ? target : classifier_input; }
  void validate() const;

  friend bool operator==(const StrategyConfig&, const StrategyConfig&) = default;
};

/// A classifier-ready input and where it came from. FullDownscale inputs
/// carry patch_index 0 and the whole-image rect.
struct PreparedInput {
  int patch_index = 0;
  Rect rect;
  double coverage = 1.0;
  bool whole_image = false;
  RasterImage input;
};

/// Resamples or tiles `img` into classifier inputs. PatchCrop keeps only
/// windows whose coverage is strictly above the threshold; an image without
/// such windows yields an empty list. Throws std::invalid_argument when the
/// mask does not match the image.
std::vector<PreparedInput> prepare_inputs(const RasterImage& img, const TissueMask& mask,
                                          const StrategyConfig& strategy);

enum class PredictionStatus { Ok, Indeterminate, Error };
std::string to_string(PredictionStatus status);

struct ImagePrediction {
  std::string image_id;
  std::string strategy;
  std::optional<Label> truth;
  std::vector<std::pair<int, double>> patch_probs;  // (patch_index, probability), index order
  int votes_active = 0;
  int votes_total = 0;
  PredictionStatus status = PredictionStatus::Ok;
  std::optional<Label> label;  // set iff status == Ok
  std::string message;         // reason for Indeterminate / Error

  double vote_fraction() const {
    return votes_total > 0 ? static_cast<double>(votes_active) / votes_total : 0.0;
  }
};

/// Label from patch probabilities: each patch votes ActiveEoE when p >= 0.5
/// and the image is ActiveEoE when the active share reaches vote_threshold
/// (a tie at exactly the threshold is ActiveEoE). With MeanProbability the
/// mean probability is compared instead. Empty input is Indeterminate.
ImagePrediction aggregate_votes(std::vector<std::pair<int, double>> patch_probs,
                                const StrategyConfig& strategy);

/// Prepares, scores and aggregates one image. Throws ContractViolation when the
/// model's input size differs from the strategy's.
ImagePrediction classify_whole_image(const PatchClassifier& model, const RasterImage& img,
                                     const TissueMask& mask, const StrategyConfig& strategy);

/// A dataset row whose pixels are produced on demand.
struct ImageItem {
  std::string image_id;
  Label truth = Label::NonEoE;
  std::function<RasterImage()> load;
};

/// Classifies every item with each (model, strategy) pair, loading each image
/// once. Results are indexed [strategy][item] and sorted by image_id. A
/// failing loader yields an Error entry for that image under every strategy.
/// Output does not depend on `workers`.
std::vector<std::vector<ImagePrediction>> run_experiment(
    std::span<const PatchClassifier* const> models, std::span<const ImageItem> items,
    std::span<const StrategyConfig> strategies, int workers);

std::vector<ImagePrediction> run_experiment(const PatchClassifier& model,
                                            std::span<const ImageItem> items,
                                            const StrategyConfig& strategy, int workers);

/// Training features for each strategy, one FeatureTrainingSet per strategy.
///
/// Every kept input inherits its parent's label. Continuous transforms of
/// `spec` (scale, rotation jitter, translation) are drawn once per input from
/// a stream keyed by (seed, image_id, patch_index) and baked into the stored
/// features; right-angle rotations and flips stay per-epoch and are applied
/// by the returned sets. Items are reduced in input order.
std::vector<FeatureTrainingSet> collect_training_features(std::span<const ImageItem> items,
                                                          std::span<const StrategyConfig> strategies,
                                                          const FeatureGrid& layout,
                                                          const AugmentSpec& spec,
                                                          std::uint64_t seed, int workers);

/// Splits an AugmentSpec into the continuous part applied once per input and
/// the dihedral part applied per epoch.
std::pair<AugmentSpec, AugmentSpec> split_augment(const AugmentSpec& spec);

}  // namespace patchscope
