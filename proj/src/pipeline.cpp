#include "patchscope/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <numeric>
#include <stdexcept>

#include "patchscope/parallel.hpp"

namespace patchscope {

int default_workers(int fallback) {
  if (const char* env = std::getenv("PATCHSCOPE_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::logic_error&) {
    }
  }
  return fallback;
}

StrategyConfig StrategyConfig::full_downscale(int target) {
  StrategyConfig s;
  s.kind = StrategyKind::FullDownscale;
  s.target = target;
  return s;
}

StrategyConfig StrategyConfig::patch_crop(int patch, int classifier_input) {
  StrategyConfig s;
  s.kind = StrategyKind::PatchCrop;
  s.patch = patch;
  s.classifier_input = classifier_input;
  return s;
}

StrategyConfig StrategyConfig::parse(const std::string& name) {
  const auto number = [](std::string_view text) -> std::optional<int> {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
    return v;
  };
  const std::string_view view(name);
  std::optional<StrategyConfig> s;
  if (view.starts_with("full-")) {
    if (auto t = number(view.substr(5))) s = full_downscale(*t);
  } else if (view.starts_with("patch-")) {
    const auto rest = view.substr(6);
    const auto dash = rest.find('-');
    auto p = number(rest.substr(0, dash));
    auto in = dash == std::string_view::npos ? std::optional<int>(224) : number(rest.substr(dash + 1));
    if (p && in) s = patch_crop(*p, *in);
  }
  if (!s)
    throw std::invalid_argument("unknown strategy '" + name + "' (expected full-N, patch-N or patch-N-M)");
  s->validate();
  return *s;
}

std::vector<StrategyConfig> StrategyConfig::table_strategies() {
  return {full_downscale(1000), full_downscale(224), patch_crop(448), patch_crop(224)};
}

std::string StrategyConfig::name() const {
  if (kind == StrategyKind::FullDownscale) return "full-" + std::to_string(target);
  if (classifier_input == 224) return "patch-" + std::to_string(patch);
  return "patch-" + std::to_string(patch) + "-" + std::to_string(classifier_input);
}

void StrategyConfig::validate() const {
  if (kind == StrategyKind::FullDownscale && target < 1)
    throw std::invalid_argument("strategy: downscale target must be positive");
  if (kind == StrategyKind::PatchCrop && (patch < 2 || patch % 2 != 0))
    throw std::invalid_argument("strategy: patch size must be even and >= 2");
  if (kind == StrategyKind::PatchCrop && classifier_input < 1)
    throw std::invalid_argument("strategy: classifier input must be positive");
  if (!(vote_threshold > 0.0 && vote_threshold <= 1.0))
    throw std::invalid_argument("strategy: vote threshold must lie in (0, 1]");
  if (!(coverage_threshold >= 0.0 && coverage_threshold <= 1.0))
    throw std::invalid_argument("strategy: coverage threshold must lie in [0, 1]");
}

std::vector<PreparedInput> prepare_inputs(const RasterImage& img, const TissueMask& mask,
                                          const StrategyConfig& strategy) {
  if (mask.width() != img.width() || mask.height() != img.height())
    throw std::invalid_argument("tissue mask dimensions differ from the image");
  std::vector<PreparedInput> inputs;
  if (strategy.kind == StrategyKind::FullDownscale) {
    PreparedInput in;
    in.rect = img.bounds();
    in.coverage = coverage_fraction(mask, in.rect);
    in.whole_image = true;
    in.input = resample_bicubic(img, strategy.target, strategy.target);
    inputs.push_back(std::move(in));
    return inputs;
  }
  const auto rects = tile(img.width(), img.height(), strategy.patch);
  const auto kept = filter_patches(rects, mask, strategy.coverage_threshold);
  inputs.reserve(kept.size());
  const int side = strategy.classifier_input;
  for (const auto& p : kept) {
    PreparedInput in;
    in.patch_index = p.patch_index;
    in.rect = p.rect;
    in.coverage = p.coverage;
    in.input = crop(img, p.rect);
    if (in.input.width() != side || in.input.height() != side)
      in.input = resample_bicubic(in.input, side, side);
    inputs.push_back(std::move(in));
  }
  return inputs;
}

std::string to_string(PredictionStatus status) {
  switch (status) {
    case PredictionStatus::Ok: return "ok";
    case PredictionStatus::Indeterminate: return "indeterminate";
    case PredictionStatus::Error: return "error";
  }
  return "error";
}

ImagePrediction aggregate_votes(std::vector<std::pair<int, double>> patch_probs,
                                const StrategyConfig& strategy) {
  ImagePrediction pred;
  pred.strategy = strategy.name();
  std::sort(patch_probs.begin(), patch_probs.end());
  pred.patch_probs = std::move(patch_probs);
  pred.votes_total = static_cast<int>(pred.patch_probs.size());
  pred.votes_active = static_cast<int>(std::count_if(
      pred.patch_probs.begin(), pred.patch_probs.end(),
      [](const auto& pp) { return is_positive(hard_label(pp.second)); }));
  if (pred.votes_total == 0) {
    pred.status = PredictionStatus::Indeterminate;
    pred.message = "no patch passed the tissue coverage filter";
    return pred;
  }
  bool active;
  if (strategy.aggregation == Aggregation::HardVote) {
    active = pred.votes_active >= strategy.vote_threshold * pred.votes_total;
  } else {
    double sum = 0.0;
    for (const auto& pp : pred.patch_probs) sum += pp.second;
    active = sum / pred.votes_total >= strategy.vote_threshold;
  }
  pred.label = active ? Label::ActiveEoE : Label::NonEoE;
  return pred;
}

namespace {

void check_model(const PatchClassifier& model, const StrategyConfig& strategy) {
  if (model.input_size() != strategy.input_size())
    throw ContractViolation("model input size " + std::to_string(model.input_size()) +
                            " does not match strategy " + strategy.name());
}

std::vector<std::pair<int, double>> score_inputs(const PatchClassifier& model,
                                                 const std::vector<PreparedInput>& inputs) {
  std::vector<std::pair<int, double>> probs;
  probs.reserve(inputs.size());
  for (const auto& in : inputs) probs.emplace_back(in.patch_index, model.predict(in.input));
  return probs;
}

}  // namespace

ImagePrediction classify_whole_image(const PatchClassifier& model, const RasterImage& img,
                                     const TissueMask& mask, const StrategyConfig& strategy) {
  check_model(model, strategy);
  return aggregate_votes(score_inputs(model, prepare_inputs(img, mask, strategy)), strategy);
}

std::vector<std::vector<ImagePrediction>> run_experiment(
    std::span<const PatchClassifier* const> models, std::span<const ImageItem> items,
    std::span<const StrategyConfig> strategies, int workers) {
  if (models.size() != strategies.size())
    throw std::invalid_argument("run_experiment: one model per strategy is required");
  for (std::size_t s = 0; s < strategies.size(); ++s) check_model(*models[s], strategies[s]);

  std::vector<std::vector<ImagePrediction>> out(strategies.size(),
                                                std::vector<ImagePrediction>(items.size()));
  parallel_for(items.size(), workers, [&](std::size_t i) {
    const ImageItem& item = items[i];
    RasterImage img;
    std::string failure;
    try {
      img = item.load();
    } catch (const std::exception& e) {
      failure = e.what();
    }
    for (std::size_t s = 0; s < strategies.size(); ++s) {
      ImagePrediction pred;
      if (failure.empty()) {
        try {
          const TissueMask mask = tissue_mask(img, strategies[s].background_threshold);
          pred = classify_whole_image(*models[s], img, mask, strategies[s]);
        } catch (const std::exception& e) {
          pred.status = PredictionStatus::Error;
          pred.message = e.what();
        }
      } else {
        pred.status = PredictionStatus::Error;
        pred.message = failure;
      }
      pred.image_id = item.image_id;
      pred.strategy = strategies[s].name();
      pred.truth = item.truth;
      out[s][i] = std::move(pred);
    }
  });
  for (auto& preds : out)
    std::stable_sort(preds.begin(), preds.end(),
                     [](const auto& a, const auto& b) { return a.image_id < b.image_id; });
  return out;
}

std::vector<ImagePrediction> run_experiment(const PatchClassifier& model,
                                            std::span<const ImageItem> items,
                                            const StrategyConfig& strategy, int workers) {
  const PatchClassifier* models[] = {&model};
  const StrategyConfig strategies[] = {strategy};
  return std::move(run_experiment(models, items, strategies, workers).front());
}

std::pair<AugmentSpec, AugmentSpec> split_augment(const AugmentSpec& spec) {
  AugmentSpec once = spec;
  once.right_angles = {0};
  once.flip_h = once.flip_v = false;
  AugmentSpec per_epoch = spec;
  per_epoch.max_extra_rotation_deg = 0.0;
  per_epoch.max_translation = 0.0;
  per_epoch.scale_lo = per_epoch.scale_hi = 1.0;
  return {once, per_epoch};
}

std::vector<FeatureTrainingSet> collect_training_features(std::span<const ImageItem> items,
                                                          std::span<const StrategyConfig> strategies,
                                                          const FeatureGrid& layout,
                                                          const AugmentSpec& spec,
                                                          std::uint64_t seed, int workers) {
  spec.validate();
  const AugmentSpec once = split_augment(spec).first;
  const bool bake = !once.is_dihedral();
  const std::uint64_t bake_seed = derive_seed(seed, "augment-once");

  // per_item[i][s] holds the features of item i under strategy s.
  std::vector<std::vector<std::vector<Eigen::VectorXd>>> per_item(items.size());
  parallel_for(items.size(), workers, [&](std::size_t i) {
    const RasterImage img = items[i].load();
    per_item[i].resize(strategies.size());
    for (std::size_t s = 0; s < strategies.size(); ++s) {
      const auto& strat = strategies[s];
      const TissueMask mask = tissue_mask(img, strat.background_threshold);
      for (auto& in : prepare_inputs(img, mask, strat)) {
        if (bake) {
          RandomStream rng(derive_seed(derive_seed(bake_seed, items[i].image_id),
                                       strat.name(), static_cast<std::uint64_t>(in.patch_index)));
          in.input = augment(in.input, once, rng);
        }
        per_item[i][s].push_back(extract_features(in.input, strat.input_size(), layout));
      }
    }
  });

  std::vector<FeatureTrainingSet> sets;
  for (const auto& strat : strategies) sets.emplace_back(strat.input_size(), layout);
  for (std::size_t i = 0; i < items.size(); ++i)
    for (std::size_t s = 0; s < strategies.size(); ++s)
      for (auto& f : per_item[i][s]) sets[s].add(std::move(f), items[i].truth);
  return sets;
}

}  // namespace patchscope
