#include <doctest.h>

#include <random>
#include <sstream>

#include "oracles.hpp"
#include "patchscope/experiment.hpp"
#include "patchscope/pipeline.hpp"

using namespace patchscope;

namespace {

// Probability is the red value of the top-left pixel over 255.
class CornerModel : public PatchClassifier {
 public:
  explicit CornerModel(int size) : size_(size) {}
  int input_size() const override { return size_; }
  double predict(const RasterImage& img) const override {
    if (img.width() != size_ || img.height() != size_) throw ContractViolation("size");
    return img.at(0, 0, 0) / 255.0;
  }

 private:
  int size_;
};

std::vector<std::pair<int, double>> probs(std::initializer_list<double> ps) {
  std::vector<std::pair<int, double>> out;
  int i = 0;
  for (double p : ps) out.emplace_back(i++, p);
  return out;
}

}  // namespace

TEST_CASE("full downscale yields one input at the target size") {
  const RasterImage img(2010, 1548, 120);
  const auto inputs = prepare_inputs(img, tissue_mask(img), StrategyConfig::full_downscale(1000));
  REQUIRE(inputs.size() == 1);
  CHECK(inputs[0].input.width() == 1000);
  CHECK(inputs[0].input.height() == 1000);
  CHECK(inputs[0].whole_image);
}

TEST_CASE("448 all-tissue image under the two patch strategies") {
  std::mt19937_64 gen(101);
  RasterImage img = oracle::random_image(gen, 448, 448);
  const TissueMask mask(448, 448, true);

  const auto big = prepare_inputs(img, mask, StrategyConfig::patch_crop(448));
  REQUIRE(big.size() == 1);
  CHECK(big[0].input.width() == 224);
  CHECK(big[0].input == downscale_bicubic(img, 224, 224));

  const auto small = prepare_inputs(img, mask, StrategyConfig::patch_crop(224));
  REQUIRE(small.size() == 9);
  const auto rects = tile(448, 448, 224);
  for (std::size_t i = 0; i < 9; ++i) {
    CHECK(small[i].patch_index == static_cast<int>(i));
    CHECK(small[i].rect == rects[i]);
    CHECK(small[i].input == crop(img, rects[i]));
  }
}

TEST_CASE("every prepared patch clears the coverage threshold") {
  RasterImage img(448, 448, 255);
  // 80x80 dark square: 12.8% of the top-left window, under 10% of the others.
  for (int y = 0; y < 80; ++y)
    for (int x = 0; x < 80; ++x) img.set_pixel(x, y, 100, 100, 100);
  const auto inputs = prepare_inputs(img, tissue_mask(img), StrategyConfig::patch_crop(224));
  REQUIRE(inputs.size() == 1);
  CHECK(inputs[0].coverage > 0.10);
  CHECK(prepare_inputs(RasterImage(448, 448, 255), TissueMask(448, 448), StrategyConfig::patch_crop(224)).empty());
  CHECK_THROWS_AS(prepare_inputs(img, TissueMask(10, 10), StrategyConfig::patch_crop(224)), std::invalid_argument);
}

TEST_CASE("majority vote with the tie going to ActiveEoE") {
  const auto s = StrategyConfig::patch_crop(224);
  CHECK(aggregate_votes(probs({0.9, 0.9, 0.9}), s).label == Label::ActiveEoE);
  CHECK(aggregate_votes(probs({.9, .9, .9, .9, .9, .1, .1, .1, .1}), s).label == Label::ActiveEoE);
  CHECK(aggregate_votes(probs({.9, .9, .9, .9, .1, .1, .1, .1, .1}), s).label == Label::NonEoE);
  const auto tie = aggregate_votes(probs({.5, .9, .9, .9, .1, .1, .1, .1}), s);
  CHECK(tie.votes_active == 4);
  CHECK(tie.votes_total == 8);
  CHECK(tie.label == Label::ActiveEoE);
}

TEST_CASE("empty input is Indeterminate, never a default label") {
  const auto p = aggregate_votes({}, StrategyConfig::patch_crop(224));
  CHECK(p.status == PredictionStatus::Indeterminate);
  CHECK_FALSE(p.label.has_value());
  CHECK_FALSE(p.message.empty());
}

TEST_CASE("mean-probability aggregation") {
  auto s = StrategyConfig::patch_crop(224);
  s.aggregation = Aggregation::MeanProbability;
  CHECK(aggregate_votes(probs({0.3, 0.3, 0.8}), s).label == Label::NonEoE);
  CHECK(aggregate_votes(probs({0.45, 0.45, 0.7}), s).label == Label::ActiveEoE);
}

TEST_CASE("property: raising a patch probability never turns ActiveEoE into NonEoE") {
  std::mt19937_64 gen(103);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto s = StrategyConfig::patch_crop(224);
  for (int k = 0; k < 500; ++k) {
    std::vector<std::pair<int, double>> ps;
    const int n = 1 + static_cast<int>(gen() % 12);
    for (int i = 0; i < n; ++i) ps.emplace_back(i, unit(gen));
    const auto before = aggregate_votes(ps, s);
    REQUIRE(before.votes_total == n);
    auto raised = ps;
    auto& target = raised[gen() % raised.size()].second;
    target = target + (1.0 - target) * unit(gen);
    const auto after = aggregate_votes(raised, s);
    if (before.label == Label::ActiveEoE) CHECK(after.label == Label::ActiveEoE);
    int active = 0;
    for (const auto& [i, p] : ps) active += p >= 0.5;
    CHECK(before.votes_active == active);
  }
}

TEST_CASE("full downscale prediction is a single voter") {
  RasterImage img(300, 200, 255);
  img.set_pixel(0, 0, 230, 0, 0);
  const CornerModel model(224);
  const auto p = classify_whole_image(model, img, tissue_mask(img), StrategyConfig::full_downscale(224));
  CHECK(p.votes_total == 1);
  REQUIRE(p.status == PredictionStatus::Ok);
  CHECK(p.patch_probs.size() == 1);
  CHECK(hard_label(p.patch_probs[0].second) == *p.label);
}

TEST_CASE("model input size must match the strategy") {
  const RasterImage img(448, 448, 100);
  CHECK_THROWS_AS(classify_whole_image(CornerModel(1000), img, tissue_mask(img), StrategyConfig::patch_crop(224)),
                  ContractViolation);
}

TEST_CASE("run_experiment is independent of worker count and keeps going after a load error") {
  std::vector<ImageItem> items;
  for (int i = 0; i < 12; ++i) {
    const std::string id = "img" + std::to_string(11 - i);
    if (i == 4) {
      items.push_back({id, Label::ActiveEoE, [] () -> RasterImage { throw std::runtime_error("unreadable"); }});
      continue;
    }
    items.push_back({id, i % 2 ? Label::ActiveEoE : Label::NonEoE, [i] {
                       std::mt19937_64 gen(200 + i);
                       RasterImage img = oracle::random_image(gen, 448, 448);
                       return img;
                     }});
  }
  const CornerModel model(224);
  const auto strategies = StrategyConfig::table_strategies();
  std::vector<CornerModel> per;
  for (const auto& s : strategies) per.emplace_back(s.input_size());
  std::vector<const PatchClassifier*> models;
  for (const auto& m : per) models.push_back(&m);

  const auto one = run_experiment(models, items, strategies, 1);
  const auto many = run_experiment(models, items, strategies, 8);
  REQUIRE(one.size() == 4);
  for (std::size_t s = 0; s < 4; ++s) {
    REQUIRE(one[s].size() == 12);
    std::ostringstream a, b;
    write_predictions_jsonl(a, one[s]);
    write_predictions_jsonl(b, many[s]);
    CHECK(a.str() == b.str());
    for (std::size_t i = 1; i < one[s].size(); ++i) CHECK(one[s][i - 1].image_id < one[s][i].image_id);
    int errors = 0;
    for (const auto& p : one[s]) errors += p.status == PredictionStatus::Error;
    CHECK(errors == 1);
  }
  CHECK(run_experiment(model, std::span<const ImageItem>{}, StrategyConfig::patch_crop(224), 4).empty());
}

TEST_CASE("strategy names round trip") {
  for (const auto& s : StrategyConfig::table_strategies()) CHECK(StrategyConfig::parse(s.name()) == s);
  CHECK(StrategyConfig::table_strategies().size() == 4);
  CHECK(StrategyConfig::parse("patch-448").classifier_input == 224);
  CHECK(StrategyConfig::parse("full-1000").input_size() == 1000);
  CHECK_THROWS(StrategyConfig::parse("tiles"));
}

TEST_CASE("augmentation split separates continuous and dihedral parts") {
  const auto [once, per_epoch] = split_augment(AugmentSpec{});
  CHECK(per_epoch.is_dihedral());
  CHECK(once.right_angles == std::vector<int>{0});
  CHECK_FALSE(once.flip_h);
  CHECK(once.max_translation == AugmentSpec{}.max_translation);
}
