#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>
#include <random>

#include "oracles.hpp"
#include "patchscope/augment.hpp"
#include "patchscope/classifier.hpp"

using namespace patchscope;

namespace {

// Noisy patches around a base grey level; dark ones are positive.
std::vector<LabeledImage> two_clusters(std::mt19937_64& gen, int n_per_class, int side) {
  std::normal_distribution<double> noise(0.0, 12.0);
  std::vector<LabeledImage> out;
  for (int i = 0; i < 2 * n_per_class; ++i) {
    const bool dark = i % 2 == 0;
    RasterImage img(side, side);
    for (auto& v : img.data())
      v = static_cast<std::uint8_t>(std::clamp(std::lround((dark ? 70.0 : 180.0) + noise(gen)), 0L, 255L));
    out.push_back({std::move(img), dark ? Label::ActiveEoE : Label::NonEoE});
  }
  return out;
}

// Overlapping classes: a random fraction of pixels is darkened for positives.
std::vector<LabeledImage> overlapping(std::mt19937_64& gen, int n, int side) {
  std::uniform_int_distribution<int> byte(60, 255);
  std::bernoulli_distribution coin(0.5);
  std::vector<LabeledImage> out;
  for (int i = 0; i < n; ++i) {
    const bool pos = coin(gen);
    std::bernoulli_distribution dark(pos ? 0.25 : 0.15);
    RasterImage img(side, side);
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) {
        const auto v = static_cast<std::uint8_t>(dark(gen) ? 20 : byte(gen));
        img.set_pixel(x, y, v, v, v);
      }
    out.push_back({std::move(img), pos ? Label::ActiveEoE : Label::NonEoE});
  }
  return out;
}

std::multiset<std::vector<double>> cell_multiset(const Eigen::VectorXd& f, const FeatureGrid& g) {
  std::multiset<std::vector<double>> cells;
  const int per = 3 * g.bins;
  for (int c = 0; c < g.grid * g.grid; ++c) cells.insert(std::vector<double>(f.data() + c * per, f.data() + (c + 1) * per));
  return cells;
}

}  // namespace

TEST_CASE("constant image gives one-hot cell histograms") {
  const FeatureGrid g{};
  const RasterImage img(32, 32, 100);  // bin 100 * 8 / 256 = 3
  const Eigen::VectorXd f = extract_features(img, 32, g);
  REQUIRE(f.size() == 384);
  for (int k = 0; k < f.size(); ++k) CHECK(f[k] == (k % 8 == 3 ? 1.0 : 0.0));
}

TEST_CASE("features match the per-pixel binning oracle") {
  std::mt19937_64 gen(53);
  for (const FeatureGrid g : {FeatureGrid{4, 8}, FeatureGrid{3, 5}, FeatureGrid{1, 16}}) {
    const RasterImage img = oracle::random_image(gen, 224, 224);
    const Eigen::VectorXd got = extract_features(img, 224, g);
    const Eigen::VectorXd want = oracle::histogram_features(img, g.grid, g.bins);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
    for (int h = 0; h < g.grid * g.grid * 3; ++h)
      CHECK(got.segment(h * g.bins, g.bins).sum() == doctest::Approx(1.0));
  }
}

TEST_CASE("mirror image has the same multiset of cell histograms") {
  std::mt19937_64 gen(59);
  const FeatureGrid g{};
  const RasterImage img = oracle::random_image(gen, 64, 64);
  const Eigen::VectorXd f = extract_features(img, 64, g);
  const Eigen::VectorXd m = extract_features(flip_horizontal(img), 64, g);
  CHECK(cell_multiset(f, g) == cell_multiset(m, g));
  CHECK(f != m);
}

TEST_CASE("cell permutation reproduces pixel-space dihedral transforms") {
  std::mt19937_64 gen(61);
  const FeatureGrid g{};
  const RasterImage img = oracle::random_image(gen, 64, 64);
  const Eigen::VectorXd f = extract_features(img, 64, g);
  for (int q = 0; q < 4; ++q)
    for (int fh = 0; fh < 2; ++fh)
      for (int fv = 0; fv < 2; ++fv) {
        AugmentParams p;
        p.quarter_turns = q;
        p.flip_h = fh;
        p.flip_v = fv;
        const auto perm = dihedral_cell_permutation(g.grid, q, fh, fv);
        CHECK(permute_cells(f, perm, g) == extract_features(apply_augment(img, p), 64, g));
      }
}

TEST_CASE("wrong input dimensions violate the contract") {
  ToyClassifier model(32);
  CHECK_THROWS_AS(model.predict(RasterImage(31, 32)), ContractViolation);
  CHECK_THROWS_AS(predict_proba(model, RasterImage(32, 33)), ContractViolation);
  CHECK_THROWS_AS(extract_features(RasterImage(10, 10), 12), ContractViolation);
}

TEST_CASE("gradient matches central finite differences") {
  std::mt19937_64 gen(67);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int probes = 120;
  double worst = 0.0;
  for (int k = 0; k < probes; ++k) {
    const int d = 3 + static_cast<int>(gen() % 20), n = 1 + static_cast<int>(gen() % 8);
    Eigen::VectorXd w(d);
    for (auto& v : w) v = normal(gen);
    const double b = normal(gen);
    Eigen::MatrixXd x(d, n);
    for (auto& v : x.reshaped()) v = unit(gen);
    std::vector<double> y(static_cast<std::size_t>(n));
    for (auto& v : y) v = gen() % 2 ? 1.0 : 0.0;
    const double l2 = k % 3 == 0 ? 0.0 : unit(gen) * 0.1;

    const LossGradient lg = logistic_loss_gradient(w, b, x, y, l2);
    CHECK(lg.loss == doctest::Approx(oracle::logistic_objective(w, b, x, y, l2)).epsilon(1e-10));

    const double h = 1e-5;
    Eigen::VectorXd analytic(d + 1), numeric(d + 1);
    analytic << lg.grad_weights, lg.grad_bias;
    for (int j = 0; j < d; ++j) {
      Eigen::VectorXd wp = w, wm = w;
      wp[j] += h;
      wm[j] -= h;
      numeric[j] = (oracle::logistic_objective(wp, b, x, y, l2) - oracle::logistic_objective(wm, b, x, y, l2)) / (2 * h);
    }
    numeric[d] = (oracle::logistic_objective(w, b + h, x, y, l2) - oracle::logistic_objective(w, b - h, x, y, l2)) / (2 * h);
    worst = std::max(worst, (analytic - numeric).norm() / std::max(analytic.norm(), 1e-12));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("zero epochs leave the zero model at one half") {
  std::mt19937_64 gen(71);
  const auto data = two_clusters(gen, 3, 16);
  TrainConfig cfg;
  cfg.epochs = 0;
  const ToyClassifier model = train(ToyClassifier(16), data, cfg, AugmentSpec::identity());
  for (const auto& s : data) CHECK(model.predict(s.image) == 0.5);
  CHECK(ToyClassifier(16).predict(oracle::random_image(gen, 16, 16)) == 0.5);
}

TEST_CASE("separable clusters are learned") {
  std::mt19937_64 gen(73);
  const auto data = two_clusters(gen, 40, 32);
  const FeatureGrid g{};

  // Explicit separator: mass in the lower half of the intensity range votes positive.
  Eigen::VectorXd sep = Eigen::VectorXd::Zero(g.feature_count());
  for (int k = 0; k < sep.size(); ++k) sep[k] = (k % g.bins) < g.bins / 2 ? 1.0 : -1.0;
  ToyClassifier oracle_model(32, g);
  oracle_model.set_parameters(sep, 0.0);
  for (const auto& s : data) REQUIRE(hard_label(oracle_model.predict(s.image)) == s.label);

  TrainConfig cfg;
  cfg.epochs = 50;
  const ToyClassifier model = train(ToyClassifier(32, g), data, cfg, AugmentSpec::identity());
  int correct = 0;
  for (const auto& s : data) correct += hard_label(model.predict(s.image)) == s.label;
  CHECK(static_cast<double>(correct) / data.size() >= 0.95);
}

TEST_CASE("loss is non-increasing over epochs at a small learning rate") {
  std::mt19937_64 gen(79);
  const auto data = overlapping(gen, 40, 16);
  const ToyClassifier zero(16);
  const ImageTrainingSet set(data, 16, zero.layout());
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.average_epochs = 0;
  double prev = mean_loss(zero, set, cfg.l2);
  for (int k = 1; k <= 15; ++k) {
    cfg.epochs = k;
    const double loss = mean_loss(train(zero, set, cfg, AugmentSpec::identity()), set, cfg.l2);
    CHECK(loss <= prev);
    prev = loss;
  }
  CHECK(prev < std::log(2.0));
}

TEST_CASE("training is bitwise deterministic and the fast path matches pixel augmentation") {
  std::mt19937_64 gen(83);
  const auto data = overlapping(gen, 24, 16);
  TrainConfig cfg;
  cfg.epochs = 6;
  AugmentSpec spec;
  spec.max_translation = 0.0;
  spec.scale_lo = spec.scale_hi = 1.0;
  REQUIRE(spec.is_dihedral());
  const ToyClassifier a = train(ToyClassifier(16), data, cfg, spec);
  const ToyClassifier b = train(ToyClassifier(16), data, cfg, spec);
  CHECK(a.weights() == b.weights());
  CHECK(a.bias() == b.bias());

  const ImageTrainingSet pixels(data, 16, FeatureGrid{});
  const ToyClassifier slow = train(ToyClassifier(16), pixels, cfg, spec);
  CHECK(slow.weights() == a.weights());
  CHECK(slow.bias() == a.bias());

  cfg.seed = 2;
  CHECK(train(ToyClassifier(16), data, cfg, spec).weights() != a.weights());
}

TEST_CASE("empty data and bad configs are argument errors") {
  const std::vector<LabeledImage> none;
  CHECK_THROWS_AS(train(ToyClassifier(16), none, TrainConfig{}, AugmentSpec::identity()), std::invalid_argument);
  TrainConfig cfg;
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.l2 = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("hand-computed probability") {
  const FeatureGrid g{1, 2};
  ToyClassifier model(2, g);
  Eigen::VectorXd w(6);
  w << 0.5, -1.0, 2.0, 0.0, -0.25, 1.5;
  model.set_parameters(w, -0.3);
  RasterImage img(2, 2);
  img.set_pixel(0, 0, 0, 200, 10);
  img.set_pixel(1, 0, 0, 200, 200);
  img.set_pixel(0, 1, 200, 200, 200);
  img.set_pixel(1, 1, 200, 0, 10);
  // R: [0.5, 0.5]  G: [0.25, 0.75]  B: [0.5, 0.5]
  const double z = 0.5 * 0.5 - 1.0 * 0.5 + 2.0 * 0.25 + 0.0 * 0.75 - 0.25 * 0.5 + 1.5 * 0.5 - 0.3;
  CHECK(model.predict(img) == doctest::Approx(1.0 / (1.0 + std::exp(-z))).epsilon(1e-15));
}

TEST_CASE("positive score scaling keeps the hard label") {
  std::mt19937_64 gen(89);
  std::normal_distribution<double> normal(0.0, 1.0);
  const FeatureGrid g{};
  for (int k = 0; k < 50; ++k) {
    Eigen::VectorXd w(g.feature_count());
    for (auto& v : w) v = normal(gen);
    const double b = normal(gen);
    ToyClassifier m1(16, g), m2(16, g);
    m1.set_parameters(w, b);
    m2.set_parameters(2.0 * w, 2.0 * b);
    const RasterImage img = oracle::random_image(gen, 16, 16);
    const double p1 = m1.predict(img), p2 = m2.predict(img);
    CHECK(p1 > 0.0);
    CHECK(p1 < 1.0);
    CHECK(hard_label(p1) == hard_label(p2));
  }
}

TEST_CASE("checkpoint round trip") {
  std::mt19937_64 gen(97);
  const auto data = overlapping(gen, 12, 16);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 42;
  cfg.average_epochs = 2;
  const ToyClassifier model = train(ToyClassifier(16, FeatureGrid{2, 4}), data, cfg, AugmentSpec::identity());
  const auto path = std::filesystem::temp_directory_path() / "patchscope_checkpoint.json";
  model.save(path);
  const ToyClassifier back = ToyClassifier::load(path);
  CHECK(back.input_size() == 16);
  CHECK(back.layout() == FeatureGrid{2, 4});
  CHECK(back.weights() == model.weights());
  CHECK(back.bias() == model.bias());
  CHECK(back.train_config() == cfg);
  CHECK_THROWS(ToyClassifier::load(path.string() + ".missing"));
}
