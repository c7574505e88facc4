#include "patchscope/classifier.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <numeric>

namespace patchscope {

using json = nlohmann::json;

namespace {

constexpr const char* kCheckpointFormat = "patchscope-toy-classifier";
constexpr int kCheckpointVersion = 1;

void check_layout(const FeatureGrid& layout) {
  if (layout.grid < 1 || layout.bins < 1 || layout.bins > 256)
    throw std::invalid_argument("feature grid needs grid >= 1 and bins in [1, 256]");
}

}  // namespace

Eigen::VectorXd extract_features(const RasterImage& img, int input_size, const FeatureGrid& layout) {
  if (img.width() != input_size || img.height() != input_size)
    throw ContractViolation("classifier expects " + std::to_string(input_size) + "x" +
                            std::to_string(input_size) + " input, got " +
                            std::to_string(img.width()) + "x" + std::to_string(img.height()));
  check_layout(layout);
  const int g = layout.grid;
  const int bins = layout.bins;
  if (input_size < g) throw ContractViolation("input smaller than the feature grid");

  Eigen::VectorXd f = Eigen::VectorXd::Zero(layout.feature_count());
  std::array<std::uint8_t, 256> bin_of{};
  for (int v = 0; v < 256; ++v) bin_of[v] = static_cast<std::uint8_t>(v * bins / 256);

  std::vector<int> cell_of(input_size);
  for (int c = 0; c < g; ++c)
    for (int x = c * input_size / g; x < (c + 1) * input_size / g; ++x) cell_of[x] = c;

  const auto px = img.data();
  for (int y = 0; y < input_size; ++y) {
    const int row_cell = cell_of[y] * g;
    const std::uint8_t* row = px.data() + static_cast<std::size_t>(y) * input_size * 3;
    for (int x = 0; x < input_size; ++x) {
      const int base = (row_cell + cell_of[x]) * 3 * bins;
      f[base + bin_of[row[3 * x]]] += 1.0;
      f[base + bins + bin_of[row[3 * x + 1]]] += 1.0;
      f[base + 2 * bins + bin_of[row[3 * x + 2]]] += 1.0;
    }
  }
  for (int r = 0; r < g; ++r) {
    const int h = (r + 1) * input_size / g - r * input_size / g;
    for (int c = 0; c < g; ++c) {
      const int w = (c + 1) * input_size / g - c * input_size / g;
      f.segment((r * g + c) * 3 * bins, 3 * bins) /= static_cast<double>(w) * h;
    }
  }
  return f;
}

std::vector<int> dihedral_cell_permutation(int grid, int quarter_turns, bool flip_h, bool flip_v) {
  // Transform a grid x grid raster whose pixels carry their own cell index.
  RasterImage cells(grid, grid);
  for (int r = 0; r < grid; ++r)
    for (int c = 0; c < grid; ++c) {
      const int id = r * grid + c;
      cells.set_pixel(c, r, static_cast<std::uint8_t>(id & 0xff),
                      static_cast<std::uint8_t>((id >> 8) & 0xff), 0);
    }
  RasterImage moved = rotate_quarter_turns(cells, quarter_turns);
  if (flip_h) moved = flip_horizontal(moved);
  if (flip_v) moved = flip_vertical(moved);
  std::vector<int> perm(static_cast<std::size_t>(grid) * grid);
  for (int r = 0; r < grid; ++r)
    for (int c = 0; c < grid; ++c) perm[r * grid + c] = moved.at(c, r, 0) | (moved.at(c, r, 1) << 8);
  return perm;
}

Eigen::VectorXd permute_cells(const Eigen::VectorXd& features, std::span<const int> perm,
                              const FeatureGrid& layout) {
  const int block = 3 * layout.bins;
  Eigen::VectorXd out(features.size());
  for (std::size_t k = 0; k < perm.size(); ++k)
    out.segment(static_cast<Eigen::Index>(k) * block, block) =
        features.segment(static_cast<Eigen::Index>(perm[k]) * block, block);
  return out;
}

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("train: epochs must be non-negative");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning_rate must be positive");
  if (!(l2 >= 0.0)) throw std::invalid_argument("train: l2 must be non-negative");
  if (average_epochs < 0) throw std::invalid_argument("train: average_epochs must be non-negative");
}

ToyClassifier::ToyClassifier(int input_size, FeatureGrid layout)
    : input_size_(input_size), layout_(layout) {
  if (input_size < 1) throw std::invalid_argument("classifier input size must be positive");
  check_layout(layout);
  weights_ = Eigen::VectorXd::Zero(layout.feature_count());
}

double ToyClassifier::predict_features(const Eigen::Ref<const Eigen::VectorXd>& f) const {
  return sigmoid(score(f));
}

double ToyClassifier::predict(const RasterImage& img) const {
  return predict_features(extract_features(img, input_size_, layout_));
}

void ToyClassifier::set_parameters(Eigen::VectorXd weights, double bias) {
  if (weights.size() != layout_.feature_count())
    throw std::invalid_argument("weight vector length does not match the feature layout");
  weights_ = std::move(weights);
  bias_ = bias;
}

void ToyClassifier::save(const std::filesystem::path& path) const {
  json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["input_size"] = input_size_;
  j["grid"] = layout_.grid;
  j["bins"] = layout_.bins;
  j["weights"] = std::vector<double>(weights_.data(), weights_.data() + weights_.size());
  j["bias"] = bias_;
  j["train_config"] = {{"epochs", train_config_.epochs},
                       {"learning_rate", train_config_.learning_rate},
                       {"batch_size", train_config_.batch_size},
                       {"seed", train_config_.seed},
                       {"l2", train_config_.l2},
                       {"average_epochs", train_config_.average_epochs},
                       {"standardize", train_config_.standardize}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path.string() + "'");
  out << j.dump(1) << '\n';
}

ToyClassifier ToyClassifier::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint '" + path.string() + "'");
  const json j = json::parse(in);
  if (j.value("format", "") != kCheckpointFormat || j.value("version", 0) != kCheckpointVersion)
    throw std::runtime_error("'" + path.string() + "' is not a version 1 toy classifier checkpoint");
  ToyClassifier model(j.at("input_size").get<int>(),
                      FeatureGrid{j.at("grid").get<int>(), j.at("bins").get<int>()});
  const auto w = j.at("weights").get<std::vector<double>>();
  model.set_parameters(Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size())),
                       j.at("bias").get<double>());
  const auto& tc = j.at("train_config");
  model.train_config_ = TrainConfig{tc.at("epochs").get<int>(), tc.at("learning_rate").get<double>(),
                                    tc.at("batch_size").get<int>(), tc.at("seed").get<std::uint64_t>(),
                                    tc.at("l2").get<double>(), tc.value("average_epochs", 0),
                                    tc.value("standardize", false)};
  return model;
}

ImageTrainingSet::ImageTrainingSet(std::span<const LabeledImage> data, int input_size,
                                   FeatureGrid layout)
    : data_(data), input_size_(input_size), layout_(layout) {}

Eigen::VectorXd ImageTrainingSet::features(std::size_t i, const AugmentSpec& spec,
                                           RandomStream& rng) const {
  const RasterImage& img = data_[i].image;
  if (img.width() != input_size_ || img.height() != input_size_)
    throw ContractViolation("training image " + std::to_string(i) + " does not match input size");
  return extract_features(augment(img, spec, rng), input_size_, layout_);
}

FeatureTrainingSet::FeatureTrainingSet(int input_size, FeatureGrid layout)
    : input_size_(input_size), layout_(layout) {
  check_layout(layout);
  for (int q = 0; q < 4; ++q)
    for (int fh = 0; fh < 2; ++fh)
      for (int fv = 0; fv < 2; ++fv)
        perms_.push_back(dihedral_cell_permutation(layout.grid, q, fh != 0, fv != 0));
}

void FeatureTrainingSet::add(Eigen::VectorXd features, Label label) {
  if (features.size() != layout_.feature_count())
    throw std::invalid_argument("feature vector length does not match the layout");
  columns_.push_back(std::move(features));
  labels_.push_back(label);
}

FeatureTrainingSet FeatureTrainingSet::relabeled(std::span<const Label> labels) const {
  if (labels.size() != labels_.size())
    throw std::invalid_argument("relabel: label count differs from the set size");
  FeatureTrainingSet copy = *this;
  copy.labels_.assign(labels.begin(), labels.end());
  return copy;
}

Eigen::VectorXd FeatureTrainingSet::features(std::size_t i, const AugmentSpec& spec,
                                             RandomStream& rng) const {
  if (!spec.is_dihedral())
    throw std::invalid_argument("feature-level augmentation supports right-angle rotations and flips only");
  const AugmentParams p = sample_augment(spec, input_size_, rng);
  const int key = p.quarter_turns * 4 + (p.flip_h ? 2 : 0) + (p.flip_v ? 1 : 0);
  if (key == 0) return columns_[i];
  if (input_size_ % layout_.grid != 0)
    throw std::invalid_argument("cell permutation requires the grid to divide the input size");
  return permute_cells(columns_[i], perms_[key], layout_);
}

namespace {

constexpr double kStdFloor = 0.02;

struct FeatureScaling {
  Eigen::VectorXd mean, scale;
};

FeatureScaling feature_scaling(const TrainingSet& data, Eigen::Index d, bool standardize) {
  FeatureScaling fs{Eigen::VectorXd::Zero(d), Eigen::VectorXd::Ones(d)};
  if (!standardize) return fs;
  const AugmentSpec none = AugmentSpec::identity();
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(d);
  for (std::size_t i = 0; i < data.size(); ++i) {
    RandomStream rng(0);
    const Eigen::VectorXd f = data.features(i, none, rng);
    fs.mean += f;
    sq += f.cwiseProduct(f);
  }
  const double n = static_cast<double>(data.size());
  fs.mean /= n;
  const Eigen::VectorXd var = (sq / n - fs.mean.cwiseProduct(fs.mean)).cwiseMax(0.0);
  fs.scale = var.cwiseSqrt().cwiseMax(kStdFloor);
  return fs;
}

}  // namespace

ToyClassifier train(const ToyClassifier& model, const TrainingSet& data, const TrainConfig& cfg,
                    const AugmentSpec& spec, const EpochCallback& on_epoch) {
  if (data.size() == 0) throw std::invalid_argument("train: empty training set");
  cfg.validate();
  spec.validate();

  const std::size_t n = data.size();
  const Eigen::Index d = model.layout().feature_count();

  // Descent runs on standardized features s = (f - mean) / scale with
  // parameters u = w * scale, c = b + w . mean; the objective is unchanged.
  const FeatureScaling fs = feature_scaling(data, d, cfg.standardize);
  const Eigen::VectorXd inv_scale_sq = fs.scale.cwiseProduct(fs.scale).cwiseInverse();
  Eigen::VectorXd u = model.weights().cwiseProduct(fs.scale);
  double c = model.bias() + model.weights().dot(fs.mean);

  RandomStream shuffle_rng(derive_seed(cfg.seed, "shuffle"));
  const std::uint64_t augment_seed = derive_seed(cfg.seed, "augment");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  Eigen::MatrixXd batch(d, cfg.batch_size);
  std::vector<double> labels(static_cast<std::size_t>(cfg.batch_size));

  const int first_averaged = cfg.epochs - std::min(cfg.average_epochs, cfg.epochs);
  Eigen::VectorXd u_sum = Eigen::VectorXd::Zero(d);
  double c_sum = 0.0;
  long long averaged = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order.begin(), order.end());
    const std::uint64_t epoch_seed = derive_seed(augment_seed, "epoch", static_cast<std::uint64_t>(epoch));
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t count = std::min<std::size_t>(cfg.batch_size, n - start);
      for (std::size_t k = 0; k < count; ++k) {
        const std::size_t idx = order[start + k];
        RandomStream rng(derive_seed(epoch_seed, "sample", idx));
        batch.col(static_cast<Eigen::Index>(k)) =
            (data.features(idx, spec, rng) - fs.mean).cwiseQuotient(fs.scale);
        labels[k] = is_positive(data.label(idx)) ? 1.0 : 0.0;
      }
      auto lg = logistic_loss_gradient(u, c, batch.leftCols(static_cast<Eigen::Index>(count)),
                                       std::span<const double>(labels.data(), count), 0.0);
      // l2 |w|^2 expressed in u.
      const Eigen::VectorXd penalty = u.cwiseProduct(inv_scale_sq);
      lg.loss += cfg.l2 * u.dot(penalty);
      u.noalias() -= cfg.learning_rate * (lg.grad_weights + 2.0 * cfg.l2 * penalty);
      c -= cfg.learning_rate * lg.grad_bias;
      loss_sum += lg.loss;
      ++batches;
      if (epoch >= first_averaged) {
        u_sum += u;
        c_sum += c;
        ++averaged;
      }
    }
    if (on_epoch) on_epoch(epoch, loss_sum / static_cast<double>(batches));
  }

  if (averaged > 0) {
    u = u_sum / static_cast<double>(averaged);
    c = c_sum / static_cast<double>(averaged);
  }
  Eigen::VectorXd w = u.cwiseQuotient(fs.scale);
  const double b = c - w.dot(fs.mean);
  ToyClassifier trained(model.input_size(), model.layout());
  trained.set_parameters(std::move(w), b);
  trained.set_train_config(cfg);
  return trained;
}

ToyClassifier train(const ToyClassifier& model, std::span<const LabeledImage> data,
                    const TrainConfig& cfg, const AugmentSpec& spec) {
  if (data.empty()) throw std::invalid_argument("train: empty training set");
  const ImageTrainingSet set(data, model.input_size(), model.layout());
  if (spec.is_dihedral() && model.input_size() % model.layout().grid == 0) {
    // Same draws, same features; avoids re-extracting every epoch.
    FeatureTrainingSet cached(model.input_size(), model.layout());
    cached.reserve(data.size());
    RandomStream none(0);
    for (std::size_t i = 0; i < data.size(); ++i)
      cached.add(set.features(i, AugmentSpec::identity(), none), data[i].label);
    return train(model, cached, cfg, spec);
  }
  return train(model, set, cfg, spec);
}

double mean_loss(const ToyClassifier& model, const TrainingSet& data, double l2) {
  if (data.size() == 0) throw std::invalid_argument("mean_loss: empty set");
  Eigen::MatrixXd feats(model.layout().feature_count(), static_cast<Eigen::Index>(data.size()));
  std::vector<double> labels(data.size());
  const AugmentSpec none = AugmentSpec::identity();
  for (std::size_t i = 0; i < data.size(); ++i) {
    RandomStream rng(0);
    feats.col(static_cast<Eigen::Index>(i)) = data.features(i, none, rng);
    labels[i] = is_positive(data.label(i)) ? 1.0 : 0.0;
  }
  return logistic_loss_gradient(model.weights(), model.bias(), feats, labels, l2).loss;
}

double predict_proba(const ToyClassifier& model, const RasterImage& img) { return model.predict(img); }

}  // namespace patchscope
