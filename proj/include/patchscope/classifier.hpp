#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "patchscope/augment.hpp"
#include "patchscope/image.hpp"
#include "patchscope/random.hpp"

namespace patchscope {

/// Thrown when an input does not satisfy a classifier's input contract.
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Patch classifier slot: maps a square input_size x input_size raster to the
/// probability of ActiveEoE. Implementations must be deterministic and
/// safe to call concurrently once constructed.
class PatchClassifier {
 public:
  virtual ~PatchClassifier() = default;
  virtual int input_size() const = 0;
  virtual double predict(const RasterImage& img) const = 0;
};

/// Hard label used everywhere a probability becomes a vote.
inline Label hard_label(double p) { return p >= 0.5 ? Label::ActiveEoE : Label::NonEoE; }

template <typename Scalar>
Scalar sigmoid(Scalar z) {
  if (z >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

/// log(1 + exp(z)) without overflow.
template <typename Scalar>
Scalar softplus(Scalar z) {
  return z > Scalar(0) ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

/// Histogram feature layout: the image is split into grid x grid cells and
/// each cell contributes one `bins`-bin histogram per channel.
struct FeatureGrid {
  int grid = 4;
  int bins = 8;

  int feature_count() const { return grid * grid * 3 * bins; }
  friend bool operator==(const FeatureGrid&, const FeatureGrid&) = default;
};

/// Per-cell, per-channel intensity histograms normalised by the cell's pixel
/// count. Cell (r, c) spans columns [c*n/g, (c+1)*n/g) and likewise for rows;
/// intensity v falls in bin v*bins/256. Throws ContractViolation unless the
/// image is input_size x input_size.
Eigen::VectorXd extract_features(const RasterImage& img, int input_size,
                                 const FeatureGrid& layout = {});

/// Cell permutation induced by a right-angle rotation and flips (applied in
/// that order). Entry k names the source cell whose histograms land in cell k.
std::vector<int> dihedral_cell_permutation(int grid, int quarter_turns, bool flip_h, bool flip_v);

/// Applies a cell permutation to a feature vector laid out as in extract_features.
Eigen::VectorXd permute_cells(const Eigen::VectorXd& features, std::span<const int> perm,
                              const FeatureGrid& layout);

struct TrainConfig {
  int epochs = 30;
  double learning_rate = 0.03;
  int batch_size = 4;
  std::uint64_t seed = 1;
  double l2 = 1e-7;
  /// The returned weights are the mean of the iterates after every step of
  /// the last `average_epochs` epochs; 0 returns the final iterate.
  int average_epochs = 5;
  /// Descend in coordinates where each feature is centred and scaled by its
  /// training-set standard deviation (floored). Same objective, better conditioned.
  bool standardize = true;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Histogram features followed by logistic regression.
class ToyClassifier : public PatchClassifier {
 public:
  ToyClassifier(int input_size, FeatureGrid layout = {});

  int input_size() const override { return input_size_; }
  double predict(const RasterImage& img) const override;

  /// sigmoid(w . f + b) on a precomputed feature vector.
  double predict_features(const Eigen::Ref<const Eigen::VectorXd>& f) const;
  double score(const Eigen::Ref<const Eigen::VectorXd>& f) const { return weights_.dot(f) + bias_; }

  const FeatureGrid& layout() const { return layout_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  double bias() const { return bias_; }
  void set_parameters(Eigen::VectorXd weights, double bias);

  /// The configuration of the last train() call, if any.
  const TrainConfig& train_config() const { return train_config_; }
  void set_train_config(const TrainConfig& cfg) { train_config_ = cfg; }

  void save(const std::filesystem::path& path) const;
  static ToyClassifier load(const std::filesystem::path& path);

 private:
  int input_size_;
  FeatureGrid layout_;
  Eigen::VectorXd weights_;
  double bias_ = 0.0;
  TrainConfig train_config_;
};

/// Mean logistic loss over the columns of `features` plus l2 * |w|^2, with
/// its gradient. labels[i] is 1 for ActiveEoE.
struct LossGradient {
  double loss = 0.0;
  Eigen::VectorXd grad_weights;
  double grad_bias = 0.0;
};

template <typename Derived>
LossGradient logistic_loss_gradient(const Eigen::VectorXd& weights, double bias,
                                    const Eigen::MatrixBase<Derived>& features,
                                    std::span<const double> labels, double l2) {
  const auto n = features.cols();
  LossGradient out;
  out.grad_weights = Eigen::VectorXd::Zero(weights.size());
  // Columns are reduced in index order so the sum is reproducible.
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z = weights.dot(features.col(i)) + bias;
    const double y = labels[static_cast<std::size_t>(i)];
    out.loss += y * softplus(-z) + (1.0 - y) * softplus(z);
    const double r = sigmoid(z) - y;
    out.grad_weights.noalias() += r * features.col(i);
    out.grad_bias += r;
  }
  const double inv = 1.0 / static_cast<double>(n);
  out.loss = out.loss * inv + l2 * weights.squaredNorm();
  out.grad_weights = out.grad_weights * inv + 2.0 * l2 * weights;
  out.grad_bias *= inv;
  return out;
}

/// Source of training samples. features() writes the sample's feature vector
/// after an augmentation drawn from `rng`.
class TrainingSet {
 public:
  virtual ~TrainingSet() = default;
  virtual std::size_t size() const = 0;
  virtual Label label(std::size_t i) const = 0;
  virtual Eigen::VectorXd features(std::size_t i, const AugmentSpec& spec,
                                   RandomStream& rng) const = 0;
};

struct LabeledImage {
  RasterImage image;
  Label label = Label::NonEoE;
};

/// Holds rasters; augments pixels, then extracts features. Any AugmentSpec.
class ImageTrainingSet : public TrainingSet {
 public:
  ImageTrainingSet(std::span<const LabeledImage> data, int input_size, FeatureGrid layout);
  std::size_t size() const override { return data_.size(); }
  Label label(std::size_t i) const override { return data_[i].label; }
  Eigen::VectorXd features(std::size_t i, const AugmentSpec& spec,
                           RandomStream& rng) const override;

 private:
  std::span<const LabeledImage> data_;
  int input_size_;
  FeatureGrid layout_;
};

/// Holds precomputed features and realises augmentation as a cell permutation.
/// Exactly matches ImageTrainingSet for dihedral specs when the grid divides
/// the input size; throws std::invalid_argument for any other spec.
class FeatureTrainingSet : public TrainingSet {
 public:
  FeatureTrainingSet(int input_size, FeatureGrid layout);

  void add(Eigen::VectorXd features, Label label);
  void reserve(std::size_t n) { labels_.reserve(n); columns_.reserve(n); }

  std::size_t size() const override { return labels_.size(); }
  Label label(std::size_t i) const override { return labels_[i]; }
  const Eigen::VectorXd& raw(std::size_t i) const { return columns_[i]; }
  /// Copy with labels replaced; `labels` must have size() entries.
  FeatureTrainingSet relabeled(std::span<const Label> labels) const;
  Eigen::VectorXd features(std::size_t i, const AugmentSpec& spec,
                           RandomStream& rng) const override;

 private:
  int input_size_;
  FeatureGrid layout_;
  std::vector<Eigen::VectorXd> columns_;
  std::vector<Label> labels_;
  // 8 permutations indexed by quarter_turns * 4 + flip_h * 2 + flip_v.
  std::vector<std::vector<int>> perms_;
};

/// Called after each epoch with (epoch index, mean training loss of that epoch's batches).
using EpochCallback = std::function<void(int, double)>;

/// Mini-batch gradient descent on mean logistic loss + l2 |w|^2.
///
/// Sample order is reshuffled every epoch from a stream derived from
/// cfg.seed ("shuffle"); augmentation for sample i in epoch e draws from its
/// own stream derived from cfg.seed ("augment", e, i), so disabling
/// augmentation leaves the data order unchanged. Returns the updated model,
/// iterate-averaged when cfg.average_epochs > 0.
/// Throws std::invalid_argument on an empty set.
ToyClassifier train(const ToyClassifier& model, const TrainingSet& data, const TrainConfig& cfg,
                    const AugmentSpec& spec, const EpochCallback& on_epoch = {});

ToyClassifier train(const ToyClassifier& model, std::span<const LabeledImage> data,
                    const TrainConfig& cfg, const AugmentSpec& spec);

/// Mean logistic loss (with the l2 term) of `model` over un-augmented samples.
double mean_loss(const ToyClassifier& model, const TrainingSet& data, double l2);

double predict_proba(const ToyClassifier& model, const RasterImage& img);

}  // namespace patchscope
