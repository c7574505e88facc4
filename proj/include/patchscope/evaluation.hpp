#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "patchscope/image.hpp"

namespace patchscope {

/// One scored item: predicted label (empty when Indeterminate) and ground truth.
struct Outcome {
  std::optional<Label> predicted;
  Label truth = Label::NonEoE;
};

/// Positive class is ActiveEoE.
struct ConfusionCounts {
  long long tp = 0, fn = 0, tn = 0, fp = 0;

  long long positives() const { return tp + fn; }
  long long negatives() const { return tn + fp; }
  long long total() const { return tp + fn + tn + fp; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Rates as fractions. An empty optional is the undefined marker: TPR with no
/// positive-truth items, TNR with no negative-truth items.
struct Metrics {
  std::optional<double> tpr;
  std::optional<double> tnr;
  double accuracy = 0.0;
  double pp = 0.0;
};

struct MetricsResult {
  ConfusionCounts counts;
  Metrics metrics;
  long long indeterminate = 0;
};

ConfusionCounts count_outcomes(std::span<const Outcome> outcomes);
Metrics metrics_from_counts(const ConfusionCounts& c);

/// Confusion counts and rates over the determinate outcomes; Indeterminate
/// entries are counted separately. Throws std::invalid_argument when no
/// determinate outcome remains.
MetricsResult compute_metrics(std::span<const Outcome> outcomes);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

/// (1 - TNR, TPR); empty when either rate is undefined.
std::optional<RocPoint> roc_point(const Metrics& m);

/// "74.6%" style (one decimal), or "undefined".
std::string format_percent(std::optional<double> fraction);
/// "0.39" style (two decimals).
std::string format_fraction(double value);

struct ProbHistogram {
  std::vector<double> bin_edges;  // bins + 1 uniform edges over [0, 1]
  std::vector<long long> counts;
  Label truth_class = Label::NonEoE;

  long long total() const;
};

/// Uniform bins over [0, 1]; bin k is [k/B, (k+1)/B) and the last bin is
/// closed on the right. Throws std::invalid_argument for probabilities outside
/// [0, 1] or bins < 1.
ProbHistogram probability_histogram(std::span<const double> probs, Label truth_class, int bins = 20);

inline constexpr double kBandLo = 0.4;
inline constexpr double kBandHi = 0.6;

/// Fraction of probabilities inside the closed band [lo, hi]. Low values mean
/// confident, two-sided predictions; values near 1 mean mass piled around 0.5.
/// Throws std::invalid_argument for an empty input.
double central_band_mass(std::span<const double> probs, double lo = kBandLo, double hi = kBandHi);

/// n labels drawn independently and uniformly over the two classes.
std::vector<Label> random_labels(std::size_t n, std::uint64_t seed);

/// Returns a copy of `items` whose labels are replaced by random_labels(n, seed).
/// `Item` must expose a `label` member.
template <typename Item>
std::vector<Item> random_label_control(std::span<const Item> items, std::uint64_t seed) {
  std::vector<Item> out(items.begin(), items.end());
  const auto labels = random_labels(out.size(), seed);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].label = labels[i];
  return out;
}

/// Area under the ROC curve of `scores` against `truths` via the
/// Mann-Whitney statistic; ties count one half. Empty when a class is absent.
std::optional<double> rank_auc(std::span<const double> scores, std::span<const Label> truths);

/// Standard deviation of a binomial proportion over n trials.
double binomial_sigma(std::size_t n, double p = 0.5);

}  // namespace patchscope
