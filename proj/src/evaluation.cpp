#include "patchscope/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "patchscope/random.hpp"

namespace patchscope {

ConfusionCounts count_outcomes(std::span<const Outcome> outcomes) {
  ConfusionCounts c;
  for (const auto& o : outcomes) {
    if (!o.predicted) continue;
    const bool pred = is_positive(*o.predicted);
    if (is_positive(o.truth))
      ++(pred ? c.tp : c.fn);
    else
      ++(pred ? c.fp : c.tn);
  }
  return c;
}

Metrics metrics_from_counts(const ConfusionCounts& c) {
  Metrics m;
  if (c.positives() > 0) m.tpr = static_cast<double>(c.tp) / static_cast<double>(c.positives());
  if (c.negatives() > 0) m.tnr = static_cast<double>(c.tn) / static_cast<double>(c.negatives());
  if (c.total() > 0) {
    const auto n = static_cast<double>(c.total());
    m.accuracy = static_cast<double>(c.tp + c.tn) / n;
    m.pp = static_cast<double>(c.tp + c.fp) / n;
  }
  return m;
}

MetricsResult compute_metrics(std::span<const Outcome> outcomes) {
  MetricsResult r;
  r.counts = count_outcomes(outcomes);
  r.indeterminate = std::count_if(outcomes.begin(), outcomes.end(),
                                  [](const Outcome& o) { return !o.predicted; });
  if (r.counts.total() == 0)
    throw std::invalid_argument("compute_metrics: no determinate predictions");
  r.metrics = metrics_from_counts(r.counts);
  return r;
}

std::optional<RocPoint> roc_point(const Metrics& m) {
  if (!m.tpr || !m.tnr) return std::nullopt;
  return RocPoint{1.0 - *m.tnr, *m.tpr};
}

std::string format_percent(std::optional<double> fraction) {
  if (!fraction) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", *fraction * 100.0);
  return buf;
}

std::string format_fraction(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", value);
  return buf;
}

long long ProbHistogram::total() const { return std::accumulate(counts.begin(), counts.end(), 0LL); }

ProbHistogram probability_histogram(std::span<const double> probs, Label truth_class, int bins) {
  if (bins < 1) throw std::invalid_argument("histogram needs at least one bin");
  ProbHistogram h;
  h.truth_class = truth_class;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  h.bin_edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int k = 0; k <= bins; ++k) h.bin_edges[k] = static_cast<double>(k) / bins;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("probability outside [0, 1] in histogram input");
    const int k = std::min(bins - 1, static_cast<int>(std::floor(p * bins)));
    ++h.counts[k];
  }
  return h;
}

double central_band_mass(std::span<const double> probs, double lo, double hi) {
  if (probs.empty()) throw std::invalid_argument("central_band_mass: empty input");
  const auto inside = std::count_if(probs.begin(), probs.end(),
                                    [&](double p) { return p >= lo && p <= hi; });
  return static_cast<double>(inside) / static_cast<double>(probs.size());
}

std::vector<Label> random_labels(std::size_t n, std::uint64_t seed) {
  RandomStream rng(derive_seed(seed, "control"));
  std::vector<Label> labels(n);
  for (auto& l : labels) l = rng.bernoulli() ? Label::ActiveEoE : Label::NonEoE;
  return labels;
}

std::optional<double> rank_auc(std::span<const double> scores, std::span<const Label> truths) {
  if (scores.size() != truths.size())
    throw std::invalid_argument("rank_auc: scores and truths differ in length");
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i)
    (is_positive(truths[i]) ? pos : neg).push_back(scores[i]);
  if (pos.empty() || neg.empty()) return std::nullopt;
  std::sort(neg.begin(), neg.end());
  double wins = 0.0;
  for (double s : pos) {
    const auto lo = std::lower_bound(neg.begin(), neg.end(), s);
    const auto hi = std::upper_bound(neg.begin(), neg.end(), s);
    wins += static_cast<double>(lo - neg.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

double binomial_sigma(std::size_t n, double p) {
  if (n == 0) throw std::invalid_argument("binomial_sigma: n must be positive");
  return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

}  // namespace patchscope
