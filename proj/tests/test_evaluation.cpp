#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "patchscope/evaluation.hpp"

using namespace patchscope;

namespace {

struct PublishedRow {
  const char* name;
  const char* tpr;
  const char* tnr;
  const char* acc;
  const char* pp;
};

// Whole-image rows (63 positive, 63 negative validation images).
constexpr PublishedRow kImageRows[] = {
    {"full-1000", "74.6%", "96.8%", "85.7%", "0.39"},
    {"full-224", "65.1%", "88.9%", "77.0%", "0.38"},
    {"patch-448", "82.5%", "87.3%", "84.9%", "0.48"},
    {"patch-224", "82.5%", "77.8%", "80.2%", "0.52"},
};

// Patch rows; class sizes unknown.
constexpr PublishedRow kPatchRows[] = {
    {"patch-448", "77.0%", "79.7%", "78.3%", "0.49"},
    {"patch-224", "73.3%", "75.2%", "74.2%", "0.49"},
};

oracle::PublishedRates rates(const PublishedRow& row) {
  return {std::stod(row.tpr) / 100.0, std::stod(row.tnr) / 100.0, std::stod(row.acc) / 100.0, std::stod(row.pp)};
}

std::vector<Outcome> outcomes_from(const ConfusionCounts& c) {
  std::vector<Outcome> out;
  for (long long i = 0; i < c.tp; ++i) out.push_back({Label::ActiveEoE, Label::ActiveEoE});
  for (long long i = 0; i < c.fn; ++i) out.push_back({Label::NonEoE, Label::ActiveEoE});
  for (long long i = 0; i < c.tn; ++i) out.push_back({Label::NonEoE, Label::NonEoE});
  for (long long i = 0; i < c.fp; ++i) out.push_back({Label::ActiveEoE, Label::NonEoE});
  return out;
}

void check_display(const Metrics& m, const PublishedRow& row) {
  CHECK(format_percent(m.tpr) == row.tpr);
  CHECK(format_percent(m.tnr) == row.tnr);
  CHECK(format_percent(m.accuracy) == row.acc);
  CHECK(format_fraction(m.pp) == row.pp);
}

}  // namespace

TEST_CASE("published whole-image rows reconstruct from integer counts") {
  for (const auto& row : kImageRows) {
    CAPTURE(row.name);
    const auto counts = oracle::back_solve(rates(row), 64, 63, 63);
    REQUIRE(counts.has_value());
    const auto r = compute_metrics(outcomes_from(*counts));
    CHECK(r.counts == *counts);
    check_display(r.metrics, row);
  }
  // Two rows pinned by hand as well.
  CHECK(oracle::back_solve(rates(kImageRows[0]), 64, 63, 63) == ConfusionCounts{47, 16, 61, 2});
  CHECK(oracle::back_solve(rates(kImageRows[2]), 64, 63, 63) == ConfusionCounts{52, 11, 55, 8});
}

TEST_CASE("published patch rows reconstruct from integer counts") {
  for (const auto& row : kPatchRows) {
    CAPTURE(row.name);
    const auto counts = oracle::back_solve(rates(row), 400);
    REQUIRE(counts.has_value());
    check_display(compute_metrics(outcomes_from(*counts)).metrics, row);
  }
}

TEST_CASE("metrics from the first published row") {
  const auto m = metrics_from_counts({47, 16, 61, 2});
  CHECK(*m.tpr == doctest::Approx(47.0 / 63));
  CHECK(*m.tnr == doctest::Approx(61.0 / 63));
  CHECK(m.accuracy == doctest::Approx(108.0 / 126));
  CHECK(m.pp == doctest::Approx(49.0 / 126));
  const auto roc = roc_point(m);
  REQUIRE(roc.has_value());
  CHECK(roc->fpr == doctest::Approx(0.032).epsilon(0.01));
  CHECK(roc->tpr == doctest::Approx(0.746).epsilon(0.001));
}

TEST_CASE("perfect classifier") {
  const auto m = metrics_from_counts({30, 0, 20, 0});
  CHECK(*m.tpr == 1.0);
  CHECK(*m.tnr == 1.0);
  CHECK(m.accuracy == 1.0);
  CHECK(m.pp == doctest::Approx(0.6));
  const auto roc = roc_point(m);
  CHECK(roc->fpr == 0.0);
  CHECK(roc->tpr == 1.0);
}

TEST_CASE("property: predicted prevalence identity") {
  std::mt19937_64 gen(107);
  for (int k = 0; k < 1000; ++k) {
    const ConfusionCounts c{static_cast<long long>(gen() % 50) + 1, static_cast<long long>(gen() % 50),
                            static_cast<long long>(gen() % 50) + 1, static_cast<long long>(gen() % 50)};
    const auto m = metrics_from_counts(c);
    const double p = static_cast<double>(c.positives()), n = static_cast<double>(c.negatives());
    CHECK(m.pp == doctest::Approx((*m.tpr * p + (1.0 - *m.tnr) * n) / (p + n)));
    CHECK(m.accuracy == doctest::Approx(static_cast<double>(c.tp + c.tn) / (p + n)));
  }
}

TEST_CASE("empty classes produce undefined rates") {
  const auto m = metrics_from_counts({5, 2, 0, 0});
  CHECK(m.tpr.has_value());
  CHECK_FALSE(m.tnr.has_value());
  CHECK_FALSE(roc_point(m).has_value());
  CHECK(format_percent(m.tnr) == "undefined");
}

TEST_CASE("Indeterminate outcomes are excluded and counted") {
  std::vector<Outcome> o = outcomes_from({3, 1, 2, 2});
  o.push_back({std::nullopt, Label::ActiveEoE});
  const auto r = compute_metrics(o);
  CHECK(r.indeterminate == 1);
  CHECK(r.counts.total() == 8);
  const std::vector<Outcome> only{{std::nullopt, Label::NonEoE}};
  CHECK_THROWS_AS(compute_metrics(only), std::invalid_argument);
  CHECK_THROWS_AS(compute_metrics(std::vector<Outcome>{}), std::invalid_argument);
}

TEST_CASE("histogram edge cases") {
  const std::vector<double> half(37, 0.5);
  const auto h = probability_histogram(half, Label::ActiveEoE);
  REQUIRE(h.counts.size() == 20);
  REQUIRE(h.bin_edges.size() == 21);
  CHECK(h.counts[10] == 37);
  CHECK(h.total() == 37);

  const std::vector<double> ends{0.0, 1.0, 1.0, 0.0, 1.0};
  const auto e = probability_histogram(ends, Label::NonEoE);
  CHECK(e.counts.front() == 2);
  CHECK(e.counts.back() == 3);
  CHECK(e.total() == 5);
  const std::vector<double> bad{1.2};
  CHECK_THROWS_AS(probability_histogram(bad, Label::NonEoE), std::invalid_argument);
}

TEST_CASE("histogram matches a direct binning oracle") {
  std::mt19937_64 gen(109);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int bins : {20, 7, 1}) {
    std::vector<double> ps(100);
    for (auto& p : ps) p = unit(gen);
    const auto h = probability_histogram(ps, Label::ActiveEoE, bins);
    std::vector<long long> want(static_cast<std::size_t>(bins), 0);
    for (double p : ps) {
      int k = 0;
      while (k + 1 < bins && p >= static_cast<double>(k + 1) / bins) ++k;
      ++want[static_cast<std::size_t>(k)];
    }
    CHECK(h.counts == want);
  }
}

TEST_CASE("central band mass") {
  const std::vector<double> half(5, 0.5);
  CHECK(central_band_mass(half) == 1.0);
  const std::vector<double> ends{0.1, 0.9};
  CHECK(central_band_mass(ends) == 0.0);
  const std::vector<double> edges{0.4, 0.6, 0.61};
  CHECK(central_band_mass(edges) == doctest::Approx(2.0 / 3));
  CHECK_THROWS_AS(central_band_mass(std::vector<double>{}), std::invalid_argument);

  std::mt19937_64 gen(113);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> ps(20);
    for (auto& p : ps) p = unit(gen);
    const double lo = unit(gen) * 0.5, hi = 0.5 + unit(gen) * 0.5, widen = unit(gen) * 0.2;
    const double m = central_band_mass(ps, lo, hi);
    CHECK(m >= 0.0);
    CHECK(m <= 1.0);
    CHECK(central_band_mass(ps, lo - widen, hi + widen) >= m);
  }
}

TEST_CASE("random labels: deterministic, balanced and blind to the old labels") {
  CHECK(random_labels(500, 9) == random_labels(500, 9));
  CHECK(random_labels(500, 9) != random_labels(500, 10));
  const auto labels = random_labels(10000, 3);
  long long pos = 0;
  for (Label l : labels) pos += is_positive(l);
  CHECK(std::fabs(pos / 10000.0 - 0.5) <= 0.02);

  struct Item {
    int id;
    Label label;
  };
  std::vector<Item> a, b;
  for (int i = 0; i < 50; ++i) {
    a.push_back({i, Label::ActiveEoE});
    b.push_back({i, i % 3 ? Label::NonEoE : Label::ActiveEoE});
  }
  const auto ra = random_label_control<Item>(a, 4), rb = random_label_control<Item>(b, 4);
  for (int i = 0; i < 50; ++i) {
    CHECK(ra[i].id == i);
    CHECK(ra[i].label == rb[i].label);
  }
}

TEST_CASE("coin classifier lands near the diagonal") {
  std::mt19937_64 gen(127);
  std::vector<Outcome> o;
  for (int i = 0; i < 1000; ++i)
    o.push_back({gen() % 2 ? Label::ActiveEoE : Label::NonEoE, i % 2 ? Label::ActiveEoE : Label::NonEoE});
  const auto roc = roc_point(compute_metrics(o).metrics);
  REQUIRE(roc.has_value());
  CHECK(std::fabs(roc->tpr - roc->fpr) / std::sqrt(2.0) < 0.1);
}

TEST_CASE("rank AUC agrees with the pairwise count") {
  std::mt19937_64 gen(131);
  for (int k = 0; k < 50; ++k) {
    const int n = 2 + static_cast<int>(gen() % 40);
    std::vector<double> s(static_cast<std::size_t>(n));
    std::vector<Label> t(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      s[i] = static_cast<double>(gen() % 10) / 10.0;  // plenty of ties
      t[i] = i % 2 ? Label::ActiveEoE : Label::NonEoE;
    }
    double wins = 0, pairs = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (is_positive(t[i]) && !is_positive(t[j])) {
          pairs += 1;
          wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
        }
    const auto auc = rank_auc(s, t);
    REQUIRE(auc.has_value());
    CHECK(*auc == doctest::Approx(wins / pairs));
  }
  const std::vector<double> s{0.1, 0.2};
  const std::vector<Label> t{Label::NonEoE, Label::NonEoE};
  CHECK_FALSE(rank_auc(s, t).has_value());
}

TEST_CASE("binomial sigma") {
  CHECK(binomial_sigma(100) == doctest::Approx(0.05));
  CHECK(binomial_sigma(10000) == doctest::Approx(0.005));
}
