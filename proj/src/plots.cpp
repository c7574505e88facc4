#include "patchscope/plots.hpp"

#include <algorithm>
#include <cstdio>

namespace patchscope {

namespace {

constexpr double kWidth = 420, kHeight = 420, kMargin = 50;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string text(double x, double y, const std::string& s, const char* anchor = "middle") {
  return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"11\" text-anchor=\"" + anchor +
         "\">" + s + "</text>\n";
}

std::string open(double w, double h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) + "\" height=\"" + num(h) +
         "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

// Bars of one histogram inside the box [x0, x0+w] x [y0, y0+h], scaled to `peak`.
std::string bars(const ProbHistogram& h, double x0, double y0, double w, double ht, int peak,
                 const char* colour) {
  std::string out = "<rect x=\"" + num(x0) + "\" y=\"" + num(y0) + "\" width=\"" + num(w) +
                    "\" height=\"" + num(ht) + "\" fill=\"none\" stroke=\"black\"/>\n";
  const double bw = w / static_cast<double>(h.counts.size());
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    const double bh = peak > 0 ? ht * h.counts[b] / peak : 0.0;
    out += "<rect x=\"" + num(x0 + b * bw) + "\" y=\"" + num(y0 + ht - bh) + "\" width=\"" + num(bw) +
           "\" height=\"" + num(bh) + "\" fill=\"" + colour + "\" stroke=\"white\"/>\n";
  }
  return out;
}

int peak_of(const ProbHistogram& a, const ProbHistogram& b) {
  int peak = 0;
  for (int c : a.counts) peak = std::max(peak, c);
  for (int c : b.counts) peak = std::max(peak, c);
  return peak;
}

}  // namespace

std::string roc_svg(std::span<const StrategyResult> results) {
  const double side = kWidth - 2 * kMargin;
  std::string out = open(kWidth, kHeight);
  out += "<rect x=\"" + num(kMargin) + "\" y=\"" + num(kMargin) + "\" width=\"" + num(side) +
         "\" height=\"" + num(side) + "\" fill=\"none\" stroke=\"black\"/>\n";
  out += "<line x1=\"" + num(kMargin) + "\" y1=\"" + num(kMargin + side) + "\" x2=\"" +
         num(kMargin + side) + "\" y2=\"" + num(kMargin) + "\" stroke=\"#bbb\" stroke-dasharray=\"4 4\"/>\n";
  out += text(kWidth / 2, kHeight - 12, "false positive rate");
  out += text(14, kHeight / 2, "TPR");
  static const char* colours[] = {"#1b6ca8", "#d1495b", "#2e8b57", "#edae49", "#6a4c93", "#555555"};
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    const char* colour = colours[i % std::size(colours)];
    out += text(kMargin + 8, kMargin + 16 + 14 * static_cast<double>(i), r.strategy.name(), "start");
    if (!r.image_metrics) continue;
    const auto roc = roc_point(r.image_metrics->metrics);
    if (!roc) continue;
    out += "<circle cx=\"" + num(kMargin + roc->fpr * side) + "\" cy=\"" +
           num(kMargin + (1.0 - roc->tpr) * side) + "\" r=\"5\" fill=\"" + colour + "\"/>\n";
    out += "<circle cx=\"" + num(kMargin) + "\" cy=\"" + num(kMargin + 12 + 14 * static_cast<double>(i)) +
           "\" r=\"4\" fill=\"" + colour + "\"/>\n";
  }
  return out + "</svg>\n";
}

std::string histogram_svg(const StrategyResult& result) {
  const int panels = result.control ? 2 : 1;
  const double panel_w = kWidth - 2 * kMargin, half = 140;
  std::string out = open(kWidth * panels, 2 * half + 2 * kMargin + 20);
  auto panel = [&](double x0, const ProbHistogram& pos, const ProbHistogram& neg, const std::string& title) {
    const int peak = peak_of(pos, neg);
    std::string s = text(x0 + panel_w / 2, kMargin - 20, title);
    s += bars(pos, x0, kMargin, panel_w, half, peak, "#d1495b");
    s += bars(neg, x0, kMargin + half + 10, panel_w, half, peak, "#1b6ca8");
    s += text(x0, kMargin + 2 * half + 26, "0", "start");
    s += text(x0 + panel_w, kMargin + 2 * half + 26, "1", "end");
    s += text(x0 + panel_w / 2, kMargin + 2 * half + 26, "P(ActiveEoE)");
    return s;
  };
  out += panel(kMargin, result.truth_positive, result.truth_negative, result.strategy.name());
  if (result.control)
    out += panel(kWidth + kMargin, result.control->truth_positive, result.control->truth_negative,
                 result.strategy.name() + " random labels");
  return out + "</svg>\n";
}

}  // namespace patchscope
