#pragma once

#include <span>
#include <string>

#include "patchscope/experiment.hpp"

namespace patchscope {

/// Scatter of each strategy's image-level (FPR, TPR) point.
std::string roc_svg(std::span<const StrategyResult> results);

/// Paired probability histograms (truth positive above, truth negative
/// below) for one strategy, plus the random-label control when present.
std::string histogram_svg(const StrategyResult& result);

}  // namespace patchscope
