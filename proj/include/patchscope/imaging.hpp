#pragma once

#include <cstdint>

#include "patchscope/image.hpp"

namespace patchscope {

inline constexpr int kDefaultBackgroundThreshold = 240;

/// Marks a pixel as tissue iff min(R, G, B) < bg_threshold. Slide background
/// is near-white, stained tissue is darker in at least one channel.
TissueMask tissue_mask(const RasterImage& img, int bg_threshold = kDefaultBackgroundThreshold);

/// Tissue pixels inside `rect` divided by its area. Throws BoundsError when
/// `rect` leaves the mask.
double coverage_fraction(const TissueMask& mask, const Rect& rect);

RasterImage crop(const RasterImage& img, const Rect& rect);
TissueMask crop(const TissueMask& mask, const Rect& rect);

/// Catmull-Rom cubic convolution weight (a = -0.5) at signed distance t.
double cubic_weight(double t);

/// Bicubic resample to target_w x target_h in either direction.
///
/// Output pixel (i, j) samples the source at ((i + 0.5) * sw / tw - 0.5,
/// (j + 0.5) * sh / th - 0.5) using the 4x4 Catmull-Rom neighbourhood with
/// indices clamped to the image edge. Channels are filtered independently;
/// results are clamped to [0, 255] and rounded half away from zero.
/// Throws std::invalid_argument on a zero or negative target dimension.
RasterImage resample_bicubic(const RasterImage& img, int target_w, int target_h);

/// resample_bicubic restricted to target dims no larger than the source.
RasterImage downscale_bicubic(const RasterImage& img, int target_w, int target_h);

}  // namespace patchscope
