#include "patchscope/imaging.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace patchscope {

namespace {

std::string describe(const Rect& r) {
  return "rect(" + std::to_string(r.x) + "," + std::to_string(r.y) + "," + std::to_string(r.w) +
         "x" + std::to_string(r.h) + ")";
}

// Per output coordinate: first source tap and the four kernel weights.
struct Taps {
  std::vector<int> index;  // 4 clamped source indices per output sample
  std::vector<double> weight;
};

Taps make_taps(int src, int dst) {
  Taps taps;
  taps.index.resize(static_cast<std::size_t>(dst) * 4);
  taps.weight.resize(static_cast<std::size_t>(dst) * 4);
  const double scale = static_cast<double>(src) / dst;
  for (int o = 0; o < dst; ++o) {
    const double s = (o + 0.5) * scale - 0.5;
    const double base = std::floor(s);
    const double frac = s - base;
    for (int k = 0; k < 4; ++k) {
      const int idx = static_cast<int>(base) - 1 + k;
      taps.index[o * 4 + k] = std::clamp(idx, 0, src - 1);
      taps.weight[o * 4 + k] = cubic_weight(frac - (k - 1));
    }
  }
  return taps;
}

std::uint8_t to_intensity(double v) {
  // lround rounds half away from zero.
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
}

}  // namespace

TissueMask tissue_mask(const RasterImage& img, int bg_threshold) {
  if (bg_threshold < 0 || bg_threshold > 255)
    throw std::invalid_argument("background threshold must lie in [0, 255]");
  TissueMask mask(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      auto p = img.pixel(x, y);
      mask.set(x, y, std::min({p[0], p[1], p[2]}) < bg_threshold);
    }
  }
  return mask;
}

double coverage_fraction(const TissueMask& mask, const Rect& rect) {
  if (!mask.contains(rect)) throw BoundsError(describe(rect) + " outside mask bounds");
  return static_cast<double>(mask.count_in(rect)) / static_cast<double>(rect.area());
}

RasterImage crop(const RasterImage& img, const Rect& rect) {
  if (!img.contains(rect)) throw BoundsError(describe(rect) + " outside image bounds");
  std::vector<std::uint8_t> out(static_cast<std::size_t>(rect.area()) * RasterImage::kChannels);
  const auto src = img.data();
  const std::size_t row_bytes = static_cast<std::size_t>(rect.w) * RasterImage::kChannels;
  for (int j = 0; j < rect.h; ++j) {
    const std::size_t off =
        (static_cast<std::size_t>(rect.y + j) * img.width() + rect.x) * RasterImage::kChannels;
    std::copy_n(src.begin() + off, row_bytes, out.begin() + j * row_bytes);
  }
  return {rect.w, rect.h, std::move(out)};
}

TissueMask crop(const TissueMask& mask, const Rect& rect) {
  if (!mask.contains(rect)) throw BoundsError(describe(rect) + " outside mask bounds");
  TissueMask out(rect.w, rect.h);
  for (int j = 0; j < rect.h; ++j)
    for (int i = 0; i < rect.w; ++i) out.set(i, j, mask.at(rect.x + i, rect.y + j));
  return out;
}

double cubic_weight(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

RasterImage resample_bicubic(const RasterImage& img, int target_w, int target_h) {
  if (target_w < 1 || target_h < 1)
    throw std::invalid_argument("resample target dimensions must be positive");
  if (target_w == img.width() && target_h == img.height()) return img;

  constexpr int C = RasterImage::kChannels;
  const int sw = img.width();
  const int sh = img.height();
  const Taps tx = make_taps(sw, target_w);
  const Taps ty = make_taps(sh, target_h);
  const auto src = img.data();

  // Horizontal pass: sh rows x target_w columns, kept in double.
  std::vector<double> tmp(static_cast<std::size_t>(sh) * target_w * C);
  for (int y = 0; y < sh; ++y) {
    const std::uint8_t* row = src.data() + static_cast<std::size_t>(y) * sw * C;
    double* out = tmp.data() + static_cast<std::size_t>(y) * target_w * C;
    for (int o = 0; o < target_w; ++o) {
      const int* idx = &tx.index[o * 4];
      const double* w = &tx.weight[o * 4];
      for (int c = 0; c < C; ++c) {
        out[o * C + c] = w[0] * row[idx[0] * C + c] + w[1] * row[idx[1] * C + c] +
                         w[2] * row[idx[2] * C + c] + w[3] * row[idx[3] * C + c];
      }
    }
  }

  std::vector<std::uint8_t> result(static_cast<std::size_t>(target_w) * target_h * C);
  const std::size_t stride = static_cast<std::size_t>(target_w) * C;
  for (int o = 0; o < target_h; ++o) {
    const int* idx = &ty.index[o * 4];
    const double* w = &ty.weight[o * 4];
    const double* r0 = tmp.data() + idx[0] * stride;
    const double* r1 = tmp.data() + idx[1] * stride;
    const double* r2 = tmp.data() + idx[2] * stride;
    const double* r3 = tmp.data() + idx[3] * stride;
    std::uint8_t* out = result.data() + o * stride;
    for (std::size_t k = 0; k < stride; ++k)
      out[k] = to_intensity(w[0] * r0[k] + w[1] * r1[k] + w[2] * r2[k] + w[3] * r3[k]);
  }
  return {target_w, target_h, std::move(result)};
}

RasterImage downscale_bicubic(const RasterImage& img, int target_w, int target_h) {
  if (target_w > img.width() || target_h > img.height())
    throw std::invalid_argument("downscale target " + std::to_string(target_w) + "x" +
                                std::to_string(target_h) + " exceeds source " +
                                std::to_string(img.width()) + "x" + std::to_string(img.height()));
  return resample_bicubic(img, target_w, target_h);
}

}  // namespace patchscope
