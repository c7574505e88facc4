#include "patchscope/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "patchscope/imaging.hpp"

namespace patchscope {

namespace {

constexpr std::uint8_t kFill = 255;

void require_square(const RasterImage& img) {
  if (img.width() != img.height())
    throw std::invalid_argument("augmentation requires a square patch, got " +
                                std::to_string(img.width()) + "x" + std::to_string(img.height()));
}

}  // namespace

void AugmentSpec::validate() const {
  if (right_angles.empty()) throw std::invalid_argument("augment: right_angles must not be empty");
  for (int a : right_angles)
    if (a % 90 != 0) throw std::invalid_argument("augment: right angle " + std::to_string(a) + " is not a multiple of 90");
  if (max_extra_rotation_deg < 0.0) throw std::invalid_argument("augment: negative rotation jitter");
  if (!(max_translation >= 0.0 && max_translation <= 0.5))
    throw std::invalid_argument("augment: translation fraction must lie in [0, 0.5]");
  if (!(scale_lo > 0.0 && scale_lo <= scale_hi))
    throw std::invalid_argument("augment: scale range must satisfy 0 < lo <= hi");
}

bool AugmentSpec::is_dihedral() const {
  return max_extra_rotation_deg == 0.0 && max_translation == 0.0 && scale_lo == 1.0 &&
         scale_hi == 1.0;
}

AugmentSpec AugmentSpec::identity() {
  AugmentSpec s;
  s.right_angles = {0};
  s.max_translation = 0.0;
  s.scale_lo = s.scale_hi = 1.0;
  s.flip_h = s.flip_v = false;
  return s;
}

AugmentParams sample_augment(const AugmentSpec& spec, int side, RandomStream& rng) {
  AugmentParams p;
  const int angle = spec.right_angles[rng.below(spec.right_angles.size())];
  p.quarter_turns = ((angle / 90) % 4 + 4) % 4;
  p.extra_rotation_deg = rng.uniform(-spec.max_extra_rotation_deg, spec.max_extra_rotation_deg);
  p.scale = rng.uniform(spec.scale_lo, spec.scale_hi);
  const int max_shift = static_cast<int>(std::floor(spec.max_translation * side));
  p.shift_x = rng.uniform_int(-max_shift, max_shift);
  p.shift_y = rng.uniform_int(-max_shift, max_shift);
  const bool fh = rng.bernoulli();
  const bool fv = rng.bernoulli();
  p.flip_h = spec.flip_h && fh;
  p.flip_v = spec.flip_v && fv;
  return p;
}

RasterImage rotate_quarter_turns(const RasterImage& img, int quarter_turns) {
  quarter_turns = ((quarter_turns % 4) + 4) % 4;
  if (quarter_turns == 0) return img;
  const int w = img.width();
  const int h = img.height();
  const bool swap = quarter_turns % 2 == 1;
  RasterImage out(swap ? h : w, swap ? w : h);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      int sx, sy;
      switch (quarter_turns) {
        case 1: sx = y; sy = h - 1 - x; break;          // clockwise
        case 2: sx = w - 1 - x; sy = h - 1 - y; break;
        default: sx = w - 1 - y; sy = x; break;         // counter-clockwise
      }
      auto p = img.pixel(sx, sy);
      out.set_pixel(x, y, p[0], p[1], p[2]);
    }
  }
  return out;
}

RasterImage flip_horizontal(const RasterImage& img) {
  RasterImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      auto p = img.pixel(img.width() - 1 - x, y);
      out.set_pixel(x, y, p[0], p[1], p[2]);
    }
  return out;
}

RasterImage flip_vertical(const RasterImage& img) {
  RasterImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      auto p = img.pixel(x, img.height() - 1 - y);
      out.set_pixel(x, y, p[0], p[1], p[2]);
    }
  return out;
}

RasterImage translate(const RasterImage& img, int dx, int dy) {
  if (dx == 0 && dy == 0) return img;
  RasterImage out(img.width(), img.height(), kFill);
  for (int y = 0; y < img.height(); ++y) {
    const int sy = y - dy;
    if (sy < 0 || sy >= img.height()) continue;
    for (int x = 0; x < img.width(); ++x) {
      const int sx = x - dx;
      if (sx < 0 || sx >= img.width()) continue;
      auto p = img.pixel(sx, sy);
      out.set_pixel(x, y, p[0], p[1], p[2]);
    }
  }
  return out;
}

RasterImage scale_about_center(const RasterImage& img, double factor) {
  if (!(factor > 0.0)) throw std::invalid_argument("scale factor must be positive");
  const int w = img.width();
  const int h = img.height();
  const int sw = std::max(1, static_cast<int>(std::lround(w * factor)));
  const int sh = std::max(1, static_cast<int>(std::lround(h * factor)));
  if (sw == w && sh == h) return img;
  const RasterImage scaled = resample_bicubic(img, sw, sh);
  RasterImage out(w, h, kFill);
  // Offset of the scaled image's origin inside the output frame.
  const int ox = (w - sw) / 2;
  const int oy = (h - sh) / 2;
  for (int y = 0; y < h; ++y) {
    const int sy = y - oy;
    if (sy < 0 || sy >= sh) continue;
    for (int x = 0; x < w; ++x) {
      const int sx = x - ox;
      if (sx < 0 || sx >= sw) continue;
      auto p = scaled.pixel(sx, sy);
      out.set_pixel(x, y, p[0], p[1], p[2]);
    }
  }
  return out;
}

RasterImage rotate_bicubic(const RasterImage& img, double degrees) {
  if (degrees == 0.0) return img;
  const int w = img.width();
  const int h = img.height();
  const double theta = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double cx = w / 2.0;
  const double cy = h / 2.0;
  RasterImage out(w, h, kFill);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // Inverse-map the output pixel centre into the source frame.
      const double dx = x + 0.5 - cx;
      const double dy = y + 0.5 - cy;
      const double sx = c * dx + s * dy + cx - 0.5;
      const double sy = -s * dx + c * dy + cy - 0.5;
      if (sx < -1.0 || sy < -1.0 || sx > w || sy > h) continue;
      const double bx = std::floor(sx);
      const double by = std::floor(sy);
      double wx[4], wy[4];
      for (int k = 0; k < 4; ++k) {
        wx[k] = cubic_weight(sx - bx - (k - 1));
        wy[k] = cubic_weight(sy - by - (k - 1));
      }
      for (int ch = 0; ch < RasterImage::kChannels; ++ch) {
        double acc = 0.0;
        for (int j = 0; j < 4; ++j) {
          const int ty = static_cast<int>(by) - 1 + j;
          for (int i = 0; i < 4; ++i) {
            const int tx = static_cast<int>(bx) - 1 + i;
            const bool inside = tx >= 0 && tx < w && ty >= 0 && ty < h;
            acc += wy[j] * wx[i] * (inside ? img.at(tx, ty, ch) : kFill);
          }
        }
        out.at(x, y, ch) = static_cast<std::uint8_t>(std::lround(std::clamp(acc, 0.0, 255.0)));
      }
    }
  }
  return out;
}

RasterImage apply_augment(const RasterImage& patch, const AugmentParams& params) {
  require_square(patch);
  RasterImage out = scale_about_center(patch, params.scale);
  out = rotate_quarter_turns(out, params.quarter_turns);
  out = rotate_bicubic(out, params.extra_rotation_deg);
  out = translate(out, params.shift_x, params.shift_y);
  if (params.flip_h) out = flip_horizontal(out);
  if (params.flip_v) out = flip_vertical(out);
  return out;
}

RasterImage augment(const RasterImage& patch, const AugmentSpec& spec, RandomStream& rng) {
  require_square(patch);
  return apply_augment(patch, sample_augment(spec, patch.width(), rng));
}

}  // namespace patchscope
