#pragma once

#include <vector>

#include "patchscope/image.hpp"
#include "patchscope/random.hpp"

namespace patchscope {

/// Training-time geometric augmentation ranges.
struct AugmentSpec {
  std::vector<int> right_angles{0, 90, 180, 270};  // degrees, each a multiple of 90
  double max_extra_rotation_deg = 0.0;  // continuous jitter drawn from [-max, max]
  double max_translation = 0.10;        // fraction of patch side, in [0, 0.5]
  double scale_lo = 0.9;
  double scale_hi = 1.1;
  bool flip_h = true;
  bool flip_v = true;

  /// Throws std::invalid_argument on out-of-range fields.
  void validate() const;
  /// True when every transform the spec can draw is an exact pixel permutation.
  bool is_dihedral() const;

  static AugmentSpec identity();
  friend bool operator==(const AugmentSpec&, const AugmentSpec&) = default;
};

/// One concrete draw from an AugmentSpec.
struct AugmentParams {
  int quarter_turns = 0;  // clockwise
  double extra_rotation_deg = 0.0;
  double scale = 1.0;
  int shift_x = 0;
  int shift_y = 0;
  bool flip_h = false;
  bool flip_v = false;
};

/// Draws parameters in a fixed order (angle, jitter, scale, shift x, shift y,
/// flip h, flip v). Every draw consumes the stream even when disabled.
AugmentParams sample_augment(const AugmentSpec& spec, int side, RandomStream& rng);

/// Applies scale, rotation, translation and flips in that order. Output keeps
/// the input dimensions; exposed regions become white. Requires a square patch.
RasterImage apply_augment(const RasterImage& patch, const AugmentParams& params);

RasterImage augment(const RasterImage& patch, const AugmentSpec& spec, RandomStream& rng);

RasterImage rotate_quarter_turns(const RasterImage& img, int quarter_turns);
RasterImage flip_horizontal(const RasterImage& img);
RasterImage flip_vertical(const RasterImage& img);
RasterImage translate(const RasterImage& img, int dx, int dy);
/// Zoom about the centre by `factor`, keeping dimensions.
RasterImage scale_about_center(const RasterImage& img, double factor);
/// Bicubic rotation about the centre by `degrees` clockwise.
RasterImage rotate_bicubic(const RasterImage& img, double degrees);

}  // namespace patchscope
