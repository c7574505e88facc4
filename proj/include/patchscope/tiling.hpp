#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "patchscope/image.hpp"

namespace patchscope {

inline constexpr double kDefaultCoverageThreshold = 0.10;

/// A window of a parent image that survived the coverage filter.
struct PatchRef {
  std::string parent_id;
  Rect rect;
  double coverage = 0.0;
  Label inherited_label = Label::NonEoE;
  int patch_index = 0;  // position in the row-major tile() enumeration

  friend bool operator==(const PatchRef&, const PatchRef&) = default;
};

/// Window origins along one axis: multiples of patch/2, with the final origin
/// pulled back to (dim - patch) so the last window ends on the image edge.
/// A dim no larger than patch yields the single origin 0.
std::vector<int> window_origins(int dim, int patch);

/// Half-stride sliding windows over an img_w x img_h image, row-major by (y, x).
/// Windows are patch x patch, except along an axis where the image is smaller
/// than the patch; there the extent is the image dimension.
/// Throws std::invalid_argument unless patch is even and >= 2.
std::vector<Rect> tile(int img_w, int img_h, int patch);

/// Keeps windows whose tissue coverage is strictly greater than `threshold`.
/// patch_index is the window's position in `rects`, so it survives filtering.
std::vector<PatchRef> filter_patches(std::span<const Rect> rects, const TissueMask& mask,
                                     double threshold = kDefaultCoverageThreshold,
                                     const std::string& parent_id = {},
                                     Label label = Label::NonEoE);

/// CSV: parent_id,patch_index,x,y,w,h,coverage,label
void write_patch_csv(std::ostream& out, std::span<const PatchRef> patches, bool header = true);

}  // namespace patchscope
