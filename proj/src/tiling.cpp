#include "patchscope/tiling.hpp"

#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "patchscope/imaging.hpp"

namespace patchscope {

std::vector<int> window_origins(int dim, int patch) {
  if (dim <= patch) return {0};
  const int stride = patch / 2;
  std::vector<int> origins;
  int o = 0;
  for (; o + patch <= dim; o += stride) origins.push_back(o);
  if (origins.back() + patch < dim) origins.push_back(dim - patch);
  return origins;
}

std::vector<Rect> tile(int img_w, int img_h, int patch) {
  if (patch < 2 || patch % 2 != 0)
    throw std::invalid_argument("patch size must be even and >= 2, got " + std::to_string(patch));
  if (img_w < 1 || img_h < 1) throw std::invalid_argument("image dimensions must be positive");
  const auto xs = window_origins(img_w, patch);
  const auto ys = window_origins(img_h, patch);
  const int w = std::min(patch, img_w);
  const int h = std::min(patch, img_h);
  std::vector<Rect> rects;
  rects.reserve(xs.size() * ys.size());
  for (int y : ys)
    for (int x : xs) rects.push_back({x, y, w, h});
  return rects;
}

std::vector<PatchRef> filter_patches(std::span<const Rect> rects, const TissueMask& mask,
                                     double threshold, const std::string& parent_id, Label label) {
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw std::invalid_argument("coverage threshold must lie in [0, 1]");
  std::vector<PatchRef> kept;
  for (std::size_t i = 0; i < rects.size(); ++i) {
    const double cov = coverage_fraction(mask, rects[i]);
    if (cov > threshold) kept.push_back({parent_id, rects[i], cov, label, static_cast<int>(i)});
  }
  return kept;
}

void write_patch_csv(std::ostream& out, std::span<const PatchRef> patches, bool header) {
  if (header) out << "parent_id,patch_index,x,y,w,h,coverage,label\n";
  char cov[32];
  for (const auto& p : patches) {
    std::snprintf(cov, sizeof cov, "%.6f", p.coverage);
    out << p.parent_id << ',' << p.patch_index << ',' << p.rect.x << ',' << p.rect.y << ','
        << p.rect.w << ',' << p.rect.h << ',' << cov << ',' << to_string(p.inherited_label) << '\n';
  }
}

}  // namespace patchscope
