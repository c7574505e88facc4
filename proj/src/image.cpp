#include "patchscope/image.hpp"

#include <algorithm>
#include <numeric>

namespace patchscope {

std::string_view to_string(Label label) {
  return label == Label::ActiveEoE ? "ActiveEoE" : "NonEoE";
}

Label label_from_string(std::string_view text) {
  if (text == "ActiveEoE" || text == "active" || text == "1") return Label::ActiveEoE;
  if (text == "NonEoE" || text == "non" || text == "0") return Label::NonEoE;
  throw std::invalid_argument("unknown label '" + std::string(text) + "'");
}

bool Rect::intersects(const Rect& other) const {
  return x < other.x + other.w && other.x < x + w && y < other.y + other.h && other.y < y + h;
}

namespace {

void check_dims(int width, int height) {
  if (width < 1 || height < 1)
    throw std::invalid_argument("image dimensions must be positive, got " + std::to_string(width) +
                                "x" + std::to_string(height));
}

bool rect_within(const Rect& r, int width, int height) {
  return r.x >= 0 && r.y >= 0 && r.w >= 1 && r.h >= 1 && r.x + r.w <= width &&
         r.y + r.h <= height;
}

}  // namespace

RasterImage::RasterImage(int width, int height, std::uint8_t fill)
    : width_(width), height_(height) {
  check_dims(width, height);
  pixels_.assign(static_cast<std::size_t>(width) * height * kChannels, fill);
}

RasterImage::RasterImage(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  check_dims(width, height);
  if (pixels_.size() != static_cast<std::size_t>(width) * height * kChannels)
    throw std::invalid_argument("pixel buffer length does not match width*height*3");
}

void RasterImage::set_pixel(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  auto* p = pixels_.data() + (static_cast<std::size_t>(y) * width_ + x) * kChannels;
  p[0] = r;
  p[1] = g;
  p[2] = b;
}

bool RasterImage::contains(const Rect& r) const { return rect_within(r, width_, height_); }

TissueMask::TissueMask(int width, int height, bool fill) : width_(width), height_(height) {
  check_dims(width, height);
  bits_.assign(static_cast<std::size_t>(width) * height, fill ? 1 : 0);
}

long long TissueMask::count() const {
  return std::accumulate(bits_.begin(), bits_.end(), 0LL);
}

bool TissueMask::contains(const Rect& r) const { return rect_within(r, width_, height_); }

long long TissueMask::count_in(const Rect& r) const {
  long long total = 0;
  for (int y = r.y; y < r.y + r.h; ++y) {
    const auto* row = bits_.data() + static_cast<std::size_t>(y) * width_ + r.x;
    total += std::accumulate(row, row + r.w, 0LL);
  }
  return total;
}

}  // namespace patchscope
