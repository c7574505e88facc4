#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace patchscope {

/// Diagnostic class of an image, patch or prediction. Positive class is ActiveEoE.
enum class Label : std::uint8_t { NonEoE = 0, ActiveEoE = 1 };

std::string_view to_string(Label label);
Label label_from_string(std::string_view text);

inline bool is_positive(Label label) { return label == Label::ActiveEoE; }

/// Thrown when a rectangle does not lie inside its parent raster.
class BoundsError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Axis-aligned pixel rectangle: (x, y) is the top-left corner.
struct Rect {
  int x = 0;
  int y = 0;
  int w = 1;
  int h = 1;

  long long area() const { return static_cast<long long>(w) * h; }
  bool intersects(const Rect& other) const;
  friend bool operator==(const Rect&, const Rect&) = default;
};

/// Row-major, channel-interleaved 8-bit RGB raster.
class RasterImage {
 public:
  static constexpr int kChannels = 3;

  RasterImage() = default;
  /// Allocates a width x height image filled with `fill` in every channel.
  RasterImage(int width, int height, std::uint8_t fill = 0);
  /// Adopts an existing buffer; its length must be width * height * 3.
  RasterImage(int width, int height, std::vector<std::uint8_t> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }
  std::size_t size_bytes() const { return pixels_.size(); }

  std::uint8_t at(int x, int y, int c) const {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * kChannels + c];
  }
  std::uint8_t& at(int x, int y, int c) {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * kChannels + c];
  }

  std::span<const std::uint8_t> pixel(int x, int y) const {
    return {pixels_.data() + (static_cast<std::size_t>(y) * width_ + x) * kChannels, kChannels};
  }
  void set_pixel(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b);

  std::span<const std::uint8_t> data() const { return pixels_; }
  std::span<std::uint8_t> data() { return pixels_; }

  Rect bounds() const { return {0, 0, width_, height_}; }
  bool contains(const Rect& r) const;

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// Binary foreground map; true marks tissue.
class TissueMask {
 public:
  TissueMask() = default;
  TissueMask(int width, int height, bool fill = false);

  int width() const { return width_; }
  int height() const { return height_; }

  bool at(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(int x, int y, bool value) {
    bits_[static_cast<std::size_t>(y) * width_ + x] = value ? 1 : 0;
  }

  long long count() const;
  Rect bounds() const { return {0, 0, width_, height_}; }
  bool contains(const Rect& r) const;

  /// Number of tissue pixels inside `r`; `r` must lie within bounds.
  long long count_in(const Rect& r) const;

  std::span<const std::uint8_t> bits() const { return bits_; }

  friend bool operator==(const TissueMask&, const TissueMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

}  // namespace patchscope
