#pragma once

#include <filesystem>
#include <stdexcept>

#include "patchscope/image.hpp"

namespace patchscope {

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads an 8-bit RGB PNG or binary PPM (P6), chosen by file signature.
/// Grayscale and alpha PNGs are expanded or stripped to RGB.
RasterImage read_image(const std::filesystem::path& path);

void write_png(const RasterImage& img, const std::filesystem::path& path);
void write_ppm(const RasterImage& img, const std::filesystem::path& path);

/// Writes either format depending on the extension (.png, .ppm).
void write_image(const RasterImage& img, const std::filesystem::path& path);

/// Binary PGM (P5) with tissue = 255, background = 0.
void write_mask_pgm(const TissueMask& mask, const std::filesystem::path& path);
/// Any nonzero sample reads back as tissue.
TissueMask read_mask_pgm(const std::filesystem::path& path);

}  // namespace patchscope
