#include "patchscope/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace patchscope {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw ImageIoError("cannot open '" + path.string() + "'");
  return f;
}

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
  auto* where = static_cast<std::string*>(png_get_error_ptr(png));
  throw ImageIoError("libpng: " + std::string(msg) + " (" + *where + ")");
}

void png_warn(png_structp, png_const_charp) {}

RasterImage read_png(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  std::string where = path.string();
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &where, png_fail, png_warn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) throw ImageIoError("libpng: out of memory");
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};

  png_init_io(png, f.get());
  png_read_info(png, info);
  const auto width = png_get_image_width(png, info);
  const auto height = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  if (png_get_rowbytes(png, info) != static_cast<png_size_t>(width) * 3)
    throw ImageIoError("unsupported PNG layout in '" + where + "'");

  RasterImage img(static_cast<int>(width), static_cast<int>(height));
  auto data = img.data();
  std::vector<png_bytep> rows(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = data.data() + static_cast<std::size_t>(y) * width * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  return img;
}

// Reads the next whitespace-delimited header token of a PNM file, skipping comments.
int pnm_token(std::istream& in, const std::string& where) {
  int c;
  while ((c = in.peek()) != EOF) {
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int value = -1;
  if (!(in >> value)) throw ImageIoError("malformed PNM header in '" + where + "'");
  return value;
}

std::vector<std::uint8_t> read_pnm(const std::filesystem::path& path, const char* magic, int& w,
                                   int& h, int channels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot open '" + path.string() + "'");
  std::array<char, 2> m{};
  in.read(m.data(), 2);
  if (!in || m[0] != magic[0] || m[1] != magic[1])
    throw ImageIoError("'" + path.string() + "' is not a " + magic + " file");
  w = pnm_token(in, path.string());
  h = pnm_token(in, path.string());
  const int maxval = pnm_token(in, path.string());
  if (w < 1 || h < 1 || maxval != 255)
    throw ImageIoError("unsupported PNM geometry or maxval in '" + path.string() + "'");
  in.get();  // single whitespace after maxval
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(w) * h * channels);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size()))
    throw ImageIoError("truncated pixel data in '" + path.string() + "'");
  return buf;
}

void write_pnm(const std::filesystem::path& path, const char* magic, int w, int h,
               std::span<const std::uint8_t> data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageIoError("cannot write '" + path.string() + "'");
  out << magic << '\n' << w << ' ' << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw ImageIoError("write failed for '" + path.string() + "'");
}

}  // namespace

RasterImage read_image(const std::filesystem::path& path) {
  std::array<unsigned char, 8> sig{};
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ImageIoError("cannot open '" + path.string() + "'");
    in.read(reinterpret_cast<char*>(sig.data()), sig.size());
    if (in.gcount() < 2) throw ImageIoError("'" + path.string() + "' is too short to be an image");
  }
  if (png_sig_cmp(sig.data(), 0, sig.size()) == 0) return read_png(path);
  if (sig[0] == 'P' && sig[1] == '6') {
    int w = 0, h = 0;
    auto buf = read_pnm(path, "P6", w, h, 3);
    return {w, h, std::move(buf)};
  }
  throw ImageIoError("'" + path.string() + "' is neither PNG nor binary PPM");
}

void write_png(const RasterImage& img, const std::filesystem::path& path) {
  FilePtr f = open_file(path, "wb");
  std::string where = path.string();
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &where, png_fail, png_warn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) throw ImageIoError("libpng: out of memory");
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};

  png_init_io(png, f.get());
  png_set_IHDR(png, info, img.width(), img.height(), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  auto data = img.data();
  std::vector<png_bytep> rows(img.height());
  for (int y = 0; y < img.height(); ++y)
    rows[y] = const_cast<png_bytep>(data.data() + static_cast<std::size_t>(y) * img.width() * 3);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
}

void write_ppm(const RasterImage& img, const std::filesystem::path& path) {
  write_pnm(path, "P6", img.width(), img.height(), img.data());
}

void write_image(const RasterImage& img, const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".png" || ext == ".PNG") return write_png(img, path);
  if (ext == ".ppm" || ext == ".PPM") return write_ppm(img, path);
  throw ImageIoError("unsupported image extension '" + ext + "'");
}

void write_mask_pgm(const TissueMask& mask, const std::filesystem::path& path) {
  std::vector<std::uint8_t> buf(mask.bits().size());
  std::transform(mask.bits().begin(), mask.bits().end(), buf.begin(),
                 [](std::uint8_t b) { return static_cast<std::uint8_t>(b ? 255 : 0); });
  write_pnm(path, "P5", mask.width(), mask.height(), buf);
}

TissueMask read_mask_pgm(const std::filesystem::path& path) {
  int w = 0, h = 0;
  auto buf = read_pnm(path, "P5", w, h, 1);
  TissueMask mask(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) mask.set(x, y, buf[static_cast<std::size_t>(y) * w + x] != 0);
  return mask;
}

}  // namespace patchscope
