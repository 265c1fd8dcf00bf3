#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "fetalnet/core/error.hpp"
#include "fetalnet/core/grid.hpp"

namespace fetalnet::data {

/// 8-bit RGB raster for overlays, row-major, 3 bytes per pixel.
struct RgbImage {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(int r, int c) : rows(r), cols(c), pixels(static_cast<std::size_t>(r) * c * 3, 0) {}

  void set(int r, int c, std::uint8_t red, std::uint8_t green, std::uint8_t blue) {
    if (r < 0 || r >= rows || c < 0 || c >= cols) return;
    auto* p = &pixels[(static_cast<std::size_t>(r) * cols + c) * 3];
    p[0] = red;
    p[1] = green;
    p[2] = blue;
  }
};

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw DataError(std::string("cannot open ") + path.string());
  return f;
}

inline void write_png(const std::filesystem::path& path, int rows, int cols, int color_type,
                      int bit_depth, const std::vector<std::vector<png_byte>>& lines) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw DataError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("failed writing " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(cols), static_cast<png_uint_32>(rows),
               bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (const auto& line : lines) png_write_row(png, line.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace detail

/// Reads a PNG as grayscale intensities in [0,1]. 8- and 16-bit gray files
/// are read exactly; colour files are converted to luma.
inline Image read_gray(const std::filesystem::path& path) {
  auto f = detail::open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw DataError(path.string() + " is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("libpng initialisation failed");
  }
  // Objects with destructors must not live across setjmp, so rows are plain.
  png_bytep* rows = nullptr;
  png_bytep buffer = nullptr;
  if (setjmp(png_jmpbuf(png))) {
    std::free(rows);
    std::free(buffer);
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("failed reading " + path.string());
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
      color == PNG_COLOR_TYPE_PALETTE)
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  png_read_update_info(png, info);
  const auto width = png_get_image_width(png, info);
  const auto height = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  const auto rowbytes = png_get_rowbytes(png, info);
  buffer = static_cast<png_bytep>(std::malloc(rowbytes * height));
  rows = static_cast<png_bytep*>(std::malloc(sizeof(png_bytep) * height));
  for (png_uint_32 r = 0; r < height; ++r) rows[r] = buffer + r * rowbytes;
  png_read_image(png, rows);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image img(static_cast<int>(height), static_cast<int>(width));
  for (png_uint_32 r = 0; r < height; ++r)
    for (png_uint_32 c = 0; c < width; ++c) {
      double v;
      if (depth == 16) {
        const png_bytep p = rows[r] + 2 * c;
        v = ((p[0] << 8) | p[1]) / 65535.0;
      } else {
        v = rows[r][c] / 255.0;
      }
      img(static_cast<int>(r), static_cast<int>(c)) = v;
    }
  std::free(rows);
  std::free(buffer);
  return img;
}

/// Reads a mask file; any value above half range is foreground.
inline Mask read_mask(const std::filesystem::path& path) {
  const Image g = read_gray(path);
  Mask m(g.rows(), g.cols());
  for (int r = 0; r < g.rows(); ++r)
    for (int c = 0; c < g.cols(); ++c) m(r, c) = g(r, c) > 0.5 ? 1 : 0;
  return m;
}

/// Writes [0,1] intensities as 8- or 16-bit grayscale, clamping and rounding.
inline void write_gray(const std::filesystem::path& path, const Image& img, int bit_depth = 16) {
  if (bit_depth != 8 && bit_depth != 16) throw InvalidInput("bit depth must be 8 or 16");
  const double scale = bit_depth == 16 ? 65535.0 : 255.0;
  std::vector<std::vector<png_byte>> lines(static_cast<std::size_t>(img.rows()));
  for (int r = 0; r < img.rows(); ++r) {
    auto& line = lines[static_cast<std::size_t>(r)];
    line.resize(static_cast<std::size_t>(img.cols()) * (bit_depth / 8));
    for (int c = 0; c < img.cols(); ++c) {
      const auto q = static_cast<unsigned>(std::lround(std::clamp(img(r, c), 0.0, 1.0) * scale));
      if (bit_depth == 16) {
        line[2 * static_cast<std::size_t>(c)] = static_cast<png_byte>(q >> 8);
        line[2 * static_cast<std::size_t>(c) + 1] = static_cast<png_byte>(q & 0xff);
      } else {
        line[static_cast<std::size_t>(c)] = static_cast<png_byte>(q);
      }
    }
  }
  detail::write_png(path, img.rows(), img.cols(), PNG_COLOR_TYPE_GRAY, bit_depth, lines);
}

/// Writes a binary mask as 8-bit {0,255}.
inline void write_mask(const std::filesystem::path& path, const Mask& m) {
  std::vector<std::vector<png_byte>> lines(static_cast<std::size_t>(m.rows()));
  for (int r = 0; r < m.rows(); ++r) {
    auto& line = lines[static_cast<std::size_t>(r)];
    line.resize(static_cast<std::size_t>(m.cols()));
    for (int c = 0; c < m.cols(); ++c) line[static_cast<std::size_t>(c)] = m(r, c) ? 255 : 0;
  }
  detail::write_png(path, m.rows(), m.cols(), PNG_COLOR_TYPE_GRAY, 8, lines);
}

inline void write_rgb(const std::filesystem::path& path, const RgbImage& img) {
  std::vector<std::vector<png_byte>> lines(static_cast<std::size_t>(img.rows));
  const std::size_t stride = static_cast<std::size_t>(img.cols) * 3;
  for (int r = 0; r < img.rows; ++r) {
    const auto* src = img.pixels.data() + static_cast<std::size_t>(r) * stride;
    lines[static_cast<std::size_t>(r)].assign(src, src + stride);
  }
  detail::write_png(path, img.rows, img.cols, PNG_COLOR_TYPE_RGB, 8, lines);
}

/// Grayscale image as an RGB canvas.
inline RgbImage to_rgb(const Image& img) {
  RgbImage out(img.rows(), img.cols());
  for (int r = 0; r < img.rows(); ++r)
    for (int c = 0; c < img.cols(); ++c) {
      const auto v = static_cast<std::uint8_t>(std::lround(std::clamp(img(r, c), 0.0, 1.0) * 255));
      out.set(r, c, v, v, v);
    }
  return out;
}

}  // namespace fetalnet::data
