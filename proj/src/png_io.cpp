#include "spineone/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

#include "spineone/common.hpp"

namespace spineone {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace

Gray16Image read_png_gray16(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  require(fp != nullptr, Err::IoError, "cannot open " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  require(png != nullptr, Err::IoError, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail(Err::IoError, "png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(Err::CorruptSlice, "corrupt PNG: " + path);
  }

  png_init_io(png, fp.get());
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);

  // Normalize everything to 16-bit grayscale.
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
      color == PNG_COLOR_TYPE_PALETTE)
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (depth < 16) png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);
  const int out_depth = png_get_bit_depth(png, info);

  Gray16Image img;
  img.h = static_cast<int>(h);
  img.w = static_cast<int>(w);
  img.v.resize(static_cast<size_t>(h) * w);

  if (out_depth == 16) {
    // PNG stores 16-bit samples big-endian.
    std::vector<uint8_t> rowbuf(static_cast<size_t>(w) * 2);
    for (png_uint_32 r = 0; r < h; ++r) {
      png_read_row(png, rowbuf.data(), nullptr);
      uint16_t* out = &img.v[static_cast<size_t>(r) * w];
      for (png_uint_32 c = 0; c < w; ++c)
        out[c] = static_cast<uint16_t>((rowbuf[2 * c] << 8) | rowbuf[2 * c + 1]);
    }
  } else {
    std::vector<uint8_t> rowbuf(w);
    for (png_uint_32 r = 0; r < h; ++r) {
      png_read_row(png, rowbuf.data(), nullptr);
      uint16_t* out = &img.v[static_cast<size_t>(r) * w];
      for (png_uint_32 c = 0; c < w; ++c)
        out[c] = static_cast<uint16_t>(rowbuf[c] * 257);  // 8 -> 16 bit
    }
  }

  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_png_gray16(const std::string& path, const Gray16Image& img) {
  require(img.h > 0 && img.w > 0, Err::BadArgument, "empty image");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  require(fp != nullptr, Err::IoError, "cannot write " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  require(png != nullptr, Err::IoError, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail(Err::IoError, "png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(Err::IoError, "png write failed: " + path);
  }

  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.w, img.h, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<uint8_t> rowbuf(static_cast<size_t>(img.w) * 2);
  for (int r = 0; r < img.h; ++r) {
    const uint16_t* in = &img.v[static_cast<size_t>(r) * img.w];
    for (int c = 0; c < img.w; ++c) {
      rowbuf[2 * c] = static_cast<uint8_t>(in[c] >> 8);
      rowbuf[2 * c + 1] = static_cast<uint8_t>(in[c] & 0xFF);
    }
    png_write_row(png, rowbuf.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_png_rgb8(const std::string& path, const Rgb8Image& img) {
  require(img.h > 0 && img.w > 0, Err::BadArgument, "empty image");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  require(fp != nullptr, Err::IoError, "cannot write " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  require(png != nullptr, Err::IoError, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail(Err::IoError, "png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(Err::IoError, "png write failed: " + path);
  }

  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.w, img.h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < img.h; ++r)
    png_write_row(png, const_cast<png_bytep>(&img.v[static_cast<size_t>(r) * img.w * 3]));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace spineone
