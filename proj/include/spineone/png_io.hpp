#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace spineone {

// 16-bit grayscale PNG, bit-exact round trip (no gamma or palette handling).
struct Gray16Image {
  int h = 0, w = 0;
  std::vector<uint16_t> v;
};

Gray16Image read_png_gray16(const std::string& path);
void write_png_gray16(const std::string& path, const Gray16Image& img);

// 8-bit RGB, interleaved, used for overlays and figures.
struct Rgb8Image {
  int h = 0, w = 0;
  std::vector<uint8_t> v;  // 3 * h * w

  Rgb8Image() = default;
  Rgb8Image(int h_, int w_) : h(h_), w(w_), v(static_cast<size_t>(h_) * w_ * 3, 255) {}
  void set(int r, int c, uint8_t red, uint8_t green, uint8_t blue) {
    if (r < 0 || r >= h || c < 0 || c >= w) return;
    uint8_t* p = &v[(static_cast<size_t>(r) * w + c) * 3];
    p[0] = red;
    p[1] = green;
    p[2] = blue;
  }
};

void write_png_rgb8(const std::string& path, const Rgb8Image& img);

}  // namespace spineone
