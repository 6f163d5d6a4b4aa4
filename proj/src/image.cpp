#include "spineone/image.hpp"

#include <algorithm>

namespace spineone {

float bilinear_sample(const float* img, int h, int w, double r, double c) {
  const int r0 = static_cast<int>(std::floor(r));
  const int c0 = static_cast<int>(std::floor(c));
  const double fr = r - r0;
  const double fc = c - c0;
  double acc = 0.0;
  for (int dr = 0; dr < 2; ++dr) {
    const int rr = r0 + dr;
    if (rr < 0 || rr >= h) continue;
    const double wr = dr ? fr : 1.0 - fr;
    if (wr == 0.0) continue;
    for (int dc = 0; dc < 2; ++dc) {
      const int cc = c0 + dc;
      if (cc < 0 || cc >= w) continue;
      const double wc = dc ? fc : 1.0 - fc;
      if (wc == 0.0) continue;
      acc += wr * wc * img[static_cast<size_t>(rr) * w + cc];
    }
  }
  return static_cast<float>(acc);
}

void warp_affine(const Plane& src, Plane& dst, const GeomTransform& t) {
  for (int r = 0; r < dst.h; ++r) {
    const double sr = t.row.invert(r);
    for (int c = 0; c < dst.w; ++c) {
      const double sc = t.col.invert(c);
      dst.at(r, c) = bilinear_sample(src.v.data(), src.h, src.w, sr, sc);
    }
  }
}

void warp_affine(const Stack& src, Stack& dst, const GeomTransform& t) {
  require(src.n == dst.n, Err::ShapeMismatch, "warp_affine: slice count mismatch");
  Plane sp(src.h, src.w), dp(dst.h, dst.w);
  for (int i = 0; i < src.n; ++i) {
    std::copy(src.plane(i), src.plane(i) + static_cast<size_t>(src.h) * src.w, sp.v.begin());
    warp_affine(sp, dp, t);
    std::copy(dp.v.begin(), dp.v.end(), dst.plane(i));
  }
}

void normalize_stack(Stack& s) {
  double sum = 0.0, sq = 0.0;
  const size_t n = s.v.size();
  if (n == 0) return;
  for (float x : s.v) {
    sum += x;
    sq += static_cast<double>(x) * x;
  }
  const double mean = sum / static_cast<double>(n);
  const double var = std::max(0.0, sq / static_cast<double>(n) - mean * mean);
  const double inv = 1.0 / std::max(std::sqrt(var), 1e-6);
  for (float& x : s.v) x = static_cast<float>((x - mean) * inv);
}

}  // namespace spineone
