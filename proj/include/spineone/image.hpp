#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "spineone/common.hpp"

namespace spineone {

// Single-channel float image, row-major.
struct Plane {
  int h = 0, w = 0;
  std::vector<float> v;

  Plane() = default;
  Plane(int h_, int w_) : h(h_), w(w_), v(static_cast<size_t>(h_) * w_, 0.0f) {}

  float& at(int r, int c) { return v[static_cast<size_t>(r) * w + c]; }
  float at(int r, int c) const { return v[static_cast<size_t>(r) * w + c]; }
  const float* row(int r) const { return v.data() + static_cast<size_t>(r) * w; }
};

// A stack of n same-sized planes (slices or channels).
struct Stack {
  int n = 0, h = 0, w = 0;
  std::vector<float> v;

  Stack() = default;
  Stack(int n_, int h_, int w_)
      : n(n_), h(h_), w(w_), v(static_cast<size_t>(n_) * h_ * w_, 0.0f) {}

  float* plane(int i) { return v.data() + static_cast<size_t>(i) * h * w; }
  const float* plane(int i) const { return v.data() + static_cast<size_t>(i) * h * w; }
  float& at(int i, int r, int c) { return plane(i)[static_cast<size_t>(r) * w + c]; }
  float at(int i, int r, int c) const { return plane(i)[static_cast<size_t>(r) * w + c]; }
};

// Per-axis affine map y = scale * x + offset. Coordinates are pixel-center
// based: (0, 0) is the center of the top-left pixel.
struct AxisMap {
  double scale = 1.0;
  double offset = 0.0;

  double apply(double x) const { return scale * x + offset; }
  double invert(double y) const { return (y - offset) / scale; }
};

// Separable 2D affine transform (row and column maps). Negative column scale
// encodes a horizontal flip.
struct GeomTransform {
  AxisMap row;
  AxisMap col;

  void map(double r, double c, double& ro, double& co) const {
    ro = row.apply(r);
    co = col.apply(c);
  }
  void unmap(double r, double c, double& ro, double& co) const {
    ro = row.invert(r);
    co = col.invert(c);
  }
  bool identity() const {
    return row.scale == 1.0 && row.offset == 0.0 && col.scale == 1.0 && col.offset == 0.0;
  }
  // Composition: (b ∘ a)(x) = b(a(x)).
  static GeomTransform compose(const GeomTransform& a, const GeomTransform& b) {
    GeomTransform t;
    t.row.scale = b.row.scale * a.row.scale;
    t.row.offset = b.row.scale * a.row.offset + b.row.offset;
    t.col.scale = b.col.scale * a.col.scale;
    t.col.offset = b.col.scale * a.col.offset + b.col.offset;
    return t;
  }
};

// Bilinear sample with zero outside the image. Exact at integer coordinates.
float bilinear_sample(const float* img, int h, int w, double r, double c);

// dst(r', c') = src(t^{ -1 }(r', c')), bilinear, zero-filled.
void warp_affine(const Plane& src, Plane& dst, const GeomTransform& t);
void warp_affine(const Stack& src, Stack& dst, const GeomTransform& t);

// Stack-wide zero-mean unit-variance normalization (population std, floor 1e-6).
void normalize_stack(Stack& s);

}  // namespace spineone
