#pragma once

#include <string>
#include <vector>

#include "spineone/common.hpp"

namespace spineone::nn {

// Dense NCHW float tensor; the only array type the network layers exchange.
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<float> v;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_), v(static_cast<size_t>(n_) * c_ * h_ * w_, 0.0f) {}

  size_t size() const { return v.size(); }
  size_t plane() const { return static_cast<size_t>(h) * w; }
  float* data() { return v.data(); }
  const float* data() const { return v.data(); }

  // Pointer to channel `ch` of batch element `b`.
  float* at(int b, int ch) { return v.data() + (static_cast<size_t>(b) * c + ch) * plane(); }
  const float* at(int b, int ch) const {
    return v.data() + (static_cast<size_t>(b) * c + ch) * plane();
  }

  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
  std::string shape_str() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
           std::to_string(w);
  }
};

inline void require_shape(const Tensor& t, int n, int c, int h, int w, const char* who) {
  require(t.n == n && t.c == c && t.h == h && t.w == w, Err::ShapeMismatch,
          std::string(who) + ": expected " + Tensor(n, c, 0, 0).shape_str() + " spatial " +
              std::to_string(h) + "x" + std::to_string(w) + ", got " + t.shape_str());
}

// A named learnable array (or a non-trainable buffer such as BatchNorm
// running statistics).  The trainer updates `value` from `grad` for
// trainable entries; checkpoints serialize both kinds by name.
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<float> value;
  std::vector<float> grad;
  bool trainable = true;

  void init_size(size_t count) {
    value.assign(count, 0.0f);
    grad.assign(count, 0.0f);
  }
};

}  // namespace spineone::nn
