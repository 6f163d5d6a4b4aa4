#pragma once

#include <cstdint>
#include <vector>

#include "spineone/tensor.hpp"

namespace spineone::nn {

// Layers follow one protocol: forward(x, train) caches whatever backward
// needs (training mode only), backward(dy) returns dx and accumulates into
// parameter grads.  collect_params appends the layer's named parameters.

class Conv2d {
 public:
  Conv2d(std::string name, int in_c, int out_c, int kernel, int stride, int pad);

  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& dy);
  void collect_params(std::vector<Param*>& out);

  Param weight;  // [out_c, in_c*k*k]
  Param bias;    // [out_c]
  int in_c() const { return in_c_; }
  int out_c() const { return out_c_; }

 private:
  int in_c_, out_c_, kernel_, stride_, pad_;
  Tensor x_;                        // cached input (train mode)
  std::vector<float> col_;          // cached im2col buffer (train mode)
  int out_h_ = 0, out_w_ = 0;
  bool cached_ = false;
};

class BatchNorm2d {
 public:
  BatchNorm2d(std::string name, int channels, double eps = 1e-5, double momentum = 0.1);

  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& dy);
  void collect_params(std::vector<Param*>& out);

  Param gamma, beta;
  Param running_mean, running_var;  // buffers, not trained

 private:
  int channels_;
  double eps_, momentum_;
  Tensor xhat_;                     // cached normalized input (train mode)
  std::vector<double> inv_std_;     // cached per-channel 1/sqrt(var+eps)
  bool cached_ = false;
};

class ReLU {
 public:
  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& dy);

 private:
  std::vector<uint8_t> mask_;
  bool cached_ = false;
};

class Sigmoid {
 public:
  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& dy);

 private:
  Tensor y_;
  bool cached_ = false;
};

// Bilinear resize to an arbitrary spatial size (half-pixel convention, edges
// clamped), optionally scaling the interpolated values; used both for the
// adaptive feature resize and for upsampling head outputs to the input grid,
// where offset values are rescaled into input-grid pixel units.
class BilinearResize {
 public:
  Tensor forward(const Tensor& x, int out_h, int out_w, double value_scale, bool train);
  Tensor backward(const Tensor& dy);

 private:
  int in_h_ = 0, in_w_ = 0, out_h_ = 0, out_w_ = 0;
  double value_scale_ = 1.0;
  bool cached_ = false;
};

// Conv + BatchNorm + ReLU, the standard block of every stack here.
class ConvBnRelu {
 public:
  ConvBnRelu(const std::string& name, int in_c, int out_c, int kernel, int stride, int pad)
      : conv(name + ".conv", in_c, out_c, kernel, stride, pad), bn(name + ".bn", out_c) {}

  Tensor forward(const Tensor& x, bool train) {
    return relu.forward(bn.forward(conv.forward(x, train), train), train);
  }
  Tensor backward(const Tensor& dy) { return conv.backward(bn.backward(relu.backward(dy))); }
  void collect_params(std::vector<Param*>& out) {
    conv.collect_params(out);
    bn.collect_params(out);
  }

  Conv2d conv;
  BatchNorm2d bn;
  ReLU relu;
};

// Two 3x3 Conv+BN with a ReLU between, plus a projection shortcut when shape
// changes, ReLU after the sum.
class ResidualBlock {
 public:
  ResidualBlock(const std::string& name, int in_c, int out_c, int stride);

  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& dy);
  void collect_params(std::vector<Param*>& out);

 private:
  bool projected_;
  Conv2d conv1_, conv2_;
  BatchNorm2d bn1_, bn2_;
  ReLU relu1_, relu2_;
  std::vector<Conv2d> proj_conv_;   // present when projected_
  std::vector<BatchNorm2d> proj_bn_;
};

// Channel concatenation of two tensors with matching spatial size.
Tensor concat_channels(const Tensor& a, const Tensor& b);
// Splits dy of concat_channels back into the two operand gradients.
std::pair<Tensor, Tensor> split_channels(const Tensor& dy, int c_first);

}  // namespace spineone::nn
