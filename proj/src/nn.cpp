#include "spineone/nn.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include <Eigen/Dense>

namespace spineone::nn {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

void im2col(const float* x, int c, int h, int w, int k, int stride, int pad, int out_h,
            int out_w, float* col) {
  const int hw = out_h * out_w;
  for (int ch = 0; ch < c; ++ch) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        float* dst = col + (static_cast<size_t>(ch) * k * k + ki * k + kj) * hw;
        const float* src = x + static_cast<size_t>(ch) * h * w;
        for (int oh = 0; oh < out_h; ++oh) {
          const int ir = oh * stride - pad + ki;
          if (ir < 0 || ir >= h) {
            std::fill(dst, dst + out_w, 0.0f);
            dst += out_w;
            continue;
          }
          const float* row = src + static_cast<size_t>(ir) * w;
          for (int ow = 0; ow < out_w; ++ow) {
            const int ic = ow * stride - pad + kj;
            *dst++ = (ic >= 0 && ic < w) ? row[ic] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im(const float* col, int c, int h, int w, int k, int stride, int pad, int out_h,
            int out_w, float* x) {
  const int hw = out_h * out_w;
  for (int ch = 0; ch < c; ++ch) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const float* src = col + (static_cast<size_t>(ch) * k * k + ki * k + kj) * hw;
        float* dst = x + static_cast<size_t>(ch) * h * w;
        for (int oh = 0; oh < out_h; ++oh) {
          const int ir = oh * stride - pad + ki;
          if (ir < 0 || ir >= h) {
            src += out_w;
            continue;
          }
          float* row = dst + static_cast<size_t>(ir) * w;
          for (int ow = 0; ow < out_w; ++ow) {
            const int ic = ow * stride - pad + kj;
            if (ic >= 0 && ic < w) row[ic] += src[ow];
          }
          src += out_w;
        }
      }
    }
  }
}

}  // namespace

Conv2d::Conv2d(std::string name, int in_c, int out_c, int kernel, int stride, int pad)
    : in_c_(in_c), out_c_(out_c), kernel_(kernel), stride_(stride), pad_(pad) {
  require(in_c > 0 && out_c > 0 && kernel > 0 && stride > 0 && pad >= 0, Err::BadArgument,
          "bad Conv2d geometry");
  weight.name = name + ".weight";
  weight.shape = {out_c, in_c, kernel, kernel};
  weight.init_size(static_cast<size_t>(out_c) * in_c * kernel * kernel);
  bias.name = name + ".bias";
  bias.shape = {out_c};
  bias.init_size(out_c);
}

Tensor Conv2d::forward(const Tensor& x, bool train) {
  require(x.c == in_c_, Err::ShapeMismatch, weight.name + ": channel mismatch");
  out_h_ = (x.h + 2 * pad_ - kernel_) / stride_ + 1;
  out_w_ = (x.w + 2 * pad_ - kernel_) / stride_ + 1;
  require(out_h_ > 0 && out_w_ > 0, Err::TooSmall, weight.name + ": input too small");

  const int kk = in_c_ * kernel_ * kernel_;
  const size_t hw = static_cast<size_t>(out_h_) * out_w_;
  Tensor y(x.n, out_c_, out_h_, out_w_);
  CMapMat wmat(weight.value.data(), out_c_, kk);

  std::vector<float> scratch;
  if (train) {
    col_.assign(static_cast<size_t>(x.n) * kk * hw, 0.0f);
    x_ = x;
    cached_ = true;
  } else {
    scratch.assign(static_cast<size_t>(kk) * hw, 0.0f);
    cached_ = false;
  }

  for (int b = 0; b < x.n; ++b) {
    float* col = train ? col_.data() + static_cast<size_t>(b) * kk * hw : scratch.data();
    im2col(x.at(b, 0), in_c_, x.h, x.w, kernel_, stride_, pad_, out_h_, out_w_, col);
    MapMat out(y.at(b, 0), out_c_, static_cast<Eigen::Index>(hw));
    out.noalias() = wmat * CMapMat(col, kk, static_cast<Eigen::Index>(hw));
    for (int oc = 0; oc < out_c_; ++oc)
      out.row(oc).array() += bias.value[oc];
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
  require(cached_, Err::BadArgument, weight.name + ": backward without training forward");
  require_shape(dy, x_.n, out_c_, out_h_, out_w_, weight.name.c_str());

  const int kk = in_c_ * kernel_ * kernel_;
  const size_t hw = static_cast<size_t>(out_h_) * out_w_;
  Tensor dx(x_.n, in_c_, x_.h, x_.w);
  MapMat dwmat(weight.grad.data(), out_c_, kk);
  CMapMat wmat(weight.value.data(), out_c_, kk);
  std::vector<float> dcol(static_cast<size_t>(kk) * hw);

  for (int b = 0; b < x_.n; ++b) {
    CMapMat dymat(dy.at(b, 0), out_c_, static_cast<Eigen::Index>(hw));
    CMapMat col(col_.data() + static_cast<size_t>(b) * kk * hw, kk,
                static_cast<Eigen::Index>(hw));
    dwmat.noalias() += dymat * col.transpose();
    for (int oc = 0; oc < out_c_; ++oc) bias.grad[oc] += dymat.row(oc).sum();
    MapMat dcmat(dcol.data(), kk, static_cast<Eigen::Index>(hw));
    dcmat.noalias() = wmat.transpose() * dymat;
    col2im(dcol.data(), in_c_, x_.h, x_.w, kernel_, stride_, pad_, out_h_, out_w_, dx.at(b, 0));
  }
  return dx;
}

void Conv2d::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

BatchNorm2d::BatchNorm2d(std::string name, int channels, double eps, double momentum)
    : channels_(channels), eps_(eps), momentum_(momentum) {
  gamma.name = name + ".gamma";
  gamma.shape = {channels};
  gamma.init_size(channels);
  std::fill(gamma.value.begin(), gamma.value.end(), 1.0f);
  beta.name = name + ".beta";
  beta.shape = {channels};
  beta.init_size(channels);
  running_mean.name = name + ".running_mean";
  running_mean.shape = {channels};
  running_mean.init_size(channels);
  running_mean.trainable = false;
  running_var.name = name + ".running_var";
  running_var.shape = {channels};
  running_var.init_size(channels);
  std::fill(running_var.value.begin(), running_var.value.end(), 1.0f);
  running_var.trainable = false;
}

Tensor BatchNorm2d::forward(const Tensor& x, bool train) {
  require(x.c == channels_, Err::ShapeMismatch, gamma.name + ": channel mismatch");
  Tensor y(x.n, x.c, x.h, x.w);
  const size_t plane = x.plane();
  const double m = static_cast<double>(x.n) * plane;

  if (train) {
    xhat_ = Tensor(x.n, x.c, x.h, x.w);
    inv_std_.assign(channels_, 0.0);
    cached_ = true;
    for (int ch = 0; ch < channels_; ++ch) {
      double sum = 0, sq = 0;
      for (int b = 0; b < x.n; ++b) {
        const float* p = x.at(b, ch);
        for (size_t i = 0; i < plane; ++i) {
          sum += p[i];
          sq += static_cast<double>(p[i]) * p[i];
        }
      }
      const double mean = sum / m;
      const double var = std::max(0.0, sq / m - mean * mean);
      const double inv = 1.0 / std::sqrt(var + eps_);
      inv_std_[ch] = inv;
      running_mean.value[ch] = static_cast<float>((1 - momentum_) * running_mean.value[ch] +
                                                  momentum_ * mean);
      running_var.value[ch] =
          static_cast<float>((1 - momentum_) * running_var.value[ch] + momentum_ * var);
      const float g = gamma.value[ch], bt = beta.value[ch];
      for (int b = 0; b < x.n; ++b) {
        const float* p = x.at(b, ch);
        float* xh = xhat_.at(b, ch);
        float* py = y.at(b, ch);
        for (size_t i = 0; i < plane; ++i) {
          xh[i] = static_cast<float>((p[i] - mean) * inv);
          py[i] = g * xh[i] + bt;
        }
      }
    }
  } else {
    cached_ = false;
    for (int ch = 0; ch < channels_; ++ch) {
      const double inv = 1.0 / std::sqrt(static_cast<double>(running_var.value[ch]) + eps_);
      const double mean = running_mean.value[ch];
      const float g = gamma.value[ch], bt = beta.value[ch];
      for (int b = 0; b < x.n; ++b) {
        const float* p = x.at(b, ch);
        float* py = y.at(b, ch);
        for (size_t i = 0; i < plane; ++i)
          py[i] = static_cast<float>(g * ((p[i] - mean) * inv) + bt);
      }
    }
  }
  return y;
}

Tensor BatchNorm2d::backward(const Tensor& dy) {
  require(cached_, Err::BadArgument, gamma.name + ": backward without training forward");
  require(dy.same_shape(xhat_), Err::ShapeMismatch, gamma.name + ": grad shape mismatch");
  Tensor dx(dy.n, dy.c, dy.h, dy.w);
  const size_t plane = dy.plane();
  const double m = static_cast<double>(dy.n) * plane;

  for (int ch = 0; ch < channels_; ++ch) {
    double sum_dy = 0, sum_dy_xhat = 0;
    for (int b = 0; b < dy.n; ++b) {
      const float* pdy = dy.at(b, ch);
      const float* xh = xhat_.at(b, ch);
      for (size_t i = 0; i < plane; ++i) {
        sum_dy += pdy[i];
        sum_dy_xhat += static_cast<double>(pdy[i]) * xh[i];
      }
    }
    gamma.grad[ch] += static_cast<float>(sum_dy_xhat);
    beta.grad[ch] += static_cast<float>(sum_dy);
    const double g_inv = gamma.value[ch] * inv_std_[ch];
    const double mean_dy = sum_dy / m;
    const double mean_dy_xhat = sum_dy_xhat / m;
    for (int b = 0; b < dy.n; ++b) {
      const float* pdy = dy.at(b, ch);
      const float* xh = xhat_.at(b, ch);
      float* pdx = dx.at(b, ch);
      for (size_t i = 0; i < plane; ++i)
        pdx[i] = static_cast<float>(g_inv * (pdy[i] - mean_dy - xh[i] * mean_dy_xhat));
    }
  }
  return dx;
}

void BatchNorm2d::collect_params(std::vector<Param*>& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
  out.push_back(&running_mean);
  out.push_back(&running_var);
}

Tensor ReLU::forward(const Tensor& x, bool train) {
  Tensor y(x.n, x.c, x.h, x.w);
  if (train) {
    mask_.assign(x.size(), 0);
    cached_ = true;
  } else {
    cached_ = false;
  }
  for (size_t i = 0; i < x.size(); ++i) {
    const bool on = x.v[i] > 0.0f;
    y.v[i] = on ? x.v[i] : 0.0f;
    if (train) mask_[i] = on;
  }
  return y;
}

Tensor ReLU::backward(const Tensor& dy) {
  require(cached_ && mask_.size() == dy.size(), Err::BadArgument,
          "ReLU backward without training forward");
  Tensor dx(dy.n, dy.c, dy.h, dy.w);
  for (size_t i = 0; i < dy.size(); ++i) dx.v[i] = mask_[i] ? dy.v[i] : 0.0f;
  return dx;
}

Tensor Sigmoid::forward(const Tensor& x, bool train) {
  Tensor y(x.n, x.c, x.h, x.w);
  for (size_t i = 0; i < x.size(); ++i)
    y.v[i] = static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(x.v[i]))));
  if (train) {
    y_ = y;
    cached_ = true;
  } else {
    cached_ = false;
  }
  return y;
}

Tensor Sigmoid::backward(const Tensor& dy) {
  require(cached_ && dy.same_shape(y_), Err::BadArgument,
          "Sigmoid backward without training forward");
  Tensor dx(dy.n, dy.c, dy.h, dy.w);
  for (size_t i = 0; i < dy.size(); ++i) dx.v[i] = dy.v[i] * y_.v[i] * (1.0f - y_.v[i]);
  return dx;
}

namespace {

// Half-pixel source coordinates with clamped 2-tap weights along one axis.
struct Taps {
  std::vector<int> i0, i1;
  std::vector<float> f;  // weight of i1
};

Taps make_taps(int in, int out) {
  Taps t;
  t.i0.resize(out);
  t.i1.resize(out);
  t.f.resize(out);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const int i0 = static_cast<int>(std::floor(src));
    t.i0[o] = i0;
    t.i1[o] = std::min(i0 + 1, in - 1);
    t.f[o] = static_cast<float>(src - i0);
  }
  return t;
}

}  // namespace

Tensor BilinearResize::forward(const Tensor& x, int out_h, int out_w, double value_scale,
                               bool train) {
  require(out_h > 0 && out_w > 0, Err::BadArgument, "bad resize target");
  in_h_ = x.h;
  in_w_ = x.w;
  out_h_ = out_h;
  out_w_ = out_w;
  value_scale_ = value_scale;
  cached_ = train;

  const Taps tr = make_taps(x.h, out_h);
  const Taps tc = make_taps(x.w, out_w);
  Tensor y(x.n, x.c, out_h, out_w);
  const float vs = static_cast<float>(value_scale);
  for (int b = 0; b < x.n; ++b) {
    for (int ch = 0; ch < x.c; ++ch) {
      const float* src = x.at(b, ch);
      float* dst = y.at(b, ch);
      for (int r = 0; r < out_h; ++r) {
        const float* r0 = src + static_cast<size_t>(tr.i0[r]) * x.w;
        const float* r1 = src + static_cast<size_t>(tr.i1[r]) * x.w;
        const float fr = tr.f[r];
        for (int c = 0; c < out_w; ++c) {
          const float fc = tc.f[c];
          const float top = r0[tc.i0[c]] * (1 - fc) + r0[tc.i1[c]] * fc;
          const float bot = r1[tc.i0[c]] * (1 - fc) + r1[tc.i1[c]] * fc;
          *dst++ = vs * (top * (1 - fr) + bot * fr);
        }
      }
    }
  }
  return y;
}

Tensor BilinearResize::backward(const Tensor& dy) {
  require(cached_, Err::BadArgument, "BilinearResize backward without training forward");
  require(dy.h == out_h_ && dy.w == out_w_, Err::ShapeMismatch, "resize grad shape mismatch");
  const Taps tr = make_taps(in_h_, out_h_);
  const Taps tc = make_taps(in_w_, out_w_);
  Tensor dx(dy.n, dy.c, in_h_, in_w_);
  const float vs = static_cast<float>(value_scale_);
  for (int b = 0; b < dy.n; ++b) {
    for (int ch = 0; ch < dy.c; ++ch) {
      const float* src = dy.at(b, ch);
      float* dst = dx.at(b, ch);
      for (int r = 0; r < out_h_; ++r) {
        float* r0 = dst + static_cast<size_t>(tr.i0[r]) * in_w_;
        float* r1 = dst + static_cast<size_t>(tr.i1[r]) * in_w_;
        const float fr = tr.f[r];
        for (int c = 0; c < out_w_; ++c) {
          const float g = vs * src[static_cast<size_t>(r) * out_w_ + c];
          const float fc = tc.f[c];
          r0[tc.i0[c]] += g * (1 - fr) * (1 - fc);
          r0[tc.i1[c]] += g * (1 - fr) * fc;
          r1[tc.i0[c]] += g * fr * (1 - fc);
          r1[tc.i1[c]] += g * fr * fc;
        }
      }
    }
  }
  return dx;
}

ResidualBlock::ResidualBlock(const std::string& name, int in_c, int out_c, int stride)
    : projected_(in_c != out_c || stride != 1),
      conv1_(name + ".conv1", in_c, out_c, 3, stride, 1),
      conv2_(name + ".conv2", out_c, out_c, 3, 1, 1),
      bn1_(name + ".bn1", out_c),
      bn2_(name + ".bn2", out_c) {
  if (projected_) {
    proj_conv_.emplace_back(name + ".proj.conv", in_c, out_c, 1, stride, 0);
    proj_bn_.emplace_back(name + ".proj.bn", out_c);
  }
}

Tensor ResidualBlock::forward(const Tensor& x, bool train) {
  Tensor main = bn2_.forward(
      conv2_.forward(relu1_.forward(bn1_.forward(conv1_.forward(x, train), train), train),
                     train),
      train);
  Tensor skip = projected_
                    ? proj_bn_[0].forward(proj_conv_[0].forward(x, train), train)
                    : x;
  require(main.same_shape(skip), Err::ShapeMismatch, "residual shapes diverge");
  for (size_t i = 0; i < main.size(); ++i) main.v[i] += skip.v[i];
  return relu2_.forward(main, train);
}

Tensor ResidualBlock::backward(const Tensor& dy) {
  Tensor d_sum = relu2_.backward(dy);
  Tensor dx = conv1_.backward(bn1_.backward(relu1_.backward(conv2_.backward(
      bn2_.backward(d_sum)))));
  if (projected_) {
    Tensor d_skip = proj_conv_[0].backward(proj_bn_[0].backward(d_sum));
    for (size_t i = 0; i < dx.size(); ++i) dx.v[i] += d_skip.v[i];
  } else {
    for (size_t i = 0; i < dx.size(); ++i) dx.v[i] += d_sum.v[i];
  }
  return dx;
}

void ResidualBlock::collect_params(std::vector<Param*>& out) {
  conv1_.collect_params(out);
  bn1_.collect_params(out);
  conv2_.collect_params(out);
  bn2_.collect_params(out);
  if (projected_) {
    proj_conv_[0].collect_params(out);
    proj_bn_[0].collect_params(out);
  }
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require(a.n == b.n && a.h == b.h && a.w == b.w, Err::ShapeMismatch,
          "concat spatial mismatch");
  Tensor y(a.n, a.c + b.c, a.h, a.w);
  for (int n = 0; n < a.n; ++n) {
    std::copy(a.at(n, 0), a.at(n, 0) + static_cast<size_t>(a.c) * a.plane(), y.at(n, 0));
    std::copy(b.at(n, 0), b.at(n, 0) + static_cast<size_t>(b.c) * b.plane(), y.at(n, a.c));
  }
  return y;
}

std::pair<Tensor, Tensor> split_channels(const Tensor& dy, int c_first) {
  require(c_first > 0 && c_first < dy.c, Err::BadArgument, "bad split point");
  Tensor a(dy.n, c_first, dy.h, dy.w);
  Tensor b(dy.n, dy.c - c_first, dy.h, dy.w);
  for (int n = 0; n < dy.n; ++n) {
    std::copy(dy.at(n, 0), dy.at(n, 0) + static_cast<size_t>(c_first) * dy.plane(), a.at(n, 0));
    std::copy(dy.at(n, c_first), dy.at(n, c_first) + static_cast<size_t>(b.c) * dy.plane(),
              b.at(n, 0));
  }
  return {std::move(a), std::move(b)};
}

}  // namespace spineone::nn
