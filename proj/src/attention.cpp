#include "spineone/attention.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace spineone::nn {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

Param make_scalar(const std::string& name) {
  Param p;
  p.name = name;
  p.shape = {1};
  p.init_size(1);
  return p;
}

// dA -> dE through a row softmax with cached A (both row-major rows x cols).
void softmax_rows_backward(const float* a, const float* da, int rows, int cols, float* de) {
  for (int i = 0; i < rows; ++i) {
    const float* ar = a + static_cast<size_t>(i) * cols;
    const float* dar = da + static_cast<size_t>(i) * cols;
    float* der = de + static_cast<size_t>(i) * cols;
    double dot = 0;
    for (int j = 0; j < cols; ++j) dot += static_cast<double>(ar[j]) * dar[j];
    for (int j = 0; j < cols; ++j)
      der[j] = ar[j] * static_cast<float>(dar[j] - dot);
  }
}

}  // namespace

void softmax_rows(float* m, int rows, int cols) {
  for (int i = 0; i < rows; ++i) {
    float* row = m + static_cast<size_t>(i) * cols;
    float mx = row[0];
    for (int j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
    double sum = 0;
    for (int j = 0; j < cols; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    const float inv = static_cast<float>(1.0 / sum);
    for (int j = 0; j < cols; ++j) row[j] *= inv;
  }
}

PAM::PAM(const std::string& name, int channels, int reduction)
    : alpha(make_scalar(name + ".alpha")),
      channels_(channels),
      reduced_(std::max(1, channels / reduction)),
      query_(name + ".query", channels, std::max(1, channels / reduction), 1, 1, 0),
      key_(name + ".key", channels, std::max(1, channels / reduction), 1, 1, 0),
      value_(name + ".value", channels, channels, 1, 1, 0) {}

Tensor PAM::forward(const Tensor& x, bool train) {
  require(x.c == channels_, Err::ShapeMismatch, "PAM channel mismatch");
  const int N = x.h * x.w;
  Tensor q = query_.forward(x, train);
  Tensor k = key_.forward(x, train);
  Tensor v = value_.forward(x, train);

  Tensor y = x;  // residual term
  Tensor out(x.n, x.c, x.h, x.w);
  const float a = alpha.value[0];

  if (train) {
    affinity_.assign(x.n, {});
    for (int b = 0; b < x.n; ++b) {
      CMapMat qm(q.at(b, 0), reduced_, N);
      CMapMat km(k.at(b, 0), reduced_, N);
      CMapMat vm(v.at(b, 0), channels_, N);
      auto& aff = affinity_[b];
      aff.resize(static_cast<size_t>(N) * N);
      MapMat am(aff.data(), N, N);
      am.noalias() = qm.transpose() * km;
      softmax_rows(aff.data(), N, N);
      MapMat om(out.at(b, 0), channels_, N);
      om.noalias() = vm * am.transpose();
    }
    affinity_dbg_ = affinity_[0];
    q_ = std::move(q);
    k_ = std::move(k);
    v_ = std::move(v);
    x_ = x;
    out_ = out;
    cached_ = true;
  } else {
    // Stream the affinity in row blocks; nothing quadratic is retained.
    const int block = std::max(1, std::min(N, 4096));
    std::vector<float> ebuf(static_cast<size_t>(block) * N);
    for (int b = 0; b < x.n; ++b) {
      CMapMat qm(q.at(b, 0), reduced_, N);
      CMapMat km(k.at(b, 0), reduced_, N);
      CMapMat vm(v.at(b, 0), channels_, N);
      MapMat om(out.at(b, 0), channels_, N);
      for (int i0 = 0; i0 < N; i0 += block) {
        const int rows = std::min(block, N - i0);
        MapMat em(ebuf.data(), rows, N);
        em.noalias() = qm.middleCols(i0, rows).transpose() * km;
        softmax_rows(ebuf.data(), rows, N);
        om.middleCols(i0, rows).noalias() = vm * em.transpose();
      }
    }
    cached_ = false;
  }

  for (size_t i = 0; i < y.size(); ++i) y.v[i] += a * out.v[i];
  return y;
}

Tensor PAM::backward(const Tensor& dy) {
  require(cached_, Err::BadArgument, "PAM backward without training forward");
  require(dy.same_shape(x_), Err::ShapeMismatch, "PAM grad shape mismatch");
  const int N = x_.h * x_.w;
  const float a = alpha.value[0];

  double dalpha = 0;
  for (size_t i = 0; i < dy.size(); ++i) dalpha += static_cast<double>(dy.v[i]) * out_.v[i];
  alpha.grad[0] += static_cast<float>(dalpha);

  Tensor dq(x_.n, reduced_, x_.h, x_.w);
  Tensor dk(x_.n, reduced_, x_.h, x_.w);
  Tensor dv(x_.n, channels_, x_.h, x_.w);
  std::vector<float> da(static_cast<size_t>(N) * N), de(static_cast<size_t>(N) * N);
  std::vector<float> dout(static_cast<size_t>(channels_) * N);

  for (int b = 0; b < x_.n; ++b) {
    CMapMat dym(dy.at(b, 0), channels_, N);
    MapMat dom(dout.data(), channels_, N);
    dom = a * dym;
    CMapMat am(affinity_[b].data(), N, N);
    CMapMat vm(v_.at(b, 0), channels_, N);
    CMapMat qm(q_.at(b, 0), reduced_, N);
    CMapMat km(k_.at(b, 0), reduced_, N);

    MapMat dvm(dv.at(b, 0), channels_, N);
    dvm.noalias() = dom * am;  // out = V * A^T
    MapMat dam(da.data(), N, N);
    dam.noalias() = dom.transpose() * vm;
    softmax_rows_backward(affinity_[b].data(), da.data(), N, N, de.data());
    CMapMat dem(de.data(), N, N);
    MapMat dqm(dq.at(b, 0), reduced_, N);
    dqm.noalias() = km * dem.transpose();  // E = Q^T K
    MapMat dkm(dk.at(b, 0), reduced_, N);
    dkm.noalias() = qm * dem;
  }

  Tensor dx = dy;  // residual path
  for (const Tensor& part :
       {query_.backward(dq), key_.backward(dk), value_.backward(dv)}) {
    for (size_t i = 0; i < dx.size(); ++i) dx.v[i] += part.v[i];
  }
  return dx;
}

void PAM::collect_params(std::vector<Param*>& out) {
  query_.collect_params(out);
  key_.collect_params(out);
  value_.collect_params(out);
  out.push_back(&alpha);
}

CAM::CAM(const std::string& name, int channels)
    : beta(make_scalar(name + ".beta")), channels_(channels) {}

Tensor CAM::forward(const Tensor& x, bool train) {
  require(x.c == channels_, Err::ShapeMismatch, "CAM channel mismatch");
  const int N = x.h * x.w;
  Tensor y = x;
  Tensor out(x.n, x.c, x.h, x.w);
  const float bta = beta.value[0];

  if (train) affinity_.assign(x.n, {});
  std::vector<float> aff_local(static_cast<size_t>(channels_) * channels_);
  for (int b = 0; b < x.n; ++b) {
    CMapMat xm(x.at(b, 0), channels_, N);
    float* aff;
    if (train) {
      affinity_[b].resize(static_cast<size_t>(channels_) * channels_);
      aff = affinity_[b].data();
    } else {
      aff = aff_local.data();
    }
    MapMat am(aff, channels_, channels_);
    am.noalias() = xm * xm.transpose();
    softmax_rows(aff, channels_, channels_);
    MapMat om(out.at(b, 0), channels_, N);
    om.noalias() = am * xm;
  }
  if (train) {
    affinity_dbg_ = affinity_[0];
    x_ = x;
    out_ = out;
    cached_ = true;
  } else {
    cached_ = false;
  }

  for (size_t i = 0; i < y.size(); ++i) y.v[i] += bta * out.v[i];
  return y;
}

Tensor CAM::backward(const Tensor& dy) {
  require(cached_, Err::BadArgument, "CAM backward without training forward");
  require(dy.same_shape(x_), Err::ShapeMismatch, "CAM grad shape mismatch");
  const int N = x_.h * x_.w;
  const float bta = beta.value[0];

  double dbeta = 0;
  for (size_t i = 0; i < dy.size(); ++i) dbeta += static_cast<double>(dy.v[i]) * out_.v[i];
  beta.grad[0] += static_cast<float>(dbeta);

  Tensor dx = dy;
  std::vector<float> da(static_cast<size_t>(channels_) * channels_);
  std::vector<float> de(da.size());
  std::vector<float> dout(static_cast<size_t>(channels_) * N);
  std::vector<float> dxb(dout.size());
  for (int b = 0; b < x_.n; ++b) {
    CMapMat dym(dy.at(b, 0), channels_, N);
    MapMat dom(dout.data(), channels_, N);
    dom = bta * dym;
    CMapMat xm(x_.at(b, 0), channels_, N);
    CMapMat am(affinity_[b].data(), channels_, channels_);

    MapMat dam(da.data(), channels_, channels_);
    dam.noalias() = dom * xm.transpose();  // out = A * X
    softmax_rows_backward(affinity_[b].data(), da.data(), channels_, channels_, de.data());
    CMapMat dem(de.data(), channels_, channels_);
    MapMat dxm(dxb.data(), channels_, N);
    dxm.noalias() = am.transpose() * dom;          // through out = A X
    dxm.noalias() += (dem + dem.transpose()) * xm;  // through E = X X^T
    float* pdx = dx.at(b, 0);
    for (size_t i = 0; i < dxb.size(); ++i) pdx[i] += dxb[i];
  }
  return dx;
}

void CAM::collect_params(std::vector<Param*>& out) { out.push_back(&beta); }

Tensor DualAttention::forward(const Tensor& x, bool train) {
  Tensor yp = pam.forward(x, train);
  Tensor yc = cam.forward(x, train);
  for (size_t i = 0; i < yp.size(); ++i) yp.v[i] += yc.v[i];
  return yp;
}

Tensor DualAttention::backward(const Tensor& dy) {
  Tensor dp = pam.backward(dy);
  Tensor dc = cam.backward(dy);
  for (size_t i = 0; i < dp.size(); ++i) dp.v[i] += dc.v[i];
  return dp;
}

}  // namespace spineone::nn
