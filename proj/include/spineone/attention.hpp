#pragma once

#include "spineone/nn.hpp"

namespace spineone::nn {

// Position attention: 1x1 query/key/value projections (query/key channels
// reduced by `reduction`), an (H*W)x(H*W) spatial affinity row-normalized by
// softmax, value aggregation, and a residual add scaled by a learnable
// scalar initialized to 0 (identity at init).  Training mode materializes the
// affinity matrix; evaluation streams it in row blocks so large grids never
// hold the full matrix.
class PAM {
 public:
  PAM(const std::string& name, int channels, int reduction = 8);

  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& dy);
  void collect_params(std::vector<Param*>& out);

  // Affinity of batch element 0 from the last training-mode forward (N*N,
  // row-major); for tests.
  const std::vector<float>& last_affinity() const { return affinity_dbg_; }

  Param alpha;

 private:
  int channels_, reduced_;
  Conv2d query_, key_, value_;
  Tensor q_, k_, v_, out_, x_;
  std::vector<std::vector<float>> affinity_;  // per batch element, N*N
  std::vector<float> affinity_dbg_;
  bool cached_ = false;
};

// Channel attention: CxC affinity from the feature Gram matrix, softmax per
// row, applied back to the channels, residual add with a learnable scalar
// initialized to 0.  No projections, so it is channel-permutation
// equivariant.
class CAM {
 public:
  CAM(const std::string& name, int channels);

  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& dy);
  void collect_params(std::vector<Param*>& out);

  const std::vector<float>& last_affinity() const { return affinity_dbg_; }

  Param beta;

 private:
  int channels_;
  Tensor x_, out_;
  std::vector<std::vector<float>> affinity_;  // per batch element, C*C
  std::vector<float> affinity_dbg_;
  bool cached_ = false;
};

// One dual-attention branch head: element-wise sum of the PAM and CAM paths,
// so both residual scales at 0 yield exactly twice the input.
class DualAttention {
 public:
  DualAttention(const std::string& name, int channels, int reduction = 8)
      : pam(name + ".pam", channels, reduction), cam(name + ".cam", channels) {}

  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& dy);
  void collect_params(std::vector<Param*>& out) {
    pam.collect_params(out);
    cam.collect_params(out);
  }

  PAM pam;
  CAM cam;
};

// Row softmax over an NxM row-major matrix, numerically stabilized.
void softmax_rows(float* m, int rows, int cols);

}  // namespace spineone::nn
