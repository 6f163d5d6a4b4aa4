#pragma once

#include <memory>
#include <utility>

#include "spineone/attention.hpp"

namespace spineone::nn {

// Architecture description.  The reference profile follows the published
// recipe (64-channel features on a 128x128 attention grid); the tiny profile
// shrinks every width for desk-scale training.  feature_channels must equal
// stage_channels[0]: the decoder ends at that width.
struct BackboneSpec {
  std::string name = "reference_unet";
  int in_channels = 7;
  int stem_channels = 32;
  std::vector<int> stage_channels = {64, 128, 256};
  int feature_channels = 64;
  int att_size = 128;
  int head_mid = 32;
  int min_input = 128;
  int pam_reduction = 8;
  bool attention = true;  // false: heads consume the backbone feature directly
};

BackboneSpec reference_backbone_spec(int in_channels = 7);
BackboneSpec tiny_backbone_spec(int in_channels = 7);
void validate(const BackboneSpec& spec);

// Residual encoder (stem stride 2, one stride-2 residual block per stage)
// with a skip-concatenating decoder back to quarter resolution, then an
// adaptive bilinear resize onto the fixed attention grid.
class Backbone {
 public:
  explicit Backbone(const BackboneSpec& spec);

  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& dy);
  void collect_params(std::vector<Param*>& out);

 private:
  BackboneSpec spec_;
  ConvBnRelu stem_;
  std::vector<ResidualBlock> stages_;
  std::vector<BilinearResize> merge_up_;   // one per decoder merge, forward order
  std::vector<ConvBnRelu> merge_conv_;
  BilinearResize final_resize_;
  std::vector<int> skip_h_, skip_w_, merge_in_c_;
};

// Conv(in->mid 3x3)+BN+ReLU, Conv(mid->mid 3x3)+BN+ReLU, 1x1 to out_c; the
// heatmap variant applies sigmoid before the bilinear upsample to the input
// grid, the offset variant scales values into input-grid pixel units.
class HeadStack {
 public:
  HeadStack(const std::string& name, int in_c, int mid, int out_c, bool sigmoid_out);

  Tensor forward(const Tensor& x, int out_h, int out_w, double value_scale, bool train);
  Tensor backward(const Tensor& dy);
  void collect_params(std::vector<Param*>& out);

  Conv2d& final_conv() { return final_; }

 private:
  bool sigmoid_out_;
  ConvBnRelu cbr1_, cbr2_;
  Conv2d final_;
  Sigmoid sigmoid_;
  BilinearResize up_;
};

struct ModelOutputs {
  Tensor disc_heatmap;  // N x 2 x H_in x W_in, sigmoid probabilities
  Tensor disc_offset;   // N x 4 x H_in x W_in, input-grid pixel units
  Tensor vert_heatmap;
  Tensor vert_offset;
};

// Gradients w.r.t. the four output maps (heatmaps differentiated in
// probability space; the model converts through its sigmoid).
struct OutputGrads {
  Tensor disc_heatmap, disc_offset, vert_heatmap, vert_offset;
};

class SpineOneModel {
 public:
  SpineOneModel(const BackboneSpec& spec, uint64_t init_seed);

  const BackboneSpec& spec() const { return spec_; }
  ModelOutputs forward(const Tensor& input, bool train);
  void backward(const OutputGrads& grads);
  void zero_grad();

  std::vector<Param*> params();            // includes buffers
  std::vector<Param*> trainable_params();
  size_t param_count(const std::string& name_prefix) const;  // trainable values

  DualAttention& disc_attention() { return disc_att_; }
  DualAttention& vert_attention() { return vert_att_; }

 private:
  BackboneSpec spec_;
  Backbone backbone_;
  DualAttention disc_att_, vert_att_;
  HeadStack disc_heat_, disc_off_, vert_heat_, vert_off_;
};

struct CheckpointMeta {
  int format_version = 1;
  int epoch = 0;
  std::string config_hash;
  std::string metrics_json;  // optional free-form snapshot
};

// Binary parameter archive at `path` plus a sidecar `<path>.json` holding
// format version, backbone spec, epoch, and config hash.
void save_checkpoint(SpineOneModel& model, const std::string& path, const CheckpointMeta& meta);
std::pair<std::unique_ptr<SpineOneModel>, CheckpointMeta> load_checkpoint(
    const std::string& path);

}  // namespace spineone::nn
