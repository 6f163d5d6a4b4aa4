#pragma once

#include <vector>

#include "spineone/targets.hpp"

namespace spineone::objectives {

// Gradient-guided objective association: the clipped, per-channel normalized
// gradient of the heatmap loss becomes a [1,2] multiplier on the predicted
// offsets, switched on late in training.
struct OASpec {
  double clip_bound = 100.0;
  double enable_after_fraction = 0.75;
};

void validate(const OASpec& spec);

// First epoch (0-based) at which OA is applied: ceil(fraction * total).
int oa_start_epoch(int total_epochs, const OASpec& spec);
bool oa_active(int epoch, int total_epochs, const OASpec& spec);

// Focal loss on the probability of the true binary state, summed over the map
// and divided by the number of positive target pixels (floor 1).  If grad is
// given it receives dLoss/dPred (w.r.t. probabilities, same shape as pred).
// All internal arithmetic is double precision.
double focal_loss(const std::vector<float>& pred, const targets::HeatmapTarget& target,
                  double gamma, std::vector<float>* grad = nullptr);

// Mean absolute error over masked positions and both coordinate channels;
// 0 on an empty mask.  When weights (2C*H*W) are given the comparison is
// |w * pred - target| with w treated as a constant, per the OA formulation.
// grad receives dLoss/dPred if requested.
double offset_l1_loss(const std::vector<float>& pred, const targets::OffsetTarget& target,
                      const std::vector<float>* weights = nullptr,
                      std::vector<float>* grad = nullptr);

// Builds the OA weight map from the heatmap-loss gradient (C*H*W): clip to
// +/-clip_bound, min-max normalize each channel to [0,1] (constant channels
// map to 0), add 1, and duplicate channel c into channels (2c, 2c+1).
std::vector<float> oa_weight_map(const std::vector<float>& grad, int channels, int h, int w,
                                 const OASpec& spec);

struct LossBreakdown {
  double disc_heatmap = 0, disc_offset = 0;
  double vert_heatmap = 0, vert_offset = 0;
  double total = 0;
  bool oa_active = false;
};

struct BranchGrads {
  std::vector<float> heatmap;  // dLoss/dHeatmapProb
  std::vector<float> offset;   // dLoss/dOffset
};

// Four-term total with unit coefficients.  At or past the OA start epoch each
// branch's offset loss uses the weight map derived from that branch's own
// heatmap-loss gradient.  Gradients are written per branch when requested.
LossBreakdown total_loss(const std::vector<float>& disc_heat, const std::vector<float>& disc_off,
                         const std::vector<float>& vert_heat, const std::vector<float>& vert_off,
                         const targets::TargetMaps& disc_targets,
                         const targets::TargetMaps& vert_targets, int epoch, int total_epochs,
                         const OASpec& oa, double gamma, BranchGrads* disc_grads = nullptr,
                         BranchGrads* vert_grads = nullptr);

}  // namespace spineone::objectives
