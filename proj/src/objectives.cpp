#include "spineone/objectives.hpp"

#include <algorithm>
#include <cmath>

namespace spineone::objectives {

namespace {
constexpr double kProbFloor = 1e-12;  // guards log() against saturated probabilities
}

void validate(const OASpec& spec) {
  require(spec.clip_bound > 0, Err::BadArgument, "OA clip_bound must be positive");
  require(spec.enable_after_fraction > 0 && spec.enable_after_fraction < 1, Err::BadArgument,
          "OA enable_after_fraction must lie in (0, 1)");
}

int oa_start_epoch(int total_epochs, const OASpec& spec) {
  validate(spec);
  require(total_epochs >= 1, Err::BadArgument, "total_epochs must be positive");
  return static_cast<int>(std::ceil(spec.enable_after_fraction * total_epochs));
}

bool oa_active(int epoch, int total_epochs, const OASpec& spec) {
  return epoch >= oa_start_epoch(total_epochs, spec);
}

double focal_loss(const std::vector<float>& pred, const targets::HeatmapTarget& target,
                  double gamma, std::vector<float>* grad) {
  require(pred.size() == target.values.size(), Err::ShapeMismatch,
          "focal_loss: pred/target size mismatch");
  require(gamma >= 0, Err::BadArgument, "gamma must be non-negative");
  if (grad) grad->assign(pred.size(), 0.0f);

  long positives = 0;
  for (float t : target.values) positives += t > 0.5f;
  const double norm = 1.0 / std::max<long>(positives, 1);

  double sum = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const bool pos = target.values[i] > 0.5f;
    const double p = std::clamp(static_cast<double>(pred[i]), kProbFloor, 1.0 - kProbFloor);
    const double q = pos ? p : 1.0 - p;  // probability of the true state
    const double one_m = 1.0 - q;
    const double pw = gamma == 0.0 ? 1.0 : std::pow(one_m, gamma);
    sum += -pw * std::log(q);
    if (grad) {
      // d/dq [-(1-q)^g ln q] = g (1-q)^(g-1) ln q - (1-q)^g / q
      const double d_dq =
          (gamma == 0.0 ? 0.0 : gamma * std::pow(one_m, gamma - 1.0) * std::log(q)) - pw / q;
      (*grad)[i] = static_cast<float>(norm * (pos ? d_dq : -d_dq));
    }
  }
  return sum * norm;
}

double offset_l1_loss(const std::vector<float>& pred, const targets::OffsetTarget& target,
                      const std::vector<float>* weights, std::vector<float>* grad) {
  require(pred.size() == target.values.size(), Err::ShapeMismatch,
          "offset_l1_loss: pred/target size mismatch");
  if (weights)
    require(weights->size() == pred.size(), Err::ShapeMismatch,
            "offset_l1_loss: weight size mismatch");
  if (grad) grad->assign(pred.size(), 0.0f);

  const size_t plane = static_cast<size_t>(target.h) * target.w;
  long masked = 0;
  for (float m : target.mask) masked += m > 0.5f;
  if (masked == 0) return 0.0;
  const double norm = 1.0 / (2.0 * static_cast<double>(masked));

  double sum = 0.0;
  const int num_classes = target.channels / 2;
  for (int cls = 0; cls < num_classes; ++cls) {
    const float* m = target.mask.data() + cls * plane;
    for (int axis = 0; axis < 2; ++axis) {
      const size_t ch = (2 * cls + axis) * plane;
      for (size_t i = 0; i < plane; ++i) {
        if (m[i] <= 0.5f) continue;
        const double w = weights ? (*weights)[ch + i] : 1.0;
        const double diff = w * pred[ch + i] - target.values[ch + i];
        sum += std::abs(diff);
        if (grad) {
          const double s = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
          (*grad)[ch + i] = static_cast<float>(norm * w * s);
        }
      }
    }
  }
  return sum * norm;
}

std::vector<float> oa_weight_map(const std::vector<float>& grad, int channels, int h, int w,
                                 const OASpec& spec) {
  validate(spec);
  const size_t plane = static_cast<size_t>(h) * w;
  require(grad.size() == static_cast<size_t>(channels) * plane, Err::ShapeMismatch,
          "oa_weight_map: gradient size mismatch");

  std::vector<float> weights(2 * grad.size(), 1.0f);
  for (int c = 0; c < channels; ++c) {
    const float* g = grad.data() + c * plane;
    double lo = spec.clip_bound, hi = -spec.clip_bound;
    for (size_t i = 0; i < plane; ++i) {
      const double v = std::clamp(static_cast<double>(g[i]), -spec.clip_bound, spec.clip_bound);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    float* w0 = weights.data() + (2 * c) * plane;
    float* w1 = weights.data() + (2 * c + 1) * plane;
    if (hi > lo) {
      const double inv = 1.0 / (hi - lo);
      for (size_t i = 0; i < plane; ++i) {
        const double v =
            std::clamp(static_cast<double>(g[i]), -spec.clip_bound, spec.clip_bound);
        const float wv = static_cast<float>(1.0 + (v - lo) * inv);
        w0[i] = wv;
        w1[i] = wv;
      }
    }
    // constant channel: already 1 everywhere
  }
  return weights;
}

LossBreakdown total_loss(const std::vector<float>& disc_heat, const std::vector<float>& disc_off,
                         const std::vector<float>& vert_heat, const std::vector<float>& vert_off,
                         const targets::TargetMaps& disc_targets,
                         const targets::TargetMaps& vert_targets, int epoch, int total_epochs,
                         const OASpec& oa, double gamma, BranchGrads* disc_grads,
                         BranchGrads* vert_grads) {
  LossBreakdown out;
  out.oa_active = oa_active(epoch, total_epochs, oa);

  for (int branch = 0; branch < 2; ++branch) {
    const bool disc = branch == 0;
    const auto& heat = disc ? disc_heat : vert_heat;
    const auto& off = disc ? disc_off : vert_off;
    const auto& tgt = disc ? disc_targets : vert_targets;
    BranchGrads* grads = disc ? disc_grads : vert_grads;

    std::vector<float> heat_grad;
    std::vector<float>* heat_grad_ptr = grads ? &grads->heatmap : &heat_grad;
    const double hl = focal_loss(heat, tgt.heatmap, gamma,
                                 (grads || out.oa_active) ? heat_grad_ptr : nullptr);

    double ol;
    if (out.oa_active) {
      const auto w = oa_weight_map(*heat_grad_ptr, tgt.heatmap.channels, tgt.heatmap.h,
                                   tgt.heatmap.w, oa);
      ol = offset_l1_loss(off, tgt.offset, &w, grads ? &grads->offset : nullptr);
    } else {
      ol = offset_l1_loss(off, tgt.offset, nullptr, grads ? &grads->offset : nullptr);
    }

    (disc ? out.disc_heatmap : out.vert_heatmap) = hl;
    (disc ? out.disc_offset : out.vert_offset) = ol;
  }
  out.total = out.disc_heatmap + out.disc_offset + out.vert_heatmap + out.vert_offset;
  return out;
}

}  // namespace spineone::objectives
