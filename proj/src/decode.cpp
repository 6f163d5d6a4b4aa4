#include "spineone/decode.hpp"

#include <algorithm>
#include <cmath>

#include <numbers>

namespace spineone::decode {

HoughScoreMap hough_vote(const std::vector<float>& heatmap, const std::vector<float>& offset,
                         int num_classes, int h, int w, int radius_px) {
  require(num_classes > 0 && h > 0 && w > 0, Err::BadArgument, "empty vote grid");
  require(radius_px > 0, Err::BadArgument, "radius must be positive");
  const size_t plane = static_cast<size_t>(h) * w;
  require(heatmap.size() == static_cast<size_t>(num_classes) * plane, Err::ShapeMismatch,
          "heatmap size mismatch in hough_vote");
  require(offset.size() == 2 * static_cast<size_t>(num_classes) * plane, Err::ShapeMismatch,
          "offset size mismatch in hough_vote");

  HoughScoreMap out;
  out.channels = num_classes;
  out.h = h;
  out.w = w;
  out.scores.assign(heatmap.size(), 0.0);

  const double inv_area = 1.0 / (std::numbers::pi * radius_px * radius_px);
  for (int c = 0; c < num_classes; ++c) {
    const float* ph = heatmap.data() + c * plane;
    const float* pr = offset.data() + (2 * c) * plane;
    const float* pc = offset.data() + (2 * c + 1) * plane;
    double* ps = out.scores.data() + c * plane;
    for (int r = 0; r < h; ++r) {
      for (int cc = 0; cc < w; ++cc) {
        const size_t i = static_cast<size_t>(r) * w + cc;
        const double p = ph[i];
        if (p <= 0.0) continue;
        const double vote = p * inv_area;
        const double tr = r + static_cast<double>(pr[i]);
        const double tc = cc + static_cast<double>(pc[i]);
        const int r0 = static_cast<int>(std::floor(tr));
        const int c0 = static_cast<int>(std::floor(tc));
        const double fr = tr - r0;
        const double fc = tc - c0;
        const double wts[4] = {(1 - fr) * (1 - fc), (1 - fr) * fc, fr * (1 - fc), fr * fc};
        const int rows[4] = {r0, r0, r0 + 1, r0 + 1};
        const int cols[4] = {c0, c0 + 1, c0, c0 + 1};
        for (int t = 0; t < 4; ++t) {
          if (rows[t] < 0 || rows[t] >= h || cols[t] < 0 || cols[t] >= w) continue;
          ps[static_cast<size_t>(rows[t]) * w + cols[t]] += vote * wts[t];
        }
      }
    }
  }
  return out;
}

std::vector<DetectedKeypoint> select_top_keypoints(const HoughScoreMap& map, int k,
                                                   double suppression_px) {
  require(k >= 1, Err::BadArgument, "k must be at least 1");
  require(map.channels >= 1 && map.h > 0 && map.w > 0, Err::BadArgument, "empty score map");

  // Channel collapse: best class per pixel, earlier channel (Normal) on ties.
  const size_t plane = static_cast<size_t>(map.h) * map.w;
  std::vector<double> best(plane, 0.0);
  std::vector<uint8_t> label(plane, 0);
  for (int c = 0; c < map.channels; ++c) {
    const double* ps = map.scores.data() + c * plane;
    for (size_t i = 0; i < plane; ++i) {
      if (ps[i] > best[i]) {
        best[i] = ps[i];
        label[i] = static_cast<uint8_t>(c);
      }
    }
  }

  std::vector<uint8_t> suppressed(plane, 0);
  std::vector<DetectedKeypoint> out;
  const double sup2 = suppression_px * suppression_px;
  while (static_cast<int>(out.size()) < k) {
    double peak = 0.0;
    long peak_i = -1;
    for (size_t i = 0; i < plane; ++i) {
      if (!suppressed[i] && best[i] > peak) {
        peak = best[i];
        peak_i = static_cast<long>(i);
      }
    }
    if (peak_i < 0) break;  // no positive-score candidates left
    const int pr = static_cast<int>(peak_i / map.w);
    const int pc = static_cast<int>(peak_i % map.w);

    // 3x3 score-weighted centroid refinement around the peak.
    double wsum = 0, rsum = 0, csum = 0;
    for (int r = std::max(0, pr - 1); r <= std::min(map.h - 1, pr + 1); ++r) {
      for (int c = std::max(0, pc - 1); c <= std::min(map.w - 1, pc + 1); ++c) {
        const double s = best[static_cast<size_t>(r) * map.w + c];
        wsum += s;
        rsum += s * r;
        csum += s * c;
      }
    }
    DetectedKeypoint det;
    det.row = wsum > 0 ? rsum / wsum : pr;
    det.col = wsum > 0 ? csum / wsum : pc;
    det.label = static_cast<data::DegLabel>(label[peak_i]);
    det.score = peak;
    out.push_back(det);

    const int reach = static_cast<int>(std::ceil(suppression_px));
    for (int r = std::max(0, pr - reach); r <= std::min(map.h - 1, pr + reach); ++r) {
      for (int c = std::max(0, pc - reach); c <= std::min(map.w - 1, pc + reach); ++c) {
        const double dr = r - pr, dc = c - pc;
        if (dr * dr + dc * dc <= sup2) suppressed[static_cast<size_t>(r) * map.w + c] = 1;
      }
    }
  }
  return out;
}

}  // namespace spineone::decode
