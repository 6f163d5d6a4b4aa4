#pragma once

#include <vector>

#include "spineone/data.hpp"

namespace spineone::decode {

enum class Branch { Disc, Vertebra };

inline const char* branch_name(Branch b) { return b == Branch::Disc ? "disc" : "vertebra"; }

// Per-class Hough vote accumulator.  Scores are kept in double precision so
// the optimized decoder agrees with a literal evaluation of the voting sum.
struct HoughScoreMap {
  int channels = 0, h = 0, w = 0;
  std::vector<double> scores;

  double at(int c, int r, int cc) const {
    return scores[(static_cast<size_t>(c) * h + r) * w + cc];
  }
};

struct DetectedKeypoint {
  double row = 0, col = 0;
  data::DegLabel label = data::DegLabel::Normal;
  double score = 0;
};

// Every pixel casts a vote of heatmap probability divided by the disk area at
// its offset-corrected position, splatted bilinearly onto the four
// surrounding cells of its class channel; votes aimed outside the grid are
// dropped.  heatmap is num_classes*h*w, offset 2*num_classes*h*w with (row,
// col) offset components in channels (2c, 2c+1).
HoughScoreMap hough_vote(const std::vector<float>& heatmap, const std::vector<float>& offset,
                         int num_classes, int h, int w, int radius_px);

// Collapses channels by pixelwise max (label = argmax channel, ties resolved
// to Normal), then greedily picks up to k peaks in descending score order,
// suppressing any candidate within suppression_px of an already-selected
// peak.  Peak positions are refined by a 3x3 score-weighted centroid.  Ties
// in score break in row-major scan order.
std::vector<DetectedKeypoint> select_top_keypoints(const HoughScoreMap& map, int k,
                                                   double suppression_px);

inline double to_millimeters(double distance_px, double spacing_mm_per_px) {
  require(spacing_mm_per_px > 0, Err::BadArgument, "spacing must be positive");
  return distance_px * spacing_mm_per_px;
}

}  // namespace spineone::decode
