#pragma once

#include <utility>
#include <vector>

#include "spineone/data.hpp"

namespace spineone::targets {

using data::ExamAnnotation;

struct EncodingSpec {
  int radius_px = 6;
  int num_classes = 2;
  int height = 640;
  int width = 640;
};

void validate(const EncodingSpec& spec);

// A keypoint prepared for encoding: sub-pixel position plus class channel.
struct EncodedKeypoint {
  double row = 0;
  double col = 0;
  int cls = 0;
};

// Binary per-class keypoint heatmap: channel c is the union of radius-R disks
// around every class-c keypoint, evaluated on the pixel-center lattice.
struct HeatmapTarget {
  int channels = 0, h = 0, w = 0;
  std::vector<float> values;  // channels*h*w, each 0 or 1

  float at(int c, int r, int cc) const {
    return values[(static_cast<size_t>(c) * h + r) * w + cc];
  }
};

// Short-range offset field: channels (2c, 2c+1) hold the (row, col) components
// of keypoint-minus-pixel inside class-c disks.  mask has one channel per
// class marking the positions that carry a real offset; everywhere else the
// values are zero and must be excluded from the loss.
struct OffsetTarget {
  int channels = 0, h = 0, w = 0;  // channels = 2 * num_classes
  std::vector<float> values;
  std::vector<float> mask;  // (channels/2)*h*w, each 0 or 1

  float at(int c, int r, int cc) const {
    return values[(static_cast<size_t>(c) * h + r) * w + cc];
  }
  float mask_at(int c, int r, int cc) const {
    return mask[(static_cast<size_t>(c) * h + r) * w + cc];
  }
};

struct TargetMaps {
  HeatmapTarget heatmap;
  OffsetTarget offset;
};

// Both encoders reject disks of the same class that share a lattice point,
// since the union encoding is ill-defined there (error OverlapViolation).
HeatmapTarget encode_heatmap(const std::vector<EncodedKeypoint>& keypoints,
                             const EncodingSpec& spec);
OffsetTarget encode_offset(const std::vector<EncodedKeypoint>& keypoints,
                           const EncodingSpec& spec);

// Encodes the disc and vertebra branches independently from a full annotation;
// keypoints flagged invalid (e.g. cropped out by augmentation) are skipped.
std::pair<TargetMaps, TargetMaps> encode_exam_targets(const ExamAnnotation& annotation,
                                                      const EncodingSpec& spec);

// The two per-branch keypoint lists underlying encode_exam_targets, with the
// class channel taken from each keypoint's Normal/Degenerative label.
std::vector<EncodedKeypoint> branch_keypoints(const ExamAnnotation& annotation, bool discs);

}  // namespace spineone::targets
