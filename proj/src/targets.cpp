#include "spineone/targets.hpp"

#include <cmath>
#include <cstdint>

namespace spineone::targets {

namespace {

// Visits every lattice point with ||x - (row,col)|| <= R and hands it to fn as
// (r, c).  Positions are pixel centers, the keypoint may be sub-pixel.
template <typename Fn>
void for_each_disk_point(double row, double col, int radius, int h, int w, Fn&& fn) {
  const double r2 = static_cast<double>(radius) * radius;
  const int r_lo = std::max(0, static_cast<int>(std::ceil(row - radius)));
  const int r_hi = std::min(h - 1, static_cast<int>(std::floor(row + radius)));
  const int c_lo = std::max(0, static_cast<int>(std::ceil(col - radius)));
  const int c_hi = std::min(w - 1, static_cast<int>(std::floor(col + radius)));
  for (int r = r_lo; r <= r_hi; ++r) {
    const double dr = r - row;
    for (int c = c_lo; c <= c_hi; ++c) {
      const double dc = c - col;
      if (dr * dr + dc * dc <= r2) fn(r, c);
    }
  }
}

// Rasterizes all disks and records which keypoint claims each (class, pixel).
// A second claim by a different keypoint of the same class means two disks
// overlap, which the encoding assumes never happens.
std::vector<int32_t> claim_map(const std::vector<EncodedKeypoint>& keypoints,
                               const EncodingSpec& spec) {
  std::vector<int32_t> claims(
      static_cast<size_t>(spec.num_classes) * spec.height * spec.width, -1);
  for (size_t k = 0; k < keypoints.size(); ++k) {
    const auto& kp = keypoints[k];
    require(kp.cls >= 0 && kp.cls < spec.num_classes, Err::BadArgument,
            "keypoint class out of range");
    require(kp.row >= 0 && kp.row <= spec.height - 1 && kp.col >= 0 &&
                kp.col <= spec.width - 1,
            Err::BadArgument, "keypoint position outside the target grid");
    for_each_disk_point(kp.row, kp.col, spec.radius_px, spec.height, spec.width,
                        [&](int r, int c) {
                          int32_t& cell =
                              claims[(static_cast<size_t>(kp.cls) * spec.height + r) *
                                         spec.width +
                                     c];
                          require(cell < 0 || cell == static_cast<int32_t>(k),
                                  Err::OverlapViolation,
                                  "same-class keypoint disks overlap");
                          cell = static_cast<int32_t>(k);
                        });
  }
  return claims;
}

}  // namespace

void validate(const EncodingSpec& spec) {
  require(spec.radius_px > 0, Err::BadArgument, "radius_px must be positive");
  require(spec.num_classes == 2, Err::BadArgument, "encoding expects 2 classes");
  require(spec.height > 0 && spec.width > 0, Err::BadArgument, "empty target grid");
}

HeatmapTarget encode_heatmap(const std::vector<EncodedKeypoint>& keypoints,
                             const EncodingSpec& spec) {
  validate(spec);
  const auto claims = claim_map(keypoints, spec);
  HeatmapTarget out;
  out.channels = spec.num_classes;
  out.h = spec.height;
  out.w = spec.width;
  out.values.assign(claims.size(), 0.0f);
  for (size_t i = 0; i < claims.size(); ++i)
    if (claims[i] >= 0) out.values[i] = 1.0f;
  return out;
}

OffsetTarget encode_offset(const std::vector<EncodedKeypoint>& keypoints,
                           const EncodingSpec& spec) {
  validate(spec);
  const auto claims = claim_map(keypoints, spec);
  OffsetTarget out;
  out.channels = 2 * spec.num_classes;
  out.h = spec.height;
  out.w = spec.width;
  out.values.assign(static_cast<size_t>(out.channels) * out.h * out.w, 0.0f);
  out.mask.assign(claims.size(), 0.0f);
  const size_t plane = static_cast<size_t>(out.h) * out.w;
  for (int cls = 0; cls < spec.num_classes; ++cls) {
    for (int r = 0; r < out.h; ++r) {
      for (int c = 0; c < out.w; ++c) {
        const size_t pos = static_cast<size_t>(r) * out.w + c;
        const int32_t k = claims[cls * plane + pos];
        if (k < 0) continue;
        out.mask[cls * plane + pos] = 1.0f;
        out.values[(2 * cls) * plane + pos] =
            static_cast<float>(keypoints[k].row - r);
        out.values[(2 * cls + 1) * plane + pos] =
            static_cast<float>(keypoints[k].col - c);
      }
    }
  }
  return out;
}

std::vector<EncodedKeypoint> branch_keypoints(const ExamAnnotation& annotation, bool discs) {
  std::vector<EncodedKeypoint> out;
  for (const auto& kp : annotation.keypoints) {
    if (!kp.valid || data::is_disc(kp.structure) != discs) continue;
    out.push_back({kp.row, kp.col, static_cast<int>(kp.label)});
  }
  return out;
}

std::pair<TargetMaps, TargetMaps> encode_exam_targets(const ExamAnnotation& annotation,
                                                      const EncodingSpec& spec) {
  std::pair<TargetMaps, TargetMaps> out;
  for (bool discs : {true, false}) {
    const auto kps = branch_keypoints(annotation, discs);
    TargetMaps& maps = discs ? out.first : out.second;
    maps.heatmap = encode_heatmap(kps, spec);
    maps.offset = encode_offset(kps, spec);
  }
  return out;
}

}  // namespace spineone::targets
