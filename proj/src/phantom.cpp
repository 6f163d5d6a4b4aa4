#include "spineone/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

namespace spineone::data {

namespace {

struct Shape {
  StructureId structure;
  DegLabel label;
  double row = 0, col = 0;       // centroid on the middle slice
  double half_h = 0, half_w = 0;
  double intensity = 0;
};

// Coverage of one pixel by a shape, with a ~1 px soft edge so centroids stay
// stable under resampling.  Discs are ellipses, vertebrae axis-aligned boxes.
double coverage(const Shape& s, double r, double c) {
  const double dr = r - s.row;
  const double dc = c - s.col;
  if (is_disc(s.structure)) {
    const double rho = std::sqrt((dr / s.half_h) * (dr / s.half_h) +
                                 (dc / s.half_w) * (dc / s.half_w));
    return std::clamp((1.0 - rho) * std::min(s.half_h, s.half_w), 0.0, 1.0);
  }
  const double inside = std::min(s.half_h - std::abs(dr), s.half_w - std::abs(dc));
  return std::clamp(inside, 0.0, 1.0);
}

double uniform_pm(std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
}

}  // namespace

void validate(const PhantomSpec& spec) {
  require(spec.count > 0, Err::BadArgument, "phantom count must be positive");
  require(spec.degenerative_rate >= 0.0 && spec.degenerative_rate <= 1.0, Err::BadArgument,
          "degenerative_rate must lie in [0, 1]");
  require(spec.image_size >= 64, Err::TooSmall, "phantom image_size must be at least 64");
  require(spec.jitter >= 0.0, Err::BadArgument, "jitter must be non-negative");
  require(spec.pixel_spacing > 0.0 && spec.slice_interval > 0.0, Err::BadArgument,
          "phantom spacings must be positive");
}

std::pair<ExamRecord, ExamAnnotation> generate_phantom_exam(const PhantomSpec& spec, int index) {
  validate(spec);
  require(index >= 0 && index < spec.count, Err::BadArgument, "phantom index out of range");

  std::mt19937_64 rng(mix64(spec.rng_seed, 0x70686E746F6D2131ull, static_cast<uint64_t>(index)));
  const double S = spec.image_size;
  const double s = S / 160.0;  // geometry reference scale
  const double pitch = 0.15 * S;
  const double jit = spec.jitter;

  ExamRecord exam;
  char idbuf[16];
  std::snprintf(idbuf, sizeof(idbuf), "%04d", index);
  exam.exam_id = idbuf;
  const int n_slices = 7 + 2 * std::uniform_int_distribution<int>(0, 2)(rng);
  exam.middle_index = n_slices / 2;
  exam.slice_interval = spec.slice_interval;
  const double spacing = spec.pixel_spacing * (1.0 + 0.05 * jit * uniform_pm(rng));
  exam.spacing_row = spacing;
  exam.spacing_col = spacing;

  // Column layout: vertebrae at a regular pitch, discs halfway between, with a
  // slight lateral lean and per-structure wiggle.  Jitter is capped so the
  // anatomical top-to-bottom ordering can never invert.
  const double col0 = 0.5 * S + 4.0 * s * jit * uniform_pm(rng);
  const double lean = 0.05 * jit * uniform_pm(rng);
  const double top = 0.1875 * S + 3.0 * s * jit * uniform_pm(rng);
  const double wiggle = std::min(1.0 * s * jit, pitch / 8.0);

  std::vector<Shape> shapes;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 5; ++i) {
    Shape v;
    v.structure = static_cast<StructureId>(static_cast<int>(StructureId::V1) + i);
    v.row = top + i * pitch + wiggle * uniform_pm(rng);
    v.col = col0 + lean * (v.row - 0.5 * S) + 1.5 * s * jit * uniform_pm(rng);
    v.half_h = (5.5 + 1.5 * unit(rng)) * s;
    v.half_w = (14.0 + 3.0 * unit(rng)) * s;
    v.intensity = 34000.0 + 8000.0 * unit(rng);
    v.label = unit(rng) < spec.degenerative_rate ? DegLabel::Degenerative : DegLabel::Normal;

    Shape d;
    d.structure = static_cast<StructureId>(i);
    d.row = top + (i + 0.5) * pitch + wiggle * uniform_pm(rng);
    d.col = col0 + lean * (d.row - 0.5 * S) + 1.5 * s * jit * uniform_pm(rng);
    d.half_h = (2.5 + 1.0 * unit(rng)) * s;
    d.half_w = (13.0 + 3.0 * unit(rng)) * s;
    d.intensity = 34000.0 + 8000.0 * unit(rng);
    d.label = unit(rng) < spec.degenerative_rate ? DegLabel::Degenerative : DegLabel::Normal;

    shapes.push_back(v);
    shapes.push_back(d);
  }
  for (auto& sh : shapes) {
    if (sh.label == DegLabel::Degenerative) {
      sh.half_h *= 0.55;
      sh.intensity *= 0.6;
    }
  }

  // Per-slice drift of the whole column; the middle slice is undisturbed so
  // annotated centroids are exact there.
  const int size = spec.image_size;
  exam.slices = Stack(n_slices, size, size);
  std::normal_distribution<double> bg(3000.0, 300.0);
  for (int j = 0; j < n_slices; ++j) {
    const bool mid = j == exam.middle_index;
    const double dr = mid ? 0.0 : 0.8 * s * jit * uniform_pm(rng);
    const double dc = mid ? 0.0 : 0.8 * s * jit * uniform_pm(rng);
    const double atten = std::max(0.45, 1.0 - 0.12 * std::abs(j - exam.middle_index));
    float* img = exam.slices.plane(j);
    for (int r = 0; r < size; ++r)
      for (int c = 0; c < size; ++c)
        img[r * size + c] = static_cast<float>(std::max(0.0, bg(rng)));
    for (const auto& sh : shapes) {
      const int r0 = std::max(0, static_cast<int>(std::floor(sh.row + dr - sh.half_h - 2)));
      const int r1 = std::min(size - 1, static_cast<int>(std::ceil(sh.row + dr + sh.half_h + 2)));
      const int c0 = std::max(0, static_cast<int>(std::floor(sh.col + dc - sh.half_w - 2)));
      const int c1 = std::min(size - 1, static_cast<int>(std::ceil(sh.col + dc + sh.half_w + 2)));
      for (int r = r0; r <= r1; ++r) {
        for (int c = c0; c <= c1; ++c) {
          const double a = coverage(sh, r - dr, c - dc);
          if (a > 0) {
            float& px = img[r * size + c];
            px = static_cast<float>(
                std::min(65535.0, px + a * atten * sh.intensity));
          }
        }
      }
    }
  }

  ExamAnnotation ann;
  ann.exam_id = exam.exam_id;
  for (const auto& sh : shapes)
    ann.keypoints.push_back({sh.structure, sh.row, sh.col, sh.label, true});
  std::sort(ann.keypoints.begin(), ann.keypoints.end(),
            [](const KeypointAnnotation& a, const KeypointAnnotation& b) {
              return static_cast<int>(a.structure) < static_cast<int>(b.structure);
            });

  validate(exam);
  validate(ann, size, size);
  return {std::move(exam), std::move(ann)};
}

std::vector<std::string> write_phantom_dataset(const PhantomSpec& spec,
                                               const std::string& out_dir) {
  validate(spec);
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> dirs;
  for (int i = 0; i < spec.count; ++i) {
    auto [exam, ann] = generate_phantom_exam(spec, i);
    const std::string dir =
        (std::filesystem::path(out_dir) / ("exam_" + exam.exam_id)).string();
    save_exam(dir, exam, ann);
    dirs.push_back(dir);
  }
  return dirs;
}

}  // namespace spineone::data
