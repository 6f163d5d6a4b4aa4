#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spineone/image.hpp"

namespace spineone::data {

// The 10 annotated lumbar structures: discs D1..D5 and vertebrae V1..V5,
// ordered top to bottom within each group.
enum class StructureId : int {
  D1 = 0, D2, D3, D4, D5,
  V1 = 5, V2, V3, V4, V5,
};

inline bool is_disc(StructureId s) { return static_cast<int>(s) < 5; }

const char* structure_name(StructureId s);
std::optional<StructureId> parse_structure(const std::string& name);

enum class DegLabel : int { Normal = 0, Degenerative = 1 };

const char* label_name(DegLabel l);
std::optional<DegLabel> parse_label(const std::string& name);

struct KeypointAnnotation {
  StructureId structure = StructureId::D1;
  double row = 0.0;
  double col = 0.0;
  DegLabel label = DegLabel::Normal;
  // Cleared when an augmentation crops the keypoint out; invalid keypoints
  // are skipped by target encoding.
  bool valid = true;
};

struct ExamAnnotation {
  std::string exam_id;
  std::vector<KeypointAnnotation> keypoints;  // exactly 10, one per structure

  const KeypointAnnotation& at(StructureId s) const;
};

// Multi-slice sagittal stack with physical geometry; the unit of inference.
struct ExamRecord {
  std::string exam_id;
  Stack slices;                 // n_total x H x W, intensities in [0, 65535]
  double spacing_row = 0.0;     // mm per pixel
  double spacing_col = 0.0;
  double slice_interval = 0.0;  // mm between slices
  int middle_index = 0;

  int n_total() const { return slices.n; }
  int height() const { return slices.h; }
  int width() const { return slices.w; }
};

// Checks the documented invariants; throws Error on violation.
void validate(const ExamRecord& exam);
void validate(const ExamAnnotation& ann, int h, int w);

// Exam directory layout: slice_000.png .. slice_NNN.png (16-bit grayscale),
// meta.json, annotation.json.
std::pair<ExamRecord, ExamAnnotation> load_exam(const std::string& dir);
void save_exam(const std::string& dir, const ExamRecord& exam, const ExamAnnotation& ann);

// The n slices centered on middle_index, order preserved. n must be odd and
// <= n_total; the window is shifted to stay in range when the middle slice
// sits close to either end.
Stack select_middle_slices(const ExamRecord& exam, int n);

struct AlignResult {
  Stack slices;            // n x canvas x canvas
  ExamAnnotation annotation;
  GeomTransform transform;  // original pixel coords -> canvas coords
};

// Resample to target_spacing (bilinear) and center on a canvas x canvas grid
// via symmetric zero-pad / center-crop. One affine map moves image and
// keypoints alike, and its record supports exact inverse mapping.
AlignResult align_spacing_and_resize(const Stack& slices, const ExamAnnotation& ann,
                                     double spacing_row, double spacing_col,
                                     double target_spacing, int canvas);

struct AugmentationSpec {
  double hflip_prob = 0.5;
  double zoom_min = 0.7;
  double zoom_max = 1.3;
  int crop_size = 512;
  uint64_t rng_seed = 0;
};

void validate(const AugmentationSpec& spec, int canvas);

struct AugmentResult {
  Stack slices;  // n x crop x crop
  ExamAnnotation annotation;  // keypoints outside the crop flagged invalid
  GeomTransform transform;    // canvas coords -> crop coords
};

// Random hflip + zoom about the canvas center + random crop, one transform
// for all slices and keypoints. Deterministic per rng_seed.
AugmentResult apply_augmentation(const Stack& slices, const ExamAnnotation& ann,
                                 const AugmentationSpec& spec);

// Deterministic disjoint exhaustive split; at least one id lands on each side
// whenever two or more ids exist.
std::pair<std::vector<std::string>, std::vector<std::string>> split_dataset(
    const std::vector<std::string>& ids, double train_fraction, uint64_t rng_seed);

// Sorted exam_* subdirectories of a dataset directory.
std::vector<std::string> list_exam_dirs(const std::string& dataset_dir);

}  // namespace spineone::data
