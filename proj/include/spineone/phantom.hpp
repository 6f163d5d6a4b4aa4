#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "spineone/data.hpp"

namespace spineone::data {

// Controls for the synthetic spine-phantom generator.  Geometry scales with
// image_size; jitter multiplies every random geometric perturbation (0 gives a
// perfectly regular column).  pixel_spacing is the nominal mm/px written to
// exam metadata; each exam draws a small deviation around it so the spacing
// alignment stage has real work to do.
struct PhantomSpec {
  int count = 1;
  int image_size = 160;
  double degenerative_rate = 0.35;
  double jitter = 1.0;
  uint64_t rng_seed = 0;
  double pixel_spacing = 1.3125;
  double slice_interval = 4.5;
};

void validate(const PhantomSpec& spec);

// Renders one synthetic exam: a vertical column of 5 rectangular vertebrae
// alternating with 5 elliptical discs on a noisy background, replicated over
// 7-11 slices with per-slice attenuation and sub-pixel drift.  Degenerative
// structures are drawn flatter and dimmer.  The annotation holds the true
// middle-slice centroids.  Deterministic per (rng_seed, index).
std::pair<ExamRecord, ExamAnnotation> generate_phantom_exam(const PhantomSpec& spec, int index);

// Generates spec.count exams and writes them under out_dir as exam_<id>
// directories in the standard on-disk layout.  Returns the directory paths.
std::vector<std::string> write_phantom_dataset(const PhantomSpec& spec, const std::string& out_dir);

}  // namespace spineone::data
