#pragma once

#include <string>

#include "spineone/model.hpp"
#include "spineone/objectives.hpp"

namespace spineone::pipeline {

// Everything a run needs, resolvable from profile defaults, a JSON config
// file, and SPINEONE_* environment overrides (applied in that order).
struct RunConfig {
  std::string profile = "full";  // "full" or "desk"

  // data
  std::string train_dir, eval_dir, out_dir = "runs/out";
  int n_slices = 7;
  int canvas = 640;
  int crop = 512;
  double spacing = 0.4375;  // target mm/px after alignment

  // encoding / decoding / metrics
  int radius_px = 6;
  double threshold_mm = 6.0;

  // loss
  double gamma = 2.0;
  bool oa_enabled = true;
  objectives::OASpec oa;

  // optimization
  int epochs = 300;
  int batch_size = 16;
  double initial_lr = 0.01;
  double lr_power = 0.9;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;

  // augmentation
  double hflip_prob = 0.5;
  double zoom_min = 0.7, zoom_max = 1.3;

  // model
  bool attention_enabled = true;
  nn::BackboneSpec backbone;

  // run control
  double val_fraction = 0.1;
  int val_interval = 5;  // epochs between validation passes
  uint64_t seed = 0;
  std::string resume;  // checkpoint path to continue from
};

// Profile defaults: "full" is the published recipe; "desk" is the tiny
// laptop-scale profile (canvas 160, crop 128, R=2, T=60, tiny backbone, with
// spacing rescaled so 2 px keeps the 2.625 mm analog).
RunConfig default_config(const std::string& profile);

// default_config(profile), overlaid with the JSON file (if non-empty), then
// with SPINEONE_* environment variables.  The profile is taken from the file
// when present there.
RunConfig load_config(const std::string& json_path);

void apply_env_overrides(RunConfig& cfg);
void validate(const RunConfig& cfg);

std::string config_to_json(const RunConfig& cfg);

// Stable hash over the training-semantics fields (paths excluded), used to
// detect checkpoint/config mismatch on resume.
std::string config_hash(const RunConfig& cfg);

}  // namespace spineone::pipeline
