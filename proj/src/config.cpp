#include "spineone/config.hpp"

#include <cstdlib>
#include <fstream>

#include "nlohmann/json.hpp"

namespace spineone::pipeline {

namespace {

using json = nlohmann::json;

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json semantic_json(const RunConfig& c) {
  // Everything that alters training/evaluation results; paths excluded.
  json j;
  j["profile"] = c.profile;
  j["n_slices"] = c.n_slices;
  j["canvas"] = c.canvas;
  j["crop"] = c.crop;
  j["spacing"] = c.spacing;
  j["radius_px"] = c.radius_px;
  j["threshold_mm"] = c.threshold_mm;
  j["gamma"] = c.gamma;
  j["oa_enabled"] = c.oa_enabled;
  j["oa"] = {{"clip_bound", c.oa.clip_bound},
             {"enable_after_fraction", c.oa.enable_after_fraction}};
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["initial_lr"] = c.initial_lr;
  j["lr_power"] = c.lr_power;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["adam_eps"] = c.adam_eps;
  j["hflip_prob"] = c.hflip_prob;
  j["zoom_min"] = c.zoom_min;
  j["zoom_max"] = c.zoom_max;
  j["attention_enabled"] = c.attention_enabled;
  j["backbone"] = {{"name", c.backbone.name},
                   {"in_channels", c.backbone.in_channels},
                   {"stem_channels", c.backbone.stem_channels},
                   {"stage_channels", c.backbone.stage_channels},
                   {"feature_channels", c.backbone.feature_channels},
                   {"att_size", c.backbone.att_size},
                   {"head_mid", c.backbone.head_mid},
                   {"min_input", c.backbone.min_input},
                   {"pam_reduction", c.backbone.pam_reduction},
                   {"attention", c.backbone.attention}};
  j["val_fraction"] = c.val_fraction;
  j["val_interval"] = c.val_interval;
  j["seed"] = c.seed;
  return j;
}

void sync_backbone(RunConfig& c) {
  c.backbone.in_channels = c.n_slices;
  c.backbone.attention = c.attention_enabled;
}

}  // namespace

RunConfig default_config(const std::string& profile) {
  RunConfig c;
  c.profile = profile;
  if (profile == "full") {
    c.backbone = nn::reference_backbone_spec(c.n_slices);
    c.batch_size = 16;     // with attention
    c.initial_lr = 0.01;
  } else if (profile == "desk") {
    c.canvas = 160;
    c.crop = 128;
    c.spacing = 1.3125;  // 3x coarser grid: radius 2 px spans the same 2.625 mm
    c.radius_px = 2;
    c.epochs = 60;
    c.batch_size = 16;
    c.initial_lr = 0.01;
    c.backbone = nn::tiny_backbone_spec(c.n_slices);
  } else {
    fail(Err::BadArgument, "unknown profile '" + profile + "' (expected full or desk)");
  }
  sync_backbone(c);
  return c;
}

RunConfig load_config(const std::string& json_path) {
  std::string profile = "full";
  json j;
  if (!json_path.empty()) {
    std::ifstream in(json_path);
    require(in.good(), Err::IoError, "cannot open config " + json_path);
    try {
      in >> j;
    } catch (const json::exception& e) {
      fail(Err::BadMetadata, json_path + ": unparsable config: " + e.what());
    }
    if (j.contains("profile")) profile = j.at("profile").get<std::string>();
  }
  RunConfig c = default_config(profile);

  maybe(j, "train_dir", c.train_dir);
  maybe(j, "eval_dir", c.eval_dir);
  maybe(j, "out_dir", c.out_dir);
  maybe(j, "n_slices", c.n_slices);
  maybe(j, "canvas", c.canvas);
  maybe(j, "crop", c.crop);
  maybe(j, "spacing", c.spacing);
  maybe(j, "radius_px", c.radius_px);
  maybe(j, "threshold_mm", c.threshold_mm);
  maybe(j, "gamma", c.gamma);
  maybe(j, "oa_enabled", c.oa_enabled);
  if (j.contains("oa")) {
    maybe(j.at("oa"), "clip_bound", c.oa.clip_bound);
    maybe(j.at("oa"), "enable_after_fraction", c.oa.enable_after_fraction);
  }
  maybe(j, "epochs", c.epochs);
  // The published batch/lr defaults pair with the attention switch; honor the
  // pairing before explicit overrides land.
  if (j.contains("attention_enabled")) {
    c.attention_enabled = j.at("attention_enabled").get<bool>();
    if (!c.attention_enabled) {
      c.batch_size = 64;
      c.initial_lr = 0.04;
    }
  }
  maybe(j, "batch_size", c.batch_size);
  maybe(j, "initial_lr", c.initial_lr);
  maybe(j, "lr_power", c.lr_power);
  maybe(j, "beta1", c.beta1);
  maybe(j, "beta2", c.beta2);
  maybe(j, "adam_eps", c.adam_eps);
  maybe(j, "hflip_prob", c.hflip_prob);
  maybe(j, "zoom_min", c.zoom_min);
  maybe(j, "zoom_max", c.zoom_max);
  if (j.contains("backbone")) {
    const auto& b = j.at("backbone");
    maybe(b, "name", c.backbone.name);
    maybe(b, "stem_channels", c.backbone.stem_channels);
    maybe(b, "stage_channels", c.backbone.stage_channels);
    maybe(b, "feature_channels", c.backbone.feature_channels);
    maybe(b, "att_size", c.backbone.att_size);
    maybe(b, "head_mid", c.backbone.head_mid);
    maybe(b, "min_input", c.backbone.min_input);
    maybe(b, "pam_reduction", c.backbone.pam_reduction);
  }
  maybe(j, "val_fraction", c.val_fraction);
  maybe(j, "val_interval", c.val_interval);
  maybe(j, "seed", c.seed);
  maybe(j, "resume", c.resume);

  sync_backbone(c);
  apply_env_overrides(c);
  validate(c);
  return c;
}

void apply_env_overrides(RunConfig& c) {
  auto env_str = [](const char* k, std::string& out) {
    if (const char* v = std::getenv(k)) out = v;
  };
  auto env_int = [](const char* k, auto& out) {
    if (const char* v = std::getenv(k)) out = static_cast<std::decay_t<decltype(out)>>(std::stoll(v));
  };
  auto env_dbl = [](const char* k, double& out) {
    if (const char* v = std::getenv(k)) out = std::stod(v);
  };
  auto env_bool = [](const char* k, bool& out) {
    if (const char* v = std::getenv(k)) out = std::string(v) == "1" || std::string(v) == "true";
  };
  env_str("SPINEONE_TRAIN_DIR", c.train_dir);
  env_str("SPINEONE_EVAL_DIR", c.eval_dir);
  env_str("SPINEONE_OUT_DIR", c.out_dir);
  env_int("SPINEONE_EPOCHS", c.epochs);
  env_int("SPINEONE_BATCH_SIZE", c.batch_size);
  env_dbl("SPINEONE_INITIAL_LR", c.initial_lr);
  env_int("SPINEONE_SEED", c.seed);
  env_int("SPINEONE_VAL_INTERVAL", c.val_interval);
  env_bool("SPINEONE_OA_ENABLED", c.oa_enabled);
  env_bool("SPINEONE_ATTENTION_ENABLED", c.attention_enabled);
  env_str("SPINEONE_RESUME", c.resume);
  sync_backbone(c);
}

void validate(const RunConfig& c) {
  require(c.n_slices >= 1 && c.n_slices % 2 == 1, Err::BadArgument,
          "n_slices must be odd and positive");
  require(c.canvas > 0 && c.crop > 0 && c.crop <= c.canvas, Err::BadArgument,
          "crop must fit inside the canvas");
  require(c.spacing > 0 && c.radius_px > 0 && c.threshold_mm > 0, Err::BadArgument,
          "spacing, radius and threshold must be positive");
  require(c.gamma >= 0, Err::BadArgument, "gamma must be non-negative");
  objectives::validate(c.oa);
  require(c.epochs >= 1 && c.batch_size >= 1, Err::BadArgument,
          "epochs and batch_size must be positive");
  require(c.initial_lr > 0 && c.lr_power > 0, Err::BadArgument, "bad learning-rate schedule");
  require(c.beta1 > 0 && c.beta1 < 1 && c.beta2 > 0 && c.beta2 < 1 && c.adam_eps > 0,
          Err::BadArgument, "bad optimizer moments");
  require(c.val_fraction > 0 && c.val_fraction < 1, Err::BadArgument,
          "val_fraction must lie in (0, 1)");
  require(c.val_interval >= 1, Err::BadArgument, "val_interval must be positive");
  nn::validate(c.backbone);
  require(c.backbone.in_channels == c.n_slices, Err::ConfigMismatch,
          "backbone in_channels must equal n_slices");
}

std::string config_to_json(const RunConfig& c) {
  json j = semantic_json(c);
  j["train_dir"] = c.train_dir;
  j["eval_dir"] = c.eval_dir;
  j["out_dir"] = c.out_dir;
  j["resume"] = c.resume;
  return j.dump(2) + "\n";
}

std::string config_hash(const RunConfig& c) {
  return to_hex(fnv1a64(semantic_json(c).dump()));
}

}  // namespace spineone::pipeline
