#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "nlohmann/json.hpp"
#include "spineone/pipeline.hpp"

namespace spineone::pipeline {

namespace {

using json = nlohmann::json;

// Stream salts for deriving independent RNG streams from the run seed.
constexpr uint64_t kSaltSplit = 0x73706C6974216121ull;
constexpr uint64_t kSaltShuffle = 0x736875666C652121ull;
constexpr uint64_t kSaltAugment = 0x6175676D656E7421ull;

class Adam {
 public:
  Adam(std::vector<nn::Param*> params, double beta1, double beta2, double eps)
      : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
      m_[i].assign(params_[i]->value.size(), 0.0f);
      v_[i].assign(params_[i]->value.size(), 0.0f);
    }
  }

  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (size_t i = 0; i < params_.size(); ++i) {
      nn::Param* p = params_[i];
      for (size_t k = 0; k < p->value.size(); ++k) {
        const double g = p->grad[k];
        const double m = beta1_ * m_[i][k] + (1.0 - beta1_) * g;
        const double v = beta2_ * v_[i][k] + (1.0 - beta2_) * g * g;
        m_[i][k] = static_cast<float>(m);
        v_[i][k] = static_cast<float>(v);
        p->value[k] -=
            static_cast<float>(lr * (m / bc1) / (std::sqrt(v / bc2) + eps_));
      }
    }
  }

 private:
  std::vector<nn::Param*> params_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

std::vector<float> sample_map(const nn::Tensor& t, int b) {
  const float* p = t.at(b, 0);
  return std::vector<float>(p, p + static_cast<size_t>(t.c) * t.plane());
}

void add_sample_grad(nn::Tensor& acc, int b, const std::vector<float>& g, float scale) {
  float* p = acc.at(b, 0);
  for (size_t i = 0; i < g.size(); ++i) p[i] += scale * g[i];
}

}  // namespace

double poly_lr(double initial_lr, int epoch, int total_epochs, double power) {
  require(total_epochs >= 1 && epoch >= 0 && epoch < total_epochs, Err::BadArgument,
          "epoch outside schedule");
  return initial_lr * std::pow(1.0 - static_cast<double>(epoch) / total_epochs, power);
}

TrainResult train(const RunConfig& cfg) {
  validate(cfg);
  require(!cfg.train_dir.empty(), Err::BadArgument, "train_dir not set");
  const auto wall_start = std::chrono::steady_clock::now();
  std::filesystem::create_directories(cfg.out_dir);
  const std::string hash = config_hash(cfg);
  {
    std::ofstream cfg_out(std::filesystem::path(cfg.out_dir) / "config.json");
    cfg_out << config_to_json(cfg);
  }

  const auto dirs = data::list_exam_dirs(cfg.train_dir);
  require(!dirs.empty(), Err::EmptyDataset, cfg.train_dir + " holds no exam_* directories");
  auto [train_dirs, val_dirs] = dirs.size() >= 2
                                    ? data::split_dataset(dirs, 1.0 - cfg.val_fraction,
                                                          mix64(cfg.seed, kSaltSplit))
                                    : std::pair{dirs, std::vector<std::string>{}};

  std::vector<PreparedExam> train_set, val_set;
  for (const auto& d : train_dirs) train_set.push_back(prepare_exam(d, cfg));
  for (const auto& d : val_dirs) val_set.push_back(prepare_exam(d, cfg));

  int start_epoch = 0;
  std::unique_ptr<nn::SpineOneModel> model;
  if (!cfg.resume.empty()) {
    auto [loaded, meta] = nn::load_checkpoint(cfg.resume);
    require(meta.config_hash == hash, Err::ConfigMismatch,
            "resume checkpoint was trained with a different config");
    model = std::move(loaded);
    start_epoch = meta.epoch + 1;
  } else {
    model = std::make_unique<nn::SpineOneModel>(cfg.backbone, cfg.seed);
  }

  Adam opt(model->trainable_params(), cfg.beta1, cfg.beta2, cfg.adam_eps);
  std::ofstream log(std::filesystem::path(cfg.out_dir) / "train_log.jsonl",
                    start_epoch > 0 ? std::ios::app : std::ios::trunc);
  require(log.good(), Err::IoError, "cannot write training log");

  const targets::EncodingSpec enc{cfg.radius_px, 2, cfg.crop, cfg.crop};
  TrainResult result;
  result.best_val_macro_f1 = -1.0;
  const std::string last_path =
      (std::filesystem::path(cfg.out_dir) / "checkpoint_last.bin").string();
  const std::string best_path =
      (std::filesystem::path(cfg.out_dir) / "checkpoint_best.bin").string();

  const int n_train = static_cast<int>(train_set.size());
  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const double lr = poly_lr(cfg.initial_lr, epoch, cfg.epochs, cfg.lr_power);
    std::vector<int> order(n_train);
    for (int i = 0; i < n_train; ++i) order[i] = i;
    std::mt19937_64 shuffle_rng(mix64(cfg.seed, kSaltShuffle, static_cast<uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_total = 0;
    int steps = 0;
    for (int first = 0; first < n_train; first += cfg.batch_size) {
      const int bsz = std::min(cfg.batch_size, n_train - first);
      nn::Tensor input(bsz, cfg.n_slices, cfg.crop, cfg.crop);
      std::vector<std::pair<targets::TargetMaps, targets::TargetMaps>> tmaps(bsz);
      for (int b = 0; b < bsz; ++b) {
        const int di = order[first + b];
        data::AugmentationSpec aug;
        aug.hflip_prob = cfg.hflip_prob;
        aug.zoom_min = cfg.zoom_min;
        aug.zoom_max = cfg.zoom_max;
        aug.crop_size = cfg.crop;
        aug.rng_seed = mix64(mix64(cfg.seed, kSaltAugment, static_cast<uint64_t>(epoch)),
                             static_cast<uint64_t>(di));
        data::AugmentResult augd =
            data::apply_augmentation(train_set[di].slices, train_set[di].annotation, aug);
        std::copy(augd.slices.v.begin(), augd.slices.v.end(), input.at(b, 0));
        tmaps[b] = targets::encode_exam_targets(augd.annotation, enc);
      }

      nn::ModelOutputs out = model->forward(input, true);
      nn::OutputGrads grads;
      grads.disc_heatmap = nn::Tensor(bsz, 2, cfg.crop, cfg.crop);
      grads.disc_offset = nn::Tensor(bsz, 4, cfg.crop, cfg.crop);
      grads.vert_heatmap = nn::Tensor(bsz, 2, cfg.crop, cfg.crop);
      grads.vert_offset = nn::Tensor(bsz, 4, cfg.crop, cfg.crop);

      objectives::LossBreakdown mean{};
      const float inv_b = 1.0f / static_cast<float>(bsz);
      for (int b = 0; b < bsz; ++b) {
        objectives::BranchGrads dg, vg;
        const auto breakdown = objectives::total_loss(
            sample_map(out.disc_heatmap, b), sample_map(out.disc_offset, b),
            sample_map(out.vert_heatmap, b), sample_map(out.vert_offset, b), tmaps[b].first,
            tmaps[b].second, cfg.oa_enabled ? epoch : 0, cfg.oa_enabled ? cfg.epochs : 1,
            cfg.oa, cfg.gamma, &dg, &vg);
        require(std::isfinite(breakdown.total), Err::BadArgument,
                "non-finite loss at epoch " + std::to_string(epoch));
        add_sample_grad(grads.disc_heatmap, b, dg.heatmap, inv_b);
        add_sample_grad(grads.disc_offset, b, dg.offset, inv_b);
        add_sample_grad(grads.vert_heatmap, b, vg.heatmap, inv_b);
        add_sample_grad(grads.vert_offset, b, vg.offset, inv_b);
        mean.disc_heatmap += breakdown.disc_heatmap * inv_b;
        mean.disc_offset += breakdown.disc_offset * inv_b;
        mean.vert_heatmap += breakdown.vert_heatmap * inv_b;
        mean.vert_offset += breakdown.vert_offset * inv_b;
        mean.total += breakdown.total * inv_b;
        mean.oa_active = breakdown.oa_active;
      }

      model->zero_grad();
      model->backward(grads);
      opt.step(lr);

      log << json{{"type", "step"},
                  {"epoch", epoch},
                  {"step", steps},
                  {"lr", lr},
                  {"disc_heatmap", mean.disc_heatmap},
                  {"disc_offset", mean.disc_offset},
                  {"vert_heatmap", mean.vert_heatmap},
                  {"vert_offset", mean.vert_offset},
                  {"total", mean.total},
                  {"oa_active", mean.oa_active}}
                 .dump()
          << "\n";
      epoch_total += mean.total;
      ++steps;
    }

    json epoch_rec{{"type", "epoch"},
                   {"epoch", epoch},
                   {"lr", lr},
                   {"mean_total", steps > 0 ? epoch_total / steps : 0.0},
                   {"oa_active",
                    cfg.oa_enabled && objectives::oa_active(epoch, cfg.epochs, cfg.oa)}};

    const bool last_epoch = epoch == cfg.epochs - 1;
    if (!val_set.empty() && (last_epoch || (epoch + 1) % cfg.val_interval == 0)) {
      const auto rep = evaluate_prepared(*model, cfg, val_set, {});
      const double f1 = rep.overall.macro.f1;
      epoch_rec["val_macro_f1"] = f1;
      result.last_val_macro_f1 = f1;
      if (f1 > result.best_val_macro_f1) {
        result.best_val_macro_f1 = f1;
        nn::CheckpointMeta meta;
        meta.epoch = epoch;
        meta.config_hash = hash;
        meta.metrics_json = json{{"val_macro_f1", f1}}.dump();
        save_checkpoint(*model, best_path, meta);
        result.best_checkpoint = best_path;
      }
    }
    log << epoch_rec.dump() << "\n";
    log.flush();
    result.epochs_run = epoch + 1;
  }

  nn::CheckpointMeta meta;
  meta.epoch = cfg.epochs - 1;
  meta.config_hash = hash;
  if (result.last_val_macro_f1 > 0)
    meta.metrics_json = json{{"val_macro_f1", result.last_val_macro_f1}}.dump();
  save_checkpoint(*model, last_path, meta);
  result.last_checkpoint = last_path;
  if (result.best_checkpoint.empty()) {
    result.best_checkpoint = last_path;
    result.best_val_macro_f1 = result.last_val_macro_f1;
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return result;
}

}  // namespace spineone::pipeline
