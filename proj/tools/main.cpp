#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "nlohmann/json.hpp"
#include "spineone/config.hpp"
#include "spineone/phantom.hpp"
#include "spineone/pipeline.hpp"
#include "spineone/plot.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace spineone;

namespace {

pipeline::RunConfig resolve_config(const std::string& config_path, const std::string& profile) {
  if (!config_path.empty()) return pipeline::load_config(config_path);
  pipeline::RunConfig cfg = pipeline::default_config(profile);
  pipeline::apply_env_overrides(cfg);
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  require(out.good(), Err::IoError, "cannot open " + path.string() + " for writing");
  out << text;
}

// Binarized heatmap channels of the first (un-augmented) training exam,
// for eyeballing the encoding.
void dump_targets(const pipeline::RunConfig& cfg) {
  const auto dirs = data::list_exam_dirs(cfg.train_dir);
  require(!dirs.empty(), Err::EmptyDataset, cfg.train_dir + " holds no exam_* directories");
  const auto prep = pipeline::prepare_exam(dirs[0], cfg);
  const targets::EncodingSpec enc{cfg.radius_px, 2, cfg.canvas, cfg.canvas};
  const auto [disc, vert] = targets::encode_exam_targets(prep.annotation, enc);
  const fs::path dir = fs::path(cfg.out_dir) / "targets_debug";
  fs::create_directories(dir);
  const auto write_heat = [&](const targets::HeatmapTarget& h, const std::string& stem) {
    for (int c = 0; c < h.channels; ++c) {
      Gray16Image img;
      img.h = h.h;
      img.w = h.w;
      img.v.resize(static_cast<size_t>(h.h) * h.w);
      for (int r = 0; r < h.h; ++r)
        for (int cc = 0; cc < h.w; ++cc)
          img.v[static_cast<size_t>(r) * h.w + cc] = h.at(c, r, cc) > 0.5f ? 65535 : 0;
      write_png_gray16((dir / (stem + "_c" + std::to_string(c) + ".png")).string(), img);
    }
  };
  write_heat(disc.heatmap, "disc_heatmap");
  write_heat(vert.heatmap, "vert_heatmap");
  std::printf("wrote target maps to %s\n", dir.string().c_str());
}

int run_train(const pipeline::RunConfig& cfg, bool dump) {
  if (dump) dump_targets(cfg);
  const pipeline::TrainResult res = pipeline::train(cfg);
  std::printf("trained %d epochs in %.1f s\n", res.epochs_run, res.wall_seconds);
  std::printf("last checkpoint: %s\n", res.last_checkpoint.c_str());
  if (!res.best_checkpoint.empty())
    std::printf("best checkpoint: %s (val macro F1 %.4f)\n", res.best_checkpoint.c_str(),
                res.best_val_macro_f1);
  return 0;
}

int run_eval(pipeline::RunConfig cfg, const std::string& checkpoint,
             const std::string& data_dir, const std::string& out_dir,
             std::vector<double> thresholds) {
  auto [model, meta] = nn::load_checkpoint(checkpoint);
  require(model->spec().in_channels == cfg.n_slices, Err::ConfigMismatch,
          "checkpoint expects " + std::to_string(model->spec().in_channels) +
              " input slices, config says " + std::to_string(cfg.n_slices));
  const auto dirs = data::list_exam_dirs(data_dir);
  require(!dirs.empty(), Err::EmptyDataset, data_dir + " holds no exam_* directories");

  std::vector<double> curve_thresholds;
  if (thresholds.size() == 1)
    cfg.threshold_mm = thresholds[0];  // single-threshold report, no curve
  else
    curve_thresholds = thresholds;
  const auto rep = pipeline::evaluate_dirs(*model, cfg, dirs, curve_thresholds);

  fs::create_directories(out_dir);
  write_text(fs::path(out_dir) / "report.json", metrics::report_to_json(rep));
  write_text(fs::path(out_dir) / "report.csv", metrics::report_to_csv(rep));
  if (!rep.curve.empty()) {
    plot::Series s;
    s.label = "OVERALL";
    s.color = plot::series_color(0);
    for (const auto& [t, p] : rep.curve) {
      s.x.push_back(t);
      s.y.push_back(p);
    }
    plot::PlotSpec ps;
    ps.title = "PCK VS THRESHOLD";
    ps.x_label = "THRESHOLD (MM)";
    ps.y_label = "PCK";
    ps.y_min = 0.0;
    ps.y_max = 1.0;
    write_png_rgb8((fs::path(out_dir) / "pck_curve.png").string(),
                   plot::render_xy_plot({s}, ps));
  }
  std::printf("exams %d  pck@%gmm %.4f  macro_f1 %.4f  micro_ap %.4f\n", rep.num_exams,
              rep.threshold_mm, rep.overall.pck, rep.overall.macro.f1, rep.micro_ap);
  std::printf("report: %s\n", (fs::path(out_dir) / "report.json").string().c_str());
  return 0;
}

int run_infer(const pipeline::RunConfig& cfg, const std::string& checkpoint,
              const std::string& exam_dir, const std::string& out_dir) {
  auto [model, meta] = nn::load_checkpoint(checkpoint);
  require(model->spec().in_channels == cfg.n_slices, Err::ConfigMismatch,
          "checkpoint expects " + std::to_string(model->spec().in_channels) +
              " input slices, config says " + std::to_string(cfg.n_slices));
  const pipeline::InferenceResult res = pipeline::infer_exam(*model, cfg, exam_dir);
  fs::create_directories(out_dir);
  write_text(fs::path(out_dir) / ("detections_" + res.exam_id + ".json"),
             pipeline::detections_to_json(res));

  // Middle-slice overlay: ground truth green, detections red.
  const auto prep = pipeline::prepare_exam(exam_dir, cfg);
  const int mid = cfg.n_slices / 2;
  Plane slice(prep.slices.h, prep.slices.w);
  std::copy(prep.slices.plane(mid), prep.slices.plane(mid + 1), slice.v.begin());
  std::vector<plot::OverlayMark> marks;
  for (const auto& kp : prep.annotation.keypoints) {
    if (!kp.valid) continue;
    std::string tag = data::structure_name(kp.structure);
    if (kp.label == data::DegLabel::Degenerative) tag += "+";
    marks.push_back({kp.row, kp.col, {0, 200, 0}, tag});
  }
  for (const auto& d : res.detections) {
    std::string tag = d.label == data::DegLabel::Degenerative ? "DEG" : "";
    marks.push_back({d.canvas_row, d.canvas_col, {230, 30, 30}, tag});
  }
  const int scale = std::max(1, 512 / cfg.canvas);
  const fs::path overlay = fs::path(out_dir) / ("overlay_" + res.exam_id + ".png");
  write_png_rgb8(overlay.string(), plot::render_overlay(slice, marks, scale));
  std::printf("exam %s: %zu detections in %.3f s\n", res.exam_id.c_str(),
              res.detections.size(), res.latency_seconds);
  std::printf("overlay: %s\n", overlay.string().c_str());
  return 0;
}

int run_plot(const std::vector<std::string>& reports, const std::string& log_path,
             const std::string& out_dir) {
  require(!reports.empty() || !log_path.empty(), Err::BadArgument,
          "nothing to plot: pass --report and/or --log");
  fs::create_directories(out_dir);

  if (!reports.empty()) {
    std::vector<plot::Series> series;
    for (size_t i = 0; i < reports.size(); ++i) {
      std::ifstream in(reports[i]);
      require(in.good(), Err::IoError, "cannot read " + reports[i]);
      json j;
      try {
        in >> j;
      } catch (const json::exception& e) {
        fail(Err::BadMetadata, reports[i] + ": " + e.what());
      }
      plot::Series s;
      s.label = fs::path(reports[i]).stem().string();
      s.color = plot::series_color(static_cast<int>(i));
      for (const auto& pt : j.value("pck_curve", json::array())) {
        s.x.push_back(pt.at("threshold_mm").get<double>());
        s.y.push_back(pt.at("pck").get<double>());
      }
      require(!s.x.empty(), Err::BadMetadata, reports[i] + " has an empty pck_curve");
      series.push_back(std::move(s));
    }
    plot::PlotSpec ps;
    ps.title = "PCK VS THRESHOLD";
    ps.x_label = "THRESHOLD (MM)";
    ps.y_label = "PCK";
    ps.y_min = 0.0;
    ps.y_max = 1.0;
    const fs::path out = fs::path(out_dir) / "pck_curve.png";
    write_png_rgb8(out.string(), plot::render_xy_plot(series, ps));
    std::printf("wrote %s\n", out.string().c_str());
  }

  if (!log_path.empty()) {
    std::ifstream in(log_path);
    require(in.good(), Err::IoError, "cannot read " + log_path);
    plot::Series loss, f1;
    loss.label = "TRAIN LOSS";
    loss.color = plot::series_color(0);
    f1.label = "VAL MACRO F1";
    f1.color = plot::series_color(1);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        fail(Err::BadMetadata, log_path + ": " + e.what());
      }
      if (j.value("type", "") != "epoch") continue;
      const double epoch = j.value("epoch", 0);
      loss.x.push_back(epoch);
      loss.y.push_back(j.value("mean_total", 0.0));
      if (j.contains("val_macro_f1")) {
        f1.x.push_back(epoch);
        f1.y.push_back(j["val_macro_f1"].get<double>());
      }
    }
    require(!loss.x.empty(), Err::BadMetadata, log_path + " holds no epoch records");
    std::vector<plot::Series> series{loss};
    if (!f1.x.empty()) series.push_back(f1);
    plot::PlotSpec ps;
    ps.title = "TRAINING CURVES";
    ps.x_label = "EPOCH";
    ps.y_min = 0.0;
    const fs::path out = fs::path(out_dir) / "training_curves.png";
    write_png_rgb8(out.string(), plot::render_xy_plot(series, ps));
    std::printf("wrote %s\n", out.string().c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spineone: one-stage spine keypoint localization and classification"};
  app.require_subcommand(1);

  // phantom
  auto* ph = app.add_subcommand("phantom", "Generate a synthetic phantom exam dataset");
  data::PhantomSpec pspec;
  std::string ph_out;
  ph->add_option("--out", ph_out, "output dataset directory")->required();
  ph->add_option("--count", pspec.count, "number of exams");
  ph->add_option("--image-size", pspec.image_size, "square slice size in pixels");
  ph->add_option("--degenerative-rate", pspec.degenerative_rate,
                 "per-structure probability of the degenerative label");
  ph->add_option("--jitter", pspec.jitter, "geometry jitter multiplier");
  ph->add_option("--seed", pspec.rng_seed, "dataset seed");
  ph->add_option("--spacing", pspec.pixel_spacing, "pixel spacing in mm");
  ph->add_option("--slice-interval", pspec.slice_interval, "slice interval in mm");

  // train
  auto* tr = app.add_subcommand("train", "Train a model");
  std::string tr_config, tr_profile = "desk", tr_train_dir, tr_out_dir, tr_resume;
  int tr_epochs = 0, tr_batch = 0;
  double tr_lr = 0;
  uint64_t tr_seed = 0;
  bool tr_no_attention = false, tr_no_oa = false, tr_dump_targets = false;
  tr->add_option("--config", tr_config, "JSON config file");
  tr->add_option("--profile", tr_profile, "profile when no config file is given (desk|full)");
  tr->add_option("--train-dir", tr_train_dir, "training dataset directory");
  tr->add_option("--out-dir", tr_out_dir, "run output directory");
  tr->add_option("--epochs", tr_epochs, "total epochs T");
  tr->add_option("--batch-size", tr_batch, "batch size");
  tr->add_option("--lr", tr_lr, "initial learning rate");
  tr->add_option("--seed", tr_seed, "run seed");
  tr->add_option("--resume", tr_resume, "checkpoint to resume from");
  tr->add_flag("--no-attention", tr_no_attention, "disable the dual-attention head");
  tr->add_flag("--no-oa", tr_no_oa, "disable objective association");
  tr->add_flag("--dump-targets", tr_dump_targets,
               "write the first exam's encoded heatmaps before training");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  std::string ev_config, ev_profile = "desk", ev_checkpoint, ev_data_dir,
              ev_out_dir = "runs/eval";
  std::vector<double> ev_thresholds;
  ev->add_option("--config", ev_config, "JSON config file");
  ev->add_option("--profile", ev_profile, "profile when no config file is given (desk|full)");
  ev->add_option("--checkpoint", ev_checkpoint, "checkpoint file")->required();
  ev->add_option("--data-dir", ev_data_dir, "evaluation dataset directory")->required();
  ev->add_option("--out-dir", ev_out_dir, "report output directory");
  ev->add_option("--thresholds", ev_thresholds,
                 "match thresholds in mm; one value = single-threshold report, "
                 "several = PCK curve (default 1..10)");

  // infer
  auto* in = app.add_subcommand("infer", "Run inference on one exam");
  std::string in_config, in_profile = "desk", in_checkpoint, in_exam_dir,
              in_out_dir = "runs/infer";
  in->add_option("--config", in_config, "JSON config file");
  in->add_option("--profile", in_profile, "profile when no config file is given (desk|full)");
  in->add_option("--checkpoint", in_checkpoint, "checkpoint file")->required();
  in->add_option("--exam-dir", in_exam_dir, "exam directory")->required();
  in->add_option("--out-dir", in_out_dir, "detection/overlay output directory");

  // plot
  auto* pl = app.add_subcommand("plot", "Render PCK and training-curve figures");
  std::vector<std::string> pl_reports;
  std::string pl_log, pl_out_dir = "runs/plots";
  pl->add_option("--report", pl_reports, "metrics report JSON file(s)");
  pl->add_option("--log", pl_log, "train_log.jsonl file");
  pl->add_option("--out-dir", pl_out_dir, "figure output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ph) {
      const auto dirs = data::write_phantom_dataset(pspec, ph_out);
      std::printf("wrote %zu exams to %s\n", dirs.size(), ph_out.c_str());
      return 0;
    }
    if (*tr) {
      pipeline::RunConfig cfg = resolve_config(tr_config, tr_profile);
      if (tr->count("--train-dir")) cfg.train_dir = tr_train_dir;
      if (tr->count("--out-dir")) cfg.out_dir = tr_out_dir;
      if (tr->count("--epochs")) cfg.epochs = tr_epochs;
      if (tr->count("--batch-size")) cfg.batch_size = tr_batch;
      if (tr->count("--lr")) cfg.initial_lr = tr_lr;
      if (tr->count("--seed")) cfg.seed = tr_seed;
      if (tr->count("--resume")) cfg.resume = tr_resume;
      if (tr_no_oa) cfg.oa_enabled = false;
      if (tr_no_attention) {
        cfg.attention_enabled = false;
        // keep the documented batch/lr pairing unless set explicitly
        if (!tr->count("--batch-size")) cfg.batch_size = 64;
        if (!tr->count("--lr")) cfg.initial_lr = 0.04;
      }
      cfg.backbone.in_channels = cfg.n_slices;
      cfg.backbone.attention = cfg.attention_enabled;
      pipeline::validate(cfg);
      return run_train(cfg, tr_dump_targets);
    }
    if (*ev) {
      pipeline::RunConfig cfg = resolve_config(ev_config, ev_profile);
      pipeline::validate(cfg);
      if (ev_thresholds.empty())
        for (int t = 1; t <= 10; ++t) ev_thresholds.push_back(t);
      return run_eval(cfg, ev_checkpoint, ev_data_dir, ev_out_dir, ev_thresholds);
    }
    if (*in) {
      pipeline::RunConfig cfg = resolve_config(in_config, in_profile);
      pipeline::validate(cfg);
      return run_infer(cfg, in_checkpoint, in_exam_dir, in_out_dir);
    }
    if (*pl) return run_plot(pl_reports, pl_log, pl_out_dir);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
