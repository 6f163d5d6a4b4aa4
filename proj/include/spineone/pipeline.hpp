#pragma once

#include "spineone/config.hpp"
#include "spineone/metrics.hpp"
#include "spineone/phantom.hpp"
#include "spineone/targets.hpp"

namespace spineone::pipeline {

// An exam after geometry normalization: middle slices selected, resampled to
// the target spacing on the canvas, intensities normalized per exam, with the
// aligned annotation and the original→canvas transform.
struct PreparedExam {
  std::string exam_id;
  Stack slices;
  data::ExamAnnotation annotation;
  GeomTransform transform;
};

PreparedExam prepare_exam(const std::string& dir, const RunConfig& cfg);

struct TrainResult {
  std::string last_checkpoint;
  std::string best_checkpoint;
  double best_val_macro_f1 = 0;
  double last_val_macro_f1 = 0;
  int epochs_run = 0;
  double wall_seconds = 0;
};

// Full training loop: augment → encode → forward → four-term loss with the
// OA schedule → Adam with the poly learning-rate decay; JSONL step/epoch logs
// and last/best checkpoints under cfg.out_dir.
TrainResult train(const RunConfig& cfg);

// lr_i = initial_lr * (1 - i/T)^power, evaluated per epoch.
double poly_lr(double initial_lr, int epoch, int total_epochs, double power);

metrics::MetricsReport evaluate_prepared(nn::SpineOneModel& model, const RunConfig& cfg,
                                         const std::vector<PreparedExam>& exams,
                                         const std::vector<double>& curve_thresholds);
metrics::MetricsReport evaluate_dirs(nn::SpineOneModel& model, const RunConfig& cfg,
                                     const std::vector<std::string>& exam_dirs,
                                     const std::vector<double>& curve_thresholds);

struct InferredKeypoint {
  decode::Branch branch = decode::Branch::Disc;
  double row = 0, col = 0;  // original (pre-alignment) pixel coordinates
  double canvas_row = 0, canvas_col = 0;
  data::DegLabel label = data::DegLabel::Normal;
  double score = 0;
};

struct InferenceResult {
  std::string exam_id;
  std::vector<InferredKeypoint> detections;
  double latency_seconds = 0;
};

InferenceResult infer_exam(nn::SpineOneModel& model, const RunConfig& cfg,
                           const std::string& exam_dir);

std::string detections_to_json(const InferenceResult& result);

// Decodes one branch of a model output pair into detections on the map grid.
std::vector<decode::DetectedKeypoint> decode_branch(const std::vector<float>& heatmap,
                                                    const std::vector<float>& offset, int h,
                                                    int w, int radius_px, int k);

}  // namespace spineone::pipeline
