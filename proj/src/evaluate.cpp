#include <chrono>
#include <cmath>

#include "nlohmann/json.hpp"
#include "spineone/pipeline.hpp"

namespace spineone::pipeline {

namespace {

using json = nlohmann::json;

// Copies one sample's branch maps out of a batched output tensor.
std::vector<float> sample_map(const nn::Tensor& t, int b) {
  const float* p = t.at(b, 0);
  return std::vector<float>(p, p + static_cast<size_t>(t.c) * t.plane());
}

}  // namespace

PreparedExam prepare_exam(const std::string& dir, const RunConfig& cfg) {
  auto [exam, ann] = data::load_exam(dir);
  Stack middle = data::select_middle_slices(exam, cfg.n_slices);
  data::AlignResult aligned = data::align_spacing_and_resize(
      middle, ann, exam.spacing_row, exam.spacing_col, cfg.spacing, cfg.canvas);
  normalize_stack(aligned.slices);

  PreparedExam out;
  out.exam_id = exam.exam_id;
  out.slices = std::move(aligned.slices);
  out.annotation = std::move(aligned.annotation);
  out.transform = aligned.transform;
  return out;
}

std::vector<decode::DetectedKeypoint> decode_branch(const std::vector<float>& heatmap,
                                                    const std::vector<float>& offset, int h,
                                                    int w, int radius_px, int k) {
  const auto votes = decode::hough_vote(heatmap, offset, 2, h, w, radius_px);
  return decode::select_top_keypoints(votes, k, radius_px);
}

metrics::MetricsReport evaluate_prepared(nn::SpineOneModel& model, const RunConfig& cfg,
                                         const std::vector<PreparedExam>& exams,
                                         const std::vector<double>& curve_thresholds) {
  require(!exams.empty(), Err::EmptyDataset, "no exams to evaluate");
  std::vector<metrics::ExamDetections> units;
  for (const auto& ex : exams) {
    nn::Tensor input(1, cfg.n_slices, ex.slices.h, ex.slices.w);
    std::copy(ex.slices.v.begin(), ex.slices.v.end(), input.v.begin());
    nn::ModelOutputs out = model.forward(input, false);
    for (bool disc : {true, false}) {
      metrics::ExamDetections unit;
      unit.branch = disc ? decode::Branch::Disc : decode::Branch::Vertebra;
      unit.detections = decode_branch(sample_map(disc ? out.disc_heatmap : out.vert_heatmap, 0),
                                      sample_map(disc ? out.disc_offset : out.vert_offset, 0),
                                      ex.slices.h, ex.slices.w, cfg.radius_px, 5);
      for (const auto& kp : ex.annotation.keypoints)
        if (data::is_disc(kp.structure) == disc)
          unit.ground_truth.push_back({kp.row, kp.col, kp.label});
      units.push_back(std::move(unit));
    }
  }
  return metrics::build_report(units, cfg.threshold_mm, cfg.spacing, curve_thresholds);
}

metrics::MetricsReport evaluate_dirs(nn::SpineOneModel& model, const RunConfig& cfg,
                                     const std::vector<std::string>& exam_dirs,
                                     const std::vector<double>& curve_thresholds) {
  require(!exam_dirs.empty(), Err::EmptyDataset, "no exam directories to evaluate");
  std::vector<PreparedExam> exams;
  for (const auto& d : exam_dirs) exams.push_back(prepare_exam(d, cfg));
  return evaluate_prepared(model, cfg, exams, curve_thresholds);
}

InferenceResult infer_exam(nn::SpineOneModel& model, const RunConfig& cfg,
                           const std::string& exam_dir) {
  PreparedExam ex = prepare_exam(exam_dir, cfg);

  const auto start = std::chrono::steady_clock::now();
  nn::Tensor input(1, cfg.n_slices, ex.slices.h, ex.slices.w);
  std::copy(ex.slices.v.begin(), ex.slices.v.end(), input.v.begin());
  nn::ModelOutputs out = model.forward(input, false);

  InferenceResult result;
  result.exam_id = ex.exam_id;
  for (bool disc : {true, false}) {
    const auto dets =
        decode_branch(sample_map(disc ? out.disc_heatmap : out.vert_heatmap, 0),
                      sample_map(disc ? out.disc_offset : out.vert_offset, 0), ex.slices.h,
                      ex.slices.w, cfg.radius_px, 5);
    for (const auto& d : dets) {
      InferredKeypoint kp;
      kp.branch = disc ? decode::Branch::Disc : decode::Branch::Vertebra;
      kp.canvas_row = d.row;
      kp.canvas_col = d.col;
      ex.transform.unmap(d.row, d.col, kp.row, kp.col);
      kp.label = d.label;
      kp.score = d.score;
      result.detections.push_back(kp);
    }
  }
  result.latency_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::string detections_to_json(const InferenceResult& result) {
  json dets = json::array();
  for (const auto& d : result.detections) {
    dets.push_back({{"branch", decode::branch_name(d.branch)},
                    {"row", d.row},
                    {"col", d.col},
                    {"canvas_row", d.canvas_row},
                    {"canvas_col", d.canvas_col},
                    {"label", data::label_name(d.label)},
                    {"score", d.score}});
  }
  json j;
  j["exam_id"] = result.exam_id;
  j["latency_seconds"] = result.latency_seconds;
  j["detections"] = dets;
  return j.dump(2) + "\n";
}

}  // namespace spineone::pipeline
