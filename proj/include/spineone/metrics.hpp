#pragma once

#include <array>
#include <string>
#include <vector>

#include "spineone/decode.hpp"

namespace spineone::metrics {

using decode::Branch;
using decode::DetectedKeypoint;

struct GroundTruthKeypoint {
  double row = 0, col = 0;
  data::DegLabel label = data::DegLabel::Normal;
};

struct MatchPair {
  int gt = -1, det = -1;
  double distance_mm = 0;
};

struct ClassCounts {
  long tp = 0, fp = 0, fn = 0;
  ClassCounts& operator+=(const ClassCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
};

// One exam+branch matching outcome.  Branch-level counts follow the keypoint
// protocol: TP = matched with the correct label, FP = matched with the wrong
// label, FN = unmatched ground truth.  Per-class counts additionally charge a
// misclassified match as FP against the predicted class and FN against the
// true class.
struct MatchResult {
  std::vector<MatchPair> pairs;
  std::vector<int> unmatched_gt;
  long tp = 0, fp = 0, fn = 0;
  std::array<ClassCounts, 2> per_class{};  // indexed by DegLabel
};

// Greedy one-to-one matching in ascending distance; pairs beyond threshold_mm
// are rejected.  Distances convert to millimeters via spacing_mm_per_px.
MatchResult match_detections(const std::vector<DetectedKeypoint>& detections,
                             const std::vector<GroundTruthKeypoint>& ground_truth,
                             double threshold_mm, double spacing_mm_per_px);

// PCK per the keypoint protocol: (TP+FP)/(TP+FP+FN), 0 on an empty
// denominator.  TP+FP counts every matched detection regardless of label.
double pck(long tp, long fp, long fn);
inline double pck(const MatchResult& m) { return pck(m.tp, m.fp, m.fn); }

struct ClassMetrics {
  double precision = 0, recall = 0, f1 = 0;
};

// Precision/recall/F1 with the 0-on-empty-denominator convention.
ClassMetrics classification_metrics(const ClassCounts& counts);

// Competition score: pooled TP/(TP+FP) over every class and branch.
double micro_ap_score(long total_tp, long total_fp);

// One evaluated exam branch, kept raw so curves can re-match per threshold.
struct ExamDetections {
  Branch branch = Branch::Disc;
  std::vector<DetectedKeypoint> detections;
  std::vector<GroundTruthKeypoint> ground_truth;
};

// PCK over the pooled dataset at each threshold (mm), non-decreasing.
std::vector<std::pair<double, double>> pck_curve(const std::vector<ExamDetections>& exams,
                                                 double spacing_mm_per_px,
                                                 const std::vector<double>& thresholds_mm);

struct BranchReport {
  double pck = 0;
  std::array<ClassCounts, 2> counts{};
  std::array<ClassMetrics, 2> per_class{};
  ClassMetrics macro{};  // unweighted mean over the two classes
  long tp = 0, fp = 0, fn = 0;
};

struct MetricsReport {
  double threshold_mm = 6.0;
  double spacing_mm_per_px = 0.4375;
  int num_exams = 0;
  BranchReport disc, vertebra, overall;
  double micro_ap = 0;
  std::vector<std::pair<double, double>> curve;
};

// Matches every exam at threshold_mm, aggregates counts per branch and
// overall, and evaluates the PCK curve at the given thresholds (may be empty).
MetricsReport build_report(const std::vector<ExamDetections>& exams, double threshold_mm,
                           double spacing_mm_per_px, const std::vector<double>& curve_thresholds);

std::string report_to_json(const MetricsReport& report);
std::string report_to_csv(const MetricsReport& report);

}  // namespace spineone::metrics
