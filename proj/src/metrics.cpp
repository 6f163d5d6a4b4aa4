#include "spineone/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "nlohmann/json.hpp"

namespace spineone::metrics {

namespace {

using json = nlohmann::json;

json class_json(const ClassCounts& c, const ClassMetrics& m) {
  return {{"tp", c.tp},          {"fp", c.fp},       {"fn", c.fn},
          {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

json branch_json(const BranchReport& b) {
  json j;
  j["pck"] = b.pck;
  j["tp"] = b.tp;
  j["fp"] = b.fp;
  j["fn"] = b.fn;
  j["Normal"] = class_json(b.counts[0], b.per_class[0]);
  j["Degenerative"] = class_json(b.counts[1], b.per_class[1]);
  j["macro"] = {{"precision", b.macro.precision},
                {"recall", b.macro.recall},
                {"f1", b.macro.f1}};
  return j;
}

void finalize_branch(BranchReport& b) {
  b.pck = pck(b.tp, b.fp, b.fn);
  for (int c = 0; c < 2; ++c) b.per_class[c] = classification_metrics(b.counts[c]);
  b.macro.precision = (b.per_class[0].precision + b.per_class[1].precision) / 2.0;
  b.macro.recall = (b.per_class[0].recall + b.per_class[1].recall) / 2.0;
  b.macro.f1 = (b.per_class[0].f1 + b.per_class[1].f1) / 2.0;
}

void csv_row(std::string& out, const std::string& branch, const std::string& item, double v) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%s,%s,%.6f\n", branch.c_str(), item.c_str(), v);
  out += buf;
}

void csv_branch(std::string& out, const std::string& name, const BranchReport& b) {
  static const char* cls[2] = {"Normal", "Degenerative"};
  csv_row(out, name, "pck", b.pck);
  for (int c = 0; c < 2; ++c) {
    csv_row(out, name, std::string(cls[c]) + ".precision", b.per_class[c].precision);
    csv_row(out, name, std::string(cls[c]) + ".recall", b.per_class[c].recall);
    csv_row(out, name, std::string(cls[c]) + ".f1", b.per_class[c].f1);
  }
  csv_row(out, name, "macro.precision", b.macro.precision);
  csv_row(out, name, "macro.recall", b.macro.recall);
  csv_row(out, name, "macro.f1", b.macro.f1);
}

}  // namespace

MatchResult match_detections(const std::vector<DetectedKeypoint>& detections,
                             const std::vector<GroundTruthKeypoint>& ground_truth,
                             double threshold_mm, double spacing_mm_per_px) {
  require(threshold_mm >= 0, Err::BadArgument, "threshold must be non-negative");

  struct Cand {
    double dist;
    int gt, det;
  };
  std::vector<Cand> cands;
  for (size_t g = 0; g < ground_truth.size(); ++g) {
    for (size_t d = 0; d < detections.size(); ++d) {
      const double dr = ground_truth[g].row - detections[d].row;
      const double dc = ground_truth[g].col - detections[d].col;
      const double mm = decode::to_millimeters(std::sqrt(dr * dr + dc * dc), spacing_mm_per_px);
      if (mm <= threshold_mm)
        cands.push_back({mm, static_cast<int>(g), static_cast<int>(d)});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.gt != b.gt) return a.gt < b.gt;
    return a.det < b.det;
  });

  MatchResult out;
  std::vector<uint8_t> gt_used(ground_truth.size(), 0), det_used(detections.size(), 0);
  for (const auto& c : cands) {
    if (gt_used[c.gt] || det_used[c.det]) continue;
    gt_used[c.gt] = det_used[c.det] = 1;
    out.pairs.push_back({c.gt, c.det, c.dist});
    const auto truth = ground_truth[c.gt].label;
    const auto pred = detections[c.det].label;
    if (truth == pred) {
      ++out.tp;
      ++out.per_class[static_cast<int>(truth)].tp;
    } else {
      ++out.fp;
      ++out.per_class[static_cast<int>(pred)].fp;
      ++out.per_class[static_cast<int>(truth)].fn;
    }
  }
  for (size_t g = 0; g < ground_truth.size(); ++g) {
    if (!gt_used[g]) {
      out.unmatched_gt.push_back(static_cast<int>(g));
      ++out.fn;
      ++out.per_class[static_cast<int>(ground_truth[g].label)].fn;
    }
  }
  return out;
}

double pck(long tp, long fp, long fn) {
  const long denom = tp + fp + fn;
  return denom > 0 ? static_cast<double>(tp + fp) / static_cast<double>(denom) : 0.0;
}

ClassMetrics classification_metrics(const ClassCounts& c) {
  ClassMetrics m;
  if (c.tp + c.fp > 0) m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (m.precision + m.recall > 0)
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

double micro_ap_score(long total_tp, long total_fp) {
  const long denom = total_tp + total_fp;
  return denom > 0 ? static_cast<double>(total_tp) / static_cast<double>(denom) : 0.0;
}

std::vector<std::pair<double, double>> pck_curve(const std::vector<ExamDetections>& exams,
                                                 double spacing_mm_per_px,
                                                 const std::vector<double>& thresholds_mm) {
  std::vector<std::pair<double, double>> curve;
  for (double t : thresholds_mm) {
    long tp = 0, fp = 0, fn = 0;
    for (const auto& e : exams) {
      const auto m = match_detections(e.detections, e.ground_truth, t, spacing_mm_per_px);
      tp += m.tp;
      fp += m.fp;
      fn += m.fn;
    }
    curve.emplace_back(t, pck(tp, fp, fn));
  }
  return curve;
}

MetricsReport build_report(const std::vector<ExamDetections>& exams, double threshold_mm,
                           double spacing_mm_per_px,
                           const std::vector<double>& curve_thresholds) {
  MetricsReport rep;
  rep.threshold_mm = threshold_mm;
  rep.spacing_mm_per_px = spacing_mm_per_px;
  rep.num_exams = 0;
  for (const auto& e : exams) {
    if (e.branch == Branch::Disc) ++rep.num_exams;  // one disc entry per exam
    const auto m = match_detections(e.detections, e.ground_truth, threshold_mm,
                                    spacing_mm_per_px);
    for (BranchReport* b : {e.branch == Branch::Disc ? &rep.disc : &rep.vertebra,
                            &rep.overall}) {
      b->tp += m.tp;
      b->fp += m.fp;
      b->fn += m.fn;
      for (int c = 0; c < 2; ++c) b->counts[c] += m.per_class[c];
    }
  }
  finalize_branch(rep.disc);
  finalize_branch(rep.vertebra);
  finalize_branch(rep.overall);
  rep.micro_ap = micro_ap_score(rep.overall.tp, rep.overall.fp);
  rep.curve = pck_curve(exams, spacing_mm_per_px, curve_thresholds);
  return rep;
}

std::string report_to_json(const MetricsReport& rep) {
  json j;
  j["threshold_mm"] = rep.threshold_mm;
  j["spacing_mm_per_px"] = rep.spacing_mm_per_px;
  j["num_exams"] = rep.num_exams;
  j["disc"] = branch_json(rep.disc);
  j["vertebra"] = branch_json(rep.vertebra);
  j["overall"] = branch_json(rep.overall);
  j["micro_ap"] = rep.micro_ap;
  json curve = json::array();
  for (const auto& [t, p] : rep.curve) curve.push_back({{"threshold_mm", t}, {"pck", p}});
  j["pck_curve"] = curve;
  return j.dump(2) + "\n";
}

std::string report_to_csv(const MetricsReport& rep) {
  std::string out = "branch,item,value\n";
  csv_branch(out, "disc", rep.disc);
  csv_branch(out, "vertebra", rep.vertebra);
  csv_branch(out, "overall", rep.overall);
  csv_row(out, "overall", "micro_ap", rep.micro_ap);
  for (const auto& [t, p] : rep.curve) {
    char item[64];
    std::snprintf(item, sizeof(item), "pck@%gmm", t);
    csv_row(out, "curve", item, p);
  }
  return out;
}

}  // namespace spineone::metrics
