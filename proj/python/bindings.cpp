#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "spineone/config.hpp"
#include "spineone/phantom.hpp"
#include "spineone/pipeline.hpp"

namespace py = pybind11;
using namespace spineone;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

// (C, H, W) array -> flat vector plus dims.
std::vector<float> flatten_chw(const FloatArray& a, int& c, int& h, int& w) {
  require(a.ndim() == 3, Err::BadArgument, "expected a (C, H, W) array");
  c = static_cast<int>(a.shape(0));
  h = static_cast<int>(a.shape(1));
  w = static_cast<int>(a.shape(2));
  const float* p = a.data();
  return std::vector<float>(p, p + a.size());
}

py::array_t<float> make_chw(const std::vector<float>& v, int c, int h, int w) {
  py::array_t<float> out({c, h, w});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::dict encode_targets_py(const std::vector<std::tuple<double, double, int>>& keypoints,
                           int radius_px, int num_classes, int h, int w) {
  std::vector<targets::EncodedKeypoint> kps;
  for (const auto& [row, col, cls] : keypoints) kps.push_back({row, col, cls});
  const targets::EncodingSpec spec{radius_px, num_classes, h, w};
  const auto heat = targets::encode_heatmap(kps, spec);
  const auto off = targets::encode_offset(kps, spec);

  py::array_t<uint8_t> mask({num_classes, h, w});
  for (py::ssize_t i = 0; i < mask.size(); ++i)
    mask.mutable_data()[i] = off.mask[i] ? 1 : 0;
  py::dict out;
  out["heatmap"] = make_chw(heat.values, num_classes, h, w);
  out["offset"] = make_chw(off.values, 2 * num_classes, h, w);
  out["mask"] = mask;
  return out;
}

py::array_t<double> hough_vote_py(const FloatArray& heatmap, const FloatArray& offset,
                                  int radius_px) {
  int c, h, w, oc, oh, ow;
  const auto heat_v = flatten_chw(heatmap, c, h, w);
  const auto off_v = flatten_chw(offset, oc, oh, ow);
  require(oc == 2 * c && oh == h && ow == w, Err::ShapeMismatch,
          "offset must be (2C, H, W) for a (C, H, W) heatmap");
  const auto scores = decode::hough_vote(heat_v, off_v, c, h, w, radius_px);
  py::array_t<double> out({c, h, w});
  std::copy(scores.scores.begin(), scores.scores.end(), out.mutable_data());
  return out;
}

std::vector<std::tuple<double, double, int, double>> select_top_py(const DoubleArray& scores,
                                                                   int k,
                                                                   double suppression_px) {
  require(scores.ndim() == 3, Err::BadArgument, "expected a (C, H, W) score array");
  decode::HoughScoreMap map;
  map.channels = static_cast<int>(scores.shape(0));
  map.h = static_cast<int>(scores.shape(1));
  map.w = static_cast<int>(scores.shape(2));
  map.scores.assign(scores.data(), scores.data() + scores.size());
  std::vector<std::tuple<double, double, int, double>> out;
  for (const auto& d : decode::select_top_keypoints(map, k, suppression_px))
    out.emplace_back(d.row, d.col, static_cast<int>(d.label), d.score);
  return out;
}

double focal_loss_py(const FloatArray& pred, const FloatArray& target, double gamma) {
  int c, h, w, tc, th, tw;
  const auto pred_v = flatten_chw(pred, c, h, w);
  targets::HeatmapTarget tgt;
  tgt.values = flatten_chw(target, tc, th, tw);
  tgt.channels = tc;
  tgt.h = th;
  tgt.w = tw;
  require(tc == c && th == h && tw == w, Err::ShapeMismatch,
          "prediction and target shapes differ");
  return objectives::focal_loss(pred_v, tgt, gamma);
}

py::tuple phantom_exam_py(uint64_t seed, int index, int image_size,
                          double degenerative_rate, double jitter) {
  data::PhantomSpec spec;
  spec.rng_seed = seed;
  spec.image_size = image_size;
  spec.degenerative_rate = degenerative_rate;
  spec.jitter = jitter;
  const auto [exam, ann] = data::generate_phantom_exam(spec, index);
  py::array_t<float> slices({exam.n_total(), exam.height(), exam.width()});
  std::copy(exam.slices.v.begin(), exam.slices.v.end(), slices.mutable_data());
  py::list keypoints;
  for (const auto& kp : ann.keypoints) {
    py::dict d;
    d["structure"] = data::structure_name(kp.structure);
    d["row"] = kp.row;
    d["col"] = kp.col;
    d["label"] = data::label_name(kp.label);
    keypoints.append(d);
  }
  py::dict meta;
  meta["exam_id"] = exam.exam_id;
  meta["spacing_row"] = exam.spacing_row;
  meta["spacing_col"] = exam.spacing_col;
  meta["slice_interval"] = exam.slice_interval;
  meta["middle_index"] = exam.middle_index;
  return py::make_tuple(slices, keypoints, meta);
}

std::vector<std::string> write_phantoms_py(const std::string& out_dir, int count,
                                           uint64_t seed, int image_size,
                                           double degenerative_rate, double jitter) {
  data::PhantomSpec spec;
  spec.count = count;
  spec.rng_seed = seed;
  spec.image_size = image_size;
  spec.degenerative_rate = degenerative_rate;
  spec.jitter = jitter;
  return data::write_phantom_dataset(spec, out_dir);
}

py::dict train_py(const std::string& config_path) {
  const auto cfg = pipeline::load_config(config_path);
  const auto res = pipeline::train(cfg);
  py::dict out;
  out["last_checkpoint"] = res.last_checkpoint;
  out["best_checkpoint"] = res.best_checkpoint;
  out["best_val_macro_f1"] = res.best_val_macro_f1;
  out["last_val_macro_f1"] = res.last_val_macro_f1;
  out["epochs_run"] = res.epochs_run;
  out["wall_seconds"] = res.wall_seconds;
  return out;
}

std::string evaluate_py(const std::string& checkpoint, const std::string& data_dir,
                        const std::string& config_path, const std::string& profile) {
  auto cfg = config_path.empty() ? pipeline::default_config(profile)
                                 : pipeline::load_config(config_path);
  pipeline::validate(cfg);
  auto [model, meta] = nn::load_checkpoint(checkpoint);
  const auto dirs = data::list_exam_dirs(data_dir);
  require(!dirs.empty(), Err::EmptyDataset, data_dir + " holds no exam_* directories");
  std::vector<double> thresholds;
  for (int t = 1; t <= 10; ++t) thresholds.push_back(t);
  return metrics::report_to_json(pipeline::evaluate_dirs(*model, cfg, dirs, thresholds));
}

std::string infer_py(const std::string& checkpoint, const std::string& exam_dir,
                     const std::string& config_path, const std::string& profile) {
  auto cfg = config_path.empty() ? pipeline::default_config(profile)
                                 : pipeline::load_config(config_path);
  pipeline::validate(cfg);
  auto [model, meta] = nn::load_checkpoint(checkpoint);
  return pipeline::detections_to_json(pipeline::infer_exam(*model, cfg, exam_dir));
}

}  // namespace

PYBIND11_MODULE(_spineone, m) {
  m.doc() = "One-stage spine keypoint localization and classification";
  m.attr("__version__") = "0.1.0";

  m.def("encode_targets", &encode_targets_py, py::arg("keypoints"), py::arg("radius_px"),
        py::arg("num_classes"), py::arg("height"), py::arg("width"),
        "Encode (row, col, class) keypoints into heatmap/offset/mask arrays.");
  m.def("hough_vote", &hough_vote_py, py::arg("heatmap"), py::arg("offset"),
        py::arg("radius_px"),
        "Accumulate offset-corrected heatmap votes into per-class score maps.");
  m.def("select_top_keypoints", &select_top_py, py::arg("scores"), py::arg("k"),
        py::arg("suppression_px"),
        "Greedy top-k peaks as (row, col, label, score) tuples.");
  m.def("focal_loss", &focal_loss_py, py::arg("pred"), py::arg("target"),
        py::arg("gamma") = 2.0, "Focal loss over a binary heatmap, sum / #positives.");
  m.def("pck", py::overload_cast<long, long, long>(&metrics::pck), py::arg("tp"),
        py::arg("fp"), py::arg("fn"), "(TP+FP) / (TP+FP+FN), 0 on an empty denominator.");
  m.def("micro_ap_score", &metrics::micro_ap_score, py::arg("tp"), py::arg("fp"));

  m.def("phantom_exam", &phantom_exam_py, py::arg("seed"), py::arg("index") = 0,
        py::arg("image_size") = 160, py::arg("degenerative_rate") = 0.35,
        py::arg("jitter") = 1.0,
        "Generate one phantom exam as (slices, keypoints, meta).");
  m.def("write_phantom_dataset", &write_phantoms_py, py::arg("out_dir"), py::arg("count"),
        py::arg("seed") = 0, py::arg("image_size") = 160,
        py::arg("degenerative_rate") = 0.35, py::arg("jitter") = 1.0,
        "Write a phantom dataset of exam_* directories; returns their paths.");

  m.def("default_config", [](const std::string& profile) {
    return pipeline::config_to_json(pipeline::default_config(profile));
  }, py::arg("profile") = "desk", "Profile defaults as a JSON string.");
  m.def("config_hash", [](const std::string& config_path) {
    return pipeline::config_hash(pipeline::load_config(config_path));
  }, py::arg("config_path"));
  m.def("train", &train_py, py::arg("config_path"),
        "Train per a JSON config file; returns checkpoint paths and stats.");
  m.def("evaluate", &evaluate_py, py::arg("checkpoint"), py::arg("data_dir"),
        py::arg("config_path") = "", py::arg("profile") = "desk",
        "Evaluate a checkpoint over a dataset; returns the report as JSON.");
  m.def("infer", &infer_py, py::arg("checkpoint"), py::arg("exam_dir"),
        py::arg("config_path") = "", py::arg("profile") = "desk",
        "Detections for one exam as JSON, positions in original pixel coordinates.");

  py::register_exception<Error>(m, "SpineOneError");
}
