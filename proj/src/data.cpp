#include "spineone/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "nlohmann/json.hpp"
#include "spineone/png_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace spineone::data {

namespace {

constexpr std::array<const char*, 10> kStructureNames = {
    "D1", "D2", "D3", "D4", "D5", "V1", "V2", "V3", "V4", "V5"};

std::string slice_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "slice_%03d.png", i);
  return buf;
}

}  // namespace

const char* structure_name(StructureId s) { return kStructureNames[static_cast<int>(s)]; }

std::optional<StructureId> parse_structure(const std::string& name) {
  for (int i = 0; i < 10; ++i)
    if (name == kStructureNames[i]) return static_cast<StructureId>(i);
  return std::nullopt;
}

const char* label_name(DegLabel l) { return l == DegLabel::Normal ? "Normal" : "Degenerative"; }

std::optional<DegLabel> parse_label(const std::string& name) {
  if (name == "Normal") return DegLabel::Normal;
  if (name == "Degenerative") return DegLabel::Degenerative;
  return std::nullopt;
}

const KeypointAnnotation& ExamAnnotation::at(StructureId s) const {
  for (const auto& kp : keypoints)
    if (kp.structure == s) return kp;
  fail(Err::BadAnnotationCount, "structure missing from annotation");
}

void validate(const ExamRecord& exam) {
  require(exam.n_total() >= 7, Err::BadMetadata,
          exam.exam_id + ": expected at least 7 slices, got " + std::to_string(exam.n_total()));
  require(exam.middle_index >= 0 && exam.middle_index < exam.n_total(), Err::BadMetadata,
          exam.exam_id + ": middle_index out of range");
  require(exam.spacing_row > 0 && exam.spacing_col > 0, Err::MissingSpacing,
          exam.exam_id + ": pixel spacing must be positive");
  require(exam.slice_interval > 0, Err::BadMetadata, exam.exam_id + ": bad slice_interval");
  require(exam.height() > 0 && exam.width() > 0, Err::BadMetadata, exam.exam_id + ": empty slices");
}

void validate(const ExamAnnotation& ann, int h, int w) {
  require(ann.keypoints.size() == 10, Err::BadAnnotationCount,
          ann.exam_id + ": expected 10 keypoints, got " + std::to_string(ann.keypoints.size()));
  std::array<int, 10> seen{};
  for (const auto& kp : ann.keypoints) {
    const int idx = static_cast<int>(kp.structure);
    require(seen[idx] == 0, Err::DuplicateStructure,
            ann.exam_id + ": duplicate structure " + structure_name(kp.structure));
    seen[idx] = 1;
    if (kp.valid) {
      require(kp.row >= 0 && kp.row <= h - 1 && kp.col >= 0 && kp.col <= w - 1, Err::BadMetadata,
              ann.exam_id + ": keypoint outside slice bounds");
    }
  }
  // Anatomical ordering, top to bottom within each group.
  for (int g = 0; g < 2; ++g) {
    for (int i = 1; i < 5; ++i) {
      const auto& prev = ann.at(static_cast<StructureId>(g * 5 + i - 1));
      const auto& cur = ann.at(static_cast<StructureId>(g * 5 + i));
      require(cur.row > prev.row, Err::BadMetadata,
              ann.exam_id + ": rows not strictly increasing at " + structure_name(cur.structure));
    }
  }
}

std::pair<ExamRecord, ExamAnnotation> load_exam(const std::string& dir) {
  const fs::path root(dir);
  require(fs::is_directory(root), Err::IoError, dir + " is not a directory");

  json meta;
  {
    std::ifstream in(root / "meta.json");
    require(in.good(), Err::IoError, dir + ": missing meta.json");
    try {
      in >> meta;
    } catch (const json::exception& e) {
      fail(Err::BadMetadata, dir + ": unparsable meta.json: " + e.what());
    }
  }
  require(meta.contains("pixel_spacing"), Err::MissingSpacing, dir + ": meta lacks pixel_spacing");

  ExamRecord exam;
  exam.exam_id = root.filename().string();
  if (exam.exam_id.rfind("exam_", 0) == 0) exam.exam_id = exam.exam_id.substr(5);
  try {
    exam.spacing_row = meta["pixel_spacing"].at(0).get<double>();
    exam.spacing_col = meta["pixel_spacing"].at(1).get<double>();
    exam.slice_interval = meta.at("slice_interval").get<double>();
    exam.middle_index = meta.at("middle_index").get<int>();
  } catch (const json::exception& e) {
    fail(Err::BadMetadata, dir + ": bad meta.json: " + e.what());
  }

  std::vector<std::string> names;
  for (const auto& ent : fs::directory_iterator(root)) {
    const std::string n = ent.path().filename().string();
    if (n.rfind("slice_", 0) == 0 && n.size() > 4 && n.substr(n.size() - 4) == ".png")
      names.push_back(n);
  }
  std::sort(names.begin(), names.end());
  require(!names.empty(), Err::CorruptSlice, dir + ": no slice files");

  for (size_t i = 0; i < names.size(); ++i) {
    Gray16Image img = read_png_gray16((root / names[i]).string());
    if (i == 0) {
      exam.slices = Stack(static_cast<int>(names.size()), img.h, img.w);
    } else {
      require(img.h == exam.height() && img.w == exam.width(), Err::CorruptSlice,
              dir + ": slice size mismatch in " + names[i]);
    }
    float* dst = exam.slices.plane(static_cast<int>(i));
    for (size_t k = 0; k < img.v.size(); ++k) dst[k] = static_cast<float>(img.v[k]);
  }

  ExamAnnotation ann;
  ann.exam_id = exam.exam_id;
  {
    std::ifstream in(root / "annotation.json");
    require(in.good(), Err::IoError, dir + ": missing annotation.json");
    json a;
    try {
      in >> a;
      for (const auto& item : a.at("keypoints")) {
        KeypointAnnotation kp;
        const auto s = parse_structure(item.at("structure").get<std::string>());
        require(s.has_value(), Err::BadMetadata, dir + ": unknown structure name");
        kp.structure = *s;
        kp.row = item.at("row").get<double>();
        kp.col = item.at("col").get<double>();
        const auto l = parse_label(item.at("label").get<std::string>());
        require(l.has_value(), Err::BadMetadata, dir + ": unknown label");
        kp.label = *l;
        ann.keypoints.push_back(kp);
      }
    } catch (const json::exception& e) {
      fail(Err::BadMetadata, dir + ": bad annotation.json: " + e.what());
    }
  }

  validate(exam);
  validate(ann, exam.height(), exam.width());
  return {std::move(exam), std::move(ann)};
}

void save_exam(const std::string& dir, const ExamRecord& exam, const ExamAnnotation& ann) {
  const fs::path root(dir);
  fs::create_directories(root);

  Gray16Image img;
  img.h = exam.height();
  img.w = exam.width();
  img.v.resize(static_cast<size_t>(img.h) * img.w);
  for (int i = 0; i < exam.n_total(); ++i) {
    const float* src = exam.slices.plane(i);
    for (size_t k = 0; k < img.v.size(); ++k) {
      const float x = std::clamp(src[k], 0.0f, 65535.0f);
      img.v[k] = static_cast<uint16_t>(std::lround(x));
    }
    write_png_gray16((root / slice_name(i)).string(), img);
  }

  json meta;
  meta["pixel_spacing"] = {exam.spacing_row, exam.spacing_col};
  meta["slice_interval"] = exam.slice_interval;
  meta["middle_index"] = exam.middle_index;
  std::ofstream(root / "meta.json") << meta.dump(2) << "\n";

  json a;
  a["keypoints"] = json::array();
  for (const auto& kp : ann.keypoints) {
    a["keypoints"].push_back({{"structure", structure_name(kp.structure)},
                              {"row", kp.row},
                              {"col", kp.col},
                              {"label", label_name(kp.label)}});
  }
  std::ofstream(root / "annotation.json") << a.dump(2) << "\n";
}

Stack select_middle_slices(const ExamRecord& exam, int n) {
  require(n >= 1 && n % 2 == 1, Err::BadArgument, "slice count must be odd");
  require(n <= exam.n_total(), Err::BadArgument,
          "requested " + std::to_string(n) + " slices from a " + std::to_string(exam.n_total()) +
              "-slice exam");
  int lo = exam.middle_index - n / 2;
  lo = std::clamp(lo, 0, exam.n_total() - n);
  Stack out(n, exam.height(), exam.width());
  for (int i = 0; i < n; ++i) {
    const float* src = exam.slices.plane(lo + i);
    std::copy(src, src + static_cast<size_t>(out.h) * out.w, out.plane(i));
  }
  return out;
}

AlignResult align_spacing_and_resize(const Stack& slices, const ExamAnnotation& ann,
                                     double spacing_row, double spacing_col,
                                     double target_spacing, int canvas) {
  require(target_spacing > 0, Err::BadArgument, "target_spacing must be positive");
  require(spacing_row > 0 && spacing_col > 0, Err::MissingSpacing, "spacing must be positive");
  require(canvas > 0, Err::BadArgument, "canvas must be positive");

  const double fr = spacing_row / target_spacing;
  const double fc = spacing_col / target_spacing;
  const int new_h = static_cast<int>(std::lround(slices.h * fr));
  const int new_w = static_cast<int>(std::lround(slices.w * fc));
  require(new_h <= 2 * canvas && new_w <= 2 * canvas, Err::BadArgument,
          "resampled extent exceeds twice the canvas");

  GeomTransform t;
  t.row = {fr, (canvas - new_h) / 2.0};
  t.col = {fc, (canvas - new_w) / 2.0};

  AlignResult out;
  out.transform = t;
  out.slices = Stack(slices.n, canvas, canvas);
  if (t.identity() && slices.h == canvas && slices.w == canvas) {
    out.slices.v = slices.v;
  } else {
    warp_affine(slices, out.slices, t);
  }
  out.annotation = ann;
  for (auto& kp : out.annotation.keypoints) t.map(kp.row, kp.col, kp.row, kp.col);
  return out;
}

void validate(const AugmentationSpec& spec, int canvas) {
  require(spec.zoom_min >= 0.5 && spec.zoom_max <= 2.0 && spec.zoom_min <= spec.zoom_max,
          Err::BadArgument, "zoom range must lie within [0.5, 2.0]");
  require(spec.hflip_prob >= 0.0 && spec.hflip_prob <= 1.0, Err::BadArgument, "bad hflip_prob");
  require(spec.crop_size > 0 && spec.crop_size <= canvas, Err::BadArgument,
          "crop_size must not exceed the canvas");
}

AugmentResult apply_augmentation(const Stack& slices, const ExamAnnotation& ann,
                                 const AugmentationSpec& spec) {
  validate(spec, std::min(slices.h, slices.w));

  std::mt19937_64 rng(spec.rng_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const bool flip = unit(rng) < spec.hflip_prob;
  const double zoom = spec.zoom_min + (spec.zoom_max - spec.zoom_min) * unit(rng);
  const int max_r = slices.h - spec.crop_size;
  const int max_c = slices.w - spec.crop_size;
  const int off_r = max_r > 0 ? static_cast<int>(rng() % static_cast<uint64_t>(max_r + 1)) : 0;
  const int off_c = max_c > 0 ? static_cast<int>(rng() % static_cast<uint64_t>(max_c + 1)) : 0;

  // flip about the column center, zoom about the canvas center, then crop.
  const double mr = (slices.h - 1) / 2.0;
  const double mc = (slices.w - 1) / 2.0;
  GeomTransform t;
  t.row = {zoom, mr - zoom * mr - off_r};
  if (flip) {
    // c -> W-1-c followed by the zoom/crop column map
    t.col = {-zoom, mc + zoom * (slices.w - 1 - mc) - off_c};
  } else {
    t.col = {zoom, mc - zoom * mc - off_c};
  }

  AugmentResult out;
  out.transform = t;
  out.slices = Stack(slices.n, spec.crop_size, spec.crop_size);
  warp_affine(slices, out.slices, t);
  out.annotation = ann;
  for (auto& kp : out.annotation.keypoints) {
    t.map(kp.row, kp.col, kp.row, kp.col);
    if (kp.row < 0 || kp.row > spec.crop_size - 1 || kp.col < 0 || kp.col > spec.crop_size - 1)
      kp.valid = false;
  }
  return out;
}

std::pair<std::vector<std::string>, std::vector<std::string>> split_dataset(
    const std::vector<std::string>& ids, double train_fraction, uint64_t rng_seed) {
  require(!ids.empty(), Err::EmptyDataset, "split_dataset: no ids");
  require(train_fraction > 0.0 && train_fraction < 1.0, Err::BadArgument,
          "train_fraction must be in (0, 1)");

  std::vector<std::string> shuffled = ids;
  std::mt19937_64 rng(rng_seed);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);

  const auto n = static_cast<long>(shuffled.size());
  long n_train = std::lround(train_fraction * static_cast<double>(n));
  if (n >= 2) n_train = std::clamp(n_train, 1L, n - 1);  // both sides non-empty
  else n_train = 1;

  std::vector<std::string> train(shuffled.begin(), shuffled.begin() + n_train);
  std::vector<std::string> test(shuffled.begin() + n_train, shuffled.end());
  return {std::move(train), std::move(test)};
}

std::vector<std::string> list_exam_dirs(const std::string& dataset_dir) {
  std::vector<std::string> dirs;
  require(fs::is_directory(dataset_dir), Err::IoError, dataset_dir + " is not a directory");
  for (const auto& ent : fs::directory_iterator(dataset_dir)) {
    if (ent.is_directory() && ent.path().filename().string().rfind("exam_", 0) == 0)
      dirs.push_back(ent.path().string());
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

}  // namespace spineone::data
