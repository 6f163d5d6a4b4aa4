#include "spineone/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "nlohmann/json.hpp"

namespace spineone::nn {

namespace {

using json = nlohmann::json;

// Prior-probability bias for the final heatmap convolution so training does
// not start swamped by easy negatives.
constexpr float kHeatmapBiasInit = -4.59512f;  // -ln((1-p)/p), p = 0.01

double gaussian(std::mt19937_64& rng) {
  // Box-Muller on explicit uniforms keeps initialization byte-reproducible
  // across standard libraries.
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double u1 = unit(rng);
  while (u1 <= 1e-300) u1 = unit(rng);
  const double u2 = unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

void scale_offset_axes(Tensor& t, float row_scale, float col_scale) {
  for (int b = 0; b < t.n; ++b) {
    for (int ch = 0; ch < t.c; ++ch) {
      const float s = (ch % 2 == 0) ? row_scale : col_scale;
      float* p = t.at(b, ch);
      for (size_t i = 0; i < t.plane(); ++i) p[i] *= s;
    }
  }
}

void add_into(Tensor& acc, const Tensor& x) {
  require(acc.same_shape(x), Err::ShapeMismatch, "gradient accumulation shape mismatch");
  for (size_t i = 0; i < acc.size(); ++i) acc.v[i] += x.v[i];
}

}  // namespace

BackboneSpec reference_backbone_spec(int in_channels) {
  BackboneSpec s;
  s.name = "reference_unet";
  s.in_channels = in_channels;
  return s;
}

BackboneSpec tiny_backbone_spec(int in_channels) {
  BackboneSpec s;
  s.name = "tiny";
  s.in_channels = in_channels;
  s.stem_channels = 8;
  s.stage_channels = {16, 32};
  s.feature_channels = 16;
  s.att_size = 24;
  s.head_mid = 16;
  s.min_input = 64;
  return s;
}

void validate(const BackboneSpec& spec) {
  require(spec.in_channels > 0, Err::BadArgument, "in_channels must be positive");
  require(!spec.stage_channels.empty(), Err::BadArgument, "backbone needs stages");
  require(spec.feature_channels == spec.stage_channels.front(), Err::BadArgument,
          "feature_channels must equal the first stage width");
  require(spec.att_size > 0 && spec.head_mid > 0 && spec.stem_channels > 0, Err::BadArgument,
          "bad backbone dimensions");
  require(spec.min_input >= (1 << (1 + static_cast<int>(spec.stage_channels.size()))),
          Err::BadArgument, "min_input too small for the stride chain");
  require(spec.pam_reduction > 0, Err::BadArgument, "bad pam_reduction");
}

Backbone::Backbone(const BackboneSpec& spec)
    : spec_(spec), stem_("backbone.stem", spec.in_channels, spec.stem_channels, 3, 2, 1) {
  validate(spec);
  const auto& st = spec.stage_channels;
  int prev = spec.stem_channels;
  for (size_t i = 0; i < st.size(); ++i) {
    stages_.emplace_back("backbone.stage" + std::to_string(i), prev, st[i], 2);
    prev = st[i];
  }
  const int k = static_cast<int>(st.size());
  int deep = st[k - 1];
  for (int l = k - 2; l >= 0; --l) {
    merge_up_.emplace_back();
    merge_conv_.emplace_back("backbone.dec" + std::to_string(l), deep + st[l], st[l], 3, 1, 1);
    merge_in_c_.push_back(deep);
    deep = st[l];
  }
  skip_h_.resize(k);
  skip_w_.resize(k);
}

Tensor Backbone::forward(const Tensor& x, bool train) {
  const int k = static_cast<int>(stages_.size());
  std::vector<Tensor> skips(k);
  Tensor t = stem_.forward(x, train);
  for (int i = 0; i < k; ++i) {
    t = stages_[i].forward(t, train);
    skip_h_[i] = t.h;
    skip_w_[i] = t.w;
    if (i < k - 1) skips[i] = t;  // the deepest stage feeds only the decoder
  }
  for (size_t m = 0; m < merge_up_.size(); ++m) {
    const int l = k - 2 - static_cast<int>(m);
    Tensor up = merge_up_[m].forward(t, skip_h_[l], skip_w_[l], 1.0, train);
    t = merge_conv_[m].forward(concat_channels(up, skips[l]), train);
  }
  return final_resize_.forward(t, spec_.att_size, spec_.att_size, 1.0, train);
}

Tensor Backbone::backward(const Tensor& dy) {
  const int k = static_cast<int>(stages_.size());
  Tensor dd = final_resize_.backward(dy);
  std::vector<Tensor> dskip(k);
  for (int m = static_cast<int>(merge_up_.size()) - 1; m >= 0; --m) {
    const int l = k - 2 - m;
    Tensor dcat = merge_conv_[m].backward(dd);
    auto [dup, dsk] = split_channels(dcat, merge_in_c_[m]);
    dskip[l] = std::move(dsk);
    dd = merge_up_[m].backward(dup);
  }
  for (int i = k - 1; i >= 0; --i) {
    Tensor din = stages_[i].backward(dd);
    if (i > 0) {
      dd = std::move(din);
      add_into(dd, dskip[i - 1]);
    } else {
      dd = std::move(din);
    }
  }
  return stem_.backward(dd);
}

void Backbone::collect_params(std::vector<Param*>& out) {
  stem_.collect_params(out);
  for (auto& s : stages_) s.collect_params(out);
  for (auto& c : merge_conv_) c.collect_params(out);
}

HeadStack::HeadStack(const std::string& name, int in_c, int mid, int out_c, bool sigmoid_out)
    : sigmoid_out_(sigmoid_out),
      cbr1_(name + ".block1", in_c, mid, 3, 1, 1),
      cbr2_(name + ".block2", mid, mid, 3, 1, 1),
      final_(name + ".out", mid, out_c, 1, 1, 0) {}

Tensor HeadStack::forward(const Tensor& x, int out_h, int out_w, double value_scale,
                          bool train) {
  Tensor z = final_.forward(cbr2_.forward(cbr1_.forward(x, train), train), train);
  if (sigmoid_out_) z = sigmoid_.forward(z, train);
  return up_.forward(z, out_h, out_w, value_scale, train);
}

Tensor HeadStack::backward(const Tensor& dy) {
  Tensor dz = up_.backward(dy);
  if (sigmoid_out_) dz = sigmoid_.backward(dz);
  return cbr1_.backward(cbr2_.backward(final_.backward(dz)));
}

void HeadStack::collect_params(std::vector<Param*>& out) {
  cbr1_.collect_params(out);
  cbr2_.collect_params(out);
  final_.collect_params(out);
}

SpineOneModel::SpineOneModel(const BackboneSpec& spec, uint64_t init_seed)
    : spec_(spec),
      backbone_(spec),
      disc_att_("disc_att", spec.feature_channels, spec.pam_reduction),
      vert_att_("vert_att", spec.feature_channels, spec.pam_reduction),
      disc_heat_("disc_heat", spec.feature_channels, spec.head_mid, 2, true),
      disc_off_("disc_offset", spec.feature_channels, spec.head_mid, 4, false),
      vert_heat_("vert_heat", spec.feature_channels, spec.head_mid, 2, true),
      vert_off_("vert_offset", spec.feature_channels, spec.head_mid, 4, false) {
  for (Param* p : trainable_params()) {
    if (p->shape.size() == 4) {  // conv kernels: He-normal, keyed by name
      std::mt19937_64 rng(mix64(init_seed, fnv1a64(p->name)));
      const double fan_in =
          static_cast<double>(p->shape[1]) * p->shape[2] * p->shape[3];
      const double std_dev = std::sqrt(2.0 / fan_in);
      for (auto& v : p->value) v = static_cast<float>(std_dev * gaussian(rng));
    }
  }
  for (HeadStack* h : {&disc_heat_, &vert_heat_}) {
    auto& b = h->final_conv().bias.value;
    std::fill(b.begin(), b.end(), kHeatmapBiasInit);
  }
}

ModelOutputs SpineOneModel::forward(const Tensor& input, bool train) {
  require(input.c == spec_.in_channels, Err::ShapeMismatch,
          "model expects " + std::to_string(spec_.in_channels) + " input channels");
  require(input.h >= spec_.min_input && input.w >= spec_.min_input, Err::TooSmall,
          "input " + input.shape_str() + " below minimum size " +
              std::to_string(spec_.min_input));

  const float rs = static_cast<float>(input.h) / spec_.att_size;
  const float cs = static_cast<float>(input.w) / spec_.att_size;
  Tensor u = backbone_.forward(input, train);
  Tensor ud = spec_.attention ? disc_att_.forward(u, train) : u;
  Tensor uv = spec_.attention ? vert_att_.forward(u, train) : u;

  ModelOutputs out;
  out.disc_heatmap = disc_heat_.forward(ud, input.h, input.w, 1.0, train);
  out.disc_offset = disc_off_.forward(ud, input.h, input.w, 1.0, train);
  scale_offset_axes(out.disc_offset, rs, cs);
  out.vert_heatmap = vert_heat_.forward(uv, input.h, input.w, 1.0, train);
  out.vert_offset = vert_off_.forward(uv, input.h, input.w, 1.0, train);
  scale_offset_axes(out.vert_offset, rs, cs);
  return out;
}

void SpineOneModel::backward(const OutputGrads& grads) {
  const float rs = static_cast<float>(grads.disc_heatmap.h) / spec_.att_size;
  const float cs = static_cast<float>(grads.disc_heatmap.w) / spec_.att_size;

  Tensor gdo = grads.disc_offset;
  scale_offset_axes(gdo, rs, cs);
  Tensor d_ud = disc_heat_.backward(grads.disc_heatmap);
  add_into(d_ud, disc_off_.backward(gdo));

  Tensor gvo = grads.vert_offset;
  scale_offset_axes(gvo, rs, cs);
  Tensor d_uv = vert_heat_.backward(grads.vert_heatmap);
  add_into(d_uv, vert_off_.backward(gvo));

  Tensor du = spec_.attention ? disc_att_.backward(d_ud) : std::move(d_ud);
  add_into(du, spec_.attention ? vert_att_.backward(d_uv) : d_uv);
  backbone_.backward(du);
}

void SpineOneModel::zero_grad() {
  for (Param* p : params()) std::fill(p->grad.begin(), p->grad.end(), 0.0f);
}

std::vector<Param*> SpineOneModel::params() {
  std::vector<Param*> out;
  backbone_.collect_params(out);
  if (spec_.attention) {
    disc_att_.collect_params(out);
    vert_att_.collect_params(out);
  }
  disc_heat_.collect_params(out);
  disc_off_.collect_params(out);
  vert_heat_.collect_params(out);
  vert_off_.collect_params(out);
  return out;
}

std::vector<Param*> SpineOneModel::trainable_params() {
  std::vector<Param*> out;
  for (Param* p : params())
    if (p->trainable) out.push_back(p);
  return out;
}

size_t SpineOneModel::param_count(const std::string& name_prefix) const {
  size_t count = 0;
  for (Param* p : const_cast<SpineOneModel*>(this)->params())
    if (p->trainable && p->name.rfind(name_prefix, 0) == 0) count += p->value.size();
  return count;
}

namespace {

json spec_to_json(const BackboneSpec& s) {
  return {{"name", s.name},
          {"in_channels", s.in_channels},
          {"stem_channels", s.stem_channels},
          {"stage_channels", s.stage_channels},
          {"feature_channels", s.feature_channels},
          {"att_size", s.att_size},
          {"head_mid", s.head_mid},
          {"min_input", s.min_input},
          {"pam_reduction", s.pam_reduction},
          {"attention", s.attention}};
}

BackboneSpec spec_from_json(const json& j) {
  BackboneSpec s;
  s.name = j.at("name").get<std::string>();
  s.in_channels = j.at("in_channels").get<int>();
  s.stem_channels = j.at("stem_channels").get<int>();
  s.stage_channels = j.at("stage_channels").get<std::vector<int>>();
  s.feature_channels = j.at("feature_channels").get<int>();
  s.att_size = j.at("att_size").get<int>();
  s.head_mid = j.at("head_mid").get<int>();
  s.min_input = j.at("min_input").get<int>();
  s.pam_reduction = j.at("pam_reduction").get<int>();
  s.attention = j.value("attention", true);
  return s;
}

constexpr char kMagic[4] = {'S', 'P', 'K', '1'};

template <typename T>
void write_pod(std::ofstream& f, const T& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& f) {
  T v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

void save_checkpoint(SpineOneModel& model, const std::string& path,
                     const CheckpointMeta& meta) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(f.good(), Err::IoError, "cannot write checkpoint " + path);
  f.write(kMagic, 4);
  write_pod<uint32_t>(f, 1);  // format version
  const auto params = model.params();
  write_pod<uint32_t>(f, static_cast<uint32_t>(params.size()));
  for (const Param* p : params) {
    write_pod<uint32_t>(f, static_cast<uint32_t>(p->name.size()));
    f.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    write_pod<uint64_t>(f, p->value.size());
    f.write(reinterpret_cast<const char*>(p->value.data()),
            static_cast<std::streamsize>(p->value.size() * sizeof(float)));
  }
  require(f.good(), Err::IoError, "short write on checkpoint " + path);
  f.close();

  json j;
  j["format_version"] = meta.format_version;
  j["epoch"] = meta.epoch;
  j["config_hash"] = meta.config_hash;
  j["backbone"] = spec_to_json(model.spec());
  if (!meta.metrics_json.empty())
    j["metrics"] = json::parse(meta.metrics_json);
  std::ofstream side(path + ".json", std::ios::trunc);
  require(side.good(), Err::IoError, "cannot write checkpoint sidecar for " + path);
  side << j.dump(2) << "\n";
}

std::pair<std::unique_ptr<SpineOneModel>, CheckpointMeta> load_checkpoint(
    const std::string& path) {
  std::ifstream side(path + ".json");
  require(side.good(), Err::IoError, "missing checkpoint sidecar " + path + ".json");
  json j;
  try {
    side >> j;
  } catch (const json::exception& e) {
    fail(Err::BadMetadata, "unparsable checkpoint sidecar: " + std::string(e.what()));
  }
  CheckpointMeta meta;
  meta.format_version = j.at("format_version").get<int>();
  require(meta.format_version == 1, Err::ConfigMismatch, "unsupported checkpoint version");
  meta.epoch = j.at("epoch").get<int>();
  meta.config_hash = j.value("config_hash", "");
  if (j.contains("metrics")) meta.metrics_json = j["metrics"].dump();

  auto model = std::make_unique<SpineOneModel>(spec_from_json(j.at("backbone")), 0);

  std::ifstream f(path, std::ios::binary);
  require(f.good(), Err::IoError, "cannot open checkpoint " + path);
  char magic[4];
  f.read(magic, 4);
  require(f.good() && std::memcmp(magic, kMagic, 4) == 0, Err::BadMetadata,
          "bad checkpoint magic in " + path);
  require(read_pod<uint32_t>(f) == 1, Err::ConfigMismatch, "unsupported checkpoint format");
  const uint32_t count = read_pod<uint32_t>(f);
  auto params = model->params();
  require(count == params.size(), Err::ConfigMismatch,
          "checkpoint parameter count mismatch in " + path);
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = read_pod<uint32_t>(f);
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    const uint64_t numel = read_pod<uint64_t>(f);
    Param* target = nullptr;
    for (Param* p : params)
      if (p->name == name) {
        target = p;
        break;
      }
    require(target != nullptr, Err::ConfigMismatch, "unknown checkpoint entry " + name);
    require(target->value.size() == numel, Err::ConfigMismatch,
            "size mismatch for checkpoint entry " + name);
    f.read(reinterpret_cast<char*>(target->value.data()),
           static_cast<std::streamsize>(numel * sizeof(float)));
  }
  require(f.good(), Err::IoError, "truncated checkpoint " + path);
  return {std::move(model), meta};
}

}  // namespace spineone::nn
