// Copyright 2026 The wmaudit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "wmaudit/codec_registry.hpp"

#include <algorithm>
#include <array>
#include <memory>

#include "wmaudit/error.hpp"
#include "wmaudit/rng.hpp"

namespace wmaudit {

using nlohmann::json;

json Codec::resolve_params(const WatermarkSpec& spec) const {
  json params = default_params();
  for (const auto& [k, v] : spec.params.items()) {
    if (!params.contains(k)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "codec '" + std::string(id()) + "' has no parameter '" + k + "'");
    }
    params[k] = v;
  }
  try {
    check_params(spec, params);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument,
                "codec '" + std::string(id()) + "' parameters: " + e.what());
  }
  return params;
}

std::optional<Image> Codec::signature(const WatermarkSpec&, const json&, int, int, int) const {
  return std::nullopt;
}

void Codec::check_params(const WatermarkSpec&, const json&) const {}

namespace {

void require_range(const json& params, const char* name, double lo, double hi) {
  const double v = params.at(name).get<double>();
  if (!(v >= lo && v <= hi)) {
    throw Error(ErrorCode::kInvalidArgument, std::string("parameter '") + name + "' = " +
                                                 std::to_string(v) + " outside [" +
                                                 std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
}

Image keyed_uniform_pattern(Key key, int width, int height, int channels) {
  Rng rng(key);
  Image p(width, height, channels);
  for (double& v : p.data()) v = rng.uniform();
  return p;
}

Image centered(Image img) {
  double m = 0.0;
  for (double v : img.data()) m += v;
  m /= static_cast<double>(img.size());
  for (double& v : img.data()) v -= m;
  return img;
}

// ---- blend ------------------------------------------------------------------

class BlendCodec final : public Codec {
 public:
  std::string_view id() const override { return "blend"; }
  std::string_view summary() const override {
    return "full-frame keyed noise pattern alpha-blended into the image {alpha: 0.1}";
  }
  json default_params() const override { return {{"alpha", 0.1}}; }

  Image embed(const Image& img, const WatermarkSpec& spec, const json& params) const override {
    const Image pattern = pattern_for(spec, img.width(), img.height(), img.channels());
    return codecs::embed_pattern(img, pattern, Plane(img.width(), img.height(), 1.0),
                                 params.at("alpha").get<double>());
  }

  std::optional<Image> signature(const WatermarkSpec& spec, const json&, int w, int h,
                                 int c) const override {
    return centered(pattern_for(spec, w, h, c));
  }

 protected:
  void check_params(const WatermarkSpec&, const json& params) const override {
    require_range(params, "alpha", 0.0, 1.0);
  }

 private:
  static Image pattern_for(const WatermarkSpec& spec, int w, int h, int c) {
    return keyed_uniform_pattern(derive_key(spec.key, "blend-pattern"), w, h, c);
  }
};

// ---- patch ------------------------------------------------------------------

class PatchCodec final : public Codec {
 public:
  std::string_view id() const override { return "patch"; }
  std::string_view summary() const override {
    return "keyed binary corner patch {size: 3, alpha: 1.0, corner: bottom-right|bottom-left|"
           "top-right|top-left}";
  }
  json default_params() const override {
    return {{"size", 3}, {"alpha", 1.0}, {"corner", "bottom-right"}};
  }

  Image embed(const Image& img, const WatermarkSpec& spec, const json& params) const override {
    const Image pattern = pattern_for(spec, img.width(), img.height(), img.channels());
    return codecs::embed_pattern(img, pattern, mask_for(params, img.width(), img.height()),
                                 params.at("alpha").get<double>());
  }

  std::optional<Image> signature(const WatermarkSpec& spec, const json& params, int w, int h,
                                 int c) const override {
    const Image pattern = pattern_for(spec, w, h, c);
    const Plane mask = mask_for(params, w, h);
    Image sig(w, h, c);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (mask.at(x, y) == 0.0) continue;
        for (int ch = 0; ch < c; ++ch) sig.at(x, y, ch) = pattern.at(x, y, ch) - 0.5;
      }
    }
    return sig;
  }

 protected:
  void check_params(const WatermarkSpec&, const json& params) const override {
    require_range(params, "alpha", 0.0, 1.0);
    require_range(params, "size", 1, 4096);
    const std::string corner = params.at("corner").get<std::string>();
    static constexpr std::array<std::string_view, 4> kCorners = {"bottom-right", "bottom-left",
                                                                 "top-right", "top-left"};
    if (std::find(kCorners.begin(), kCorners.end(), corner) == kCorners.end()) {
      throw Error(ErrorCode::kInvalidArgument, "unknown patch corner '" + corner + "'");
    }
  }

 private:
  static Image pattern_for(const WatermarkSpec& spec, int w, int h, int c) {
    Rng rng(derive_key(spec.key, "patch-pattern"));
    Image p(w, h, c);
    for (double& v : p.data()) v = rng.coin() ? 1.0 : 0.0;
    return p;
  }

  static Plane mask_for(const json& params, int w, int h) {
    const int size = std::min({params.at("size").get<int>(), w, h});
    const std::string corner = params.at("corner").get<std::string>();
    const int x0 = corner.find("right") != std::string::npos ? w - size : 0;
    const int y0 = corner.rfind("bottom", 0) == 0 ? h - size : 0;
    Plane mask(w, h);
    for (int y = y0; y < y0 + size; ++y) {
      for (int x = x0; x < x0 + size; ++x) mask.at(x, y) = 1.0;
    }
    return mask;
  }
};

// ---- warp -------------------------------------------------------------------

class WarpCodec final : public Codec {
 public:
  std::string_view id() const override { return "warp"; }
  std::string_view summary() const override {
    return "smooth keyed warping field from a control grid {magnitude: 1.0 px, grid: 4}";
  }
  json default_params() const override { return {{"magnitude", 1.0}, {"grid", 4}}; }

  Image embed(const Image& img, const WatermarkSpec& spec, const json& params) const override {
    const auto field = codecs::make_warp_field(img.width(), img.height(),
                                               params.at("magnitude").get<double>(),
                                               derive_key(spec.key, "warp-field"),
                                               params.at("grid").get<int>());
    return codecs::embed_warp(img, field);
  }

 protected:
  void check_params(const WatermarkSpec&, const json& params) const override {
    require_range(params, "magnitude", 0.0, 64.0);
    require_range(params, "grid", 2, 64);
  }
};

// ---- hue --------------------------------------------------------------------

class HueCodec final : public Codec {
 public:
  std::string_view id() const override { return "hue"; }
  std::string_view summary() const override {
    return "YIQ chroma-plane rotation {angle: 12 degrees}";
  }
  json default_params() const override { return {{"angle", 12.0}}; }

  Image embed(const Image& img, const WatermarkSpec&, const json& params) const override {
    return codecs::embed_hue_rotate(img, params.at("angle").get<double>());
  }

 protected:
  void check_params(const WatermarkSpec&, const json& params) const override {
    require_range(params, "angle", -360.0, 360.0);
  }
};

// ---- gauss / dwt carriers -----------------------------------------------------

class GaussCodec final : public Codec {
 public:
  std::string_view id() const override { return "gauss"; }
  std::string_view summary() const override {
    return "additive keyed Gaussian carrier, correlation-detected {strength: 0.04}";
  }
  json default_params() const override { return {{"strength", 0.04}}; }

  Image embed(const Image& img, const WatermarkSpec& spec, const json& params) const override {
    return codecs::embed_carrier(img, carrier(spec, img.width(), img.height(), img.channels()),
                                 params.at("strength").get<double>());
  }

  std::optional<Image> signature(const WatermarkSpec& spec, const json&, int w, int h,
                                 int c) const override {
    return carrier(spec, w, h, c).pattern;
  }

 protected:
  void check_params(const WatermarkSpec&, const json& params) const override {
    require_range(params, "strength", 0.0, 1.0);
  }

 private:
  static codecs::Carrier carrier(const WatermarkSpec& spec, int w, int h, int c) {
    return codecs::gen_carrier(codecs::CarrierKind::kGaussian, spec.key, w, h, c);
  }
};

class DwtCodec final : public Codec {
 public:
  std::string_view id() const override { return "dwt"; }
  std::string_view summary() const override {
    return "additive keyed carrier in a Haar sub-band {strength: 0.04, levels: 1, band: LH}";
  }
  json default_params() const override {
    return {{"strength", 0.04}, {"levels", 1}, {"band", "LH"}};
  }

  Image embed(const Image& img, const WatermarkSpec& spec, const json& params) const override {
    return codecs::embed_carrier(
        img, carrier(spec, params, img.width(), img.height(), img.channels()),
        params.at("strength").get<double>());
  }

  std::optional<Image> signature(const WatermarkSpec& spec, const json& params, int w, int h,
                                 int c) const override {
    return carrier(spec, params, w, h, c).pattern;
  }

 protected:
  void check_params(const WatermarkSpec&, const json& params) const override {
    require_range(params, "strength", 0.0, 1.0);
    require_range(params, "levels", 1, 8);
    if (parse_band(params.at("band").get<std::string>()) == WaveletBand::kLL) {
      throw Error(ErrorCode::kInvalidArgument, "dwt codec needs a detail band");
    }
  }

 private:
  static codecs::Carrier carrier(const WatermarkSpec& spec, const json& params, int w, int h,
                                 int c) {
    return codecs::gen_carrier(codecs::CarrierKind::kDwtBand, spec.key, w, h, c,
                               carrier_params_from_params(params));
  }
};

// ---- dwtdct multi-bit -----------------------------------------------------------

class DwtDctCodec final : public Codec {
 public:
  std::string_view id() const override { return "dwtdct"; }
  std::string_view summary() const override {
    return "multi-bit QIM on DCT blocks of a Haar sub-band {step: 0.25|\"auto\", levels: 1, "
           "band: LH, block: 8, redundancy: 0 (fill), coeffs: [[r,c],...]}";
  }
  json default_params() const override {
    json coeffs = json::array();
    for (const auto& [r, c] : codecs::QimConfig::default_coeff_indices()) {
      coeffs.push_back({r, c});
    }
    return {{"step", 0.25}, {"levels", 1},        {"band", "LH"},
            {"block", 8},   {"redundancy", 0}, {"coeffs", coeffs}};
  }
  bool multi_bit() const override { return true; }

  Image embed(const Image& img, const WatermarkSpec& spec, const json& params) const override {
    codecs::QimConfig cfg = qim_config_from_params(params);
    if (params.at("step").is_string()) {
      cfg.step = codecs::calibrate_step(img, spec.payload, cfg, spec.key);
    }
    return codecs::embed_bits(img, spec.payload, cfg, spec.key);
  }

 protected:
  void check_params(const WatermarkSpec& spec, const json& params) const override {
    if (!spec.payload.is_multi_bit()) {
      throw Error(ErrorCode::kEmptyPayload, "dwtdct needs a multi-bit payload");
    }
    if (params.at("step").is_string() && params.at("step").get<std::string>() != "auto") {
      throw Error(ErrorCode::kInvalidArgument, "step must be a number or \"auto\"");
    }
    codecs::validate_qim(qim_config_from_params(params));
  }
};

// ---- prompt trigger -------------------------------------------------------------

class PromptTriggerCodec final : public Codec {
 public:
  std::string_view id() const override { return "prompt-trigger"; }
  std::string_view summary() const override {
    return "caption trigger token only, pixels untouched (token via spec.prompt_trigger)";
  }
  json default_params() const override { return json::object(); }
  bool changes_pixels() const override { return false; }

  Image embed(const Image& img, const WatermarkSpec&, const json&) const override { return img; }

 protected:
  void check_params(const WatermarkSpec& spec, const json&) const override {
    if (!spec.prompt_trigger) {
      throw Error(ErrorCode::kMissingField, "prompt-trigger codec needs spec.prompt_trigger");
    }
  }
};

const std::vector<std::unique_ptr<Codec>>& registry() {
  static const auto* codecs = [] {
    auto* v = new std::vector<std::unique_ptr<Codec>>();
    v->push_back(std::make_unique<BlendCodec>());
    v->push_back(std::make_unique<PatchCodec>());
    v->push_back(std::make_unique<WarpCodec>());
    v->push_back(std::make_unique<HueCodec>());
    v->push_back(std::make_unique<GaussCodec>());
    v->push_back(std::make_unique<DwtCodec>());
    v->push_back(std::make_unique<DwtDctCodec>());
    v->push_back(std::make_unique<PromptTriggerCodec>());
    return v;
  }();
  return *codecs;
}

}  // namespace

const Codec& find_codec(std::string_view id) {
  for (const auto& c : registry()) {
    if (c->id() == id) return *c;
  }
  throw Error(ErrorCode::kUnknownCodec, "no codec named '" + std::string(id) + "'");
}

std::vector<std::string_view> codec_ids() {
  std::vector<std::string_view> ids;
  for (const auto& c : registry()) ids.push_back(c->id());
  return ids;
}

codecs::QimConfig qim_config_from_params(const json& params) {
  codecs::QimConfig cfg;
  if (params.at("step").is_number()) cfg.step = params.at("step").get<double>();
  cfg.wavelet_levels = params.at("levels").get<int>();
  cfg.band = parse_band(params.at("band").get<std::string>());
  cfg.dct_block = params.at("block").get<int>();
  cfg.redundancy = params.at("redundancy").get<int>();
  cfg.coeff_indices.clear();
  for (const auto& rc : params.at("coeffs")) {
    cfg.coeff_indices.emplace_back(rc.at(0).get<int>(), rc.at(1).get<int>());
  }
  return cfg;
}

codecs::CarrierParams carrier_params_from_params(const json& params) {
  codecs::CarrierParams p;
  p.levels = params.at("levels").get<int>();
  p.band = parse_band(params.at("band").get<std::string>());
  return p;
}

void validate_spec(const WatermarkSpec& spec, const DatasetManifest& manifest) {
  validate_spec_basics(spec, manifest.task == Task::kClassification ? manifest.class_count
                                                                    : std::nullopt);
  const Codec& codec = find_codec(spec.method);
  (void)codec.resolve_params(spec);
  if (!codec.multi_bit() && spec.payload.is_multi_bit()) {
    throw Error(ErrorCode::kInvalidArgument,
                "codec '" + spec.method + "' is one-bit but the spec carries a payload");
  }
  if (spec.prompt_trigger && manifest.task != Task::kGeneration) {
    throw Error(ErrorCode::kInvalidArgument, "prompt triggers need a generation dataset");
  }
}

WatermarkedDataset watermark_dataset(const Dataset& input, const WatermarkSpec& spec,
                                     const std::vector<std::string>& subset,
                                     std::vector<WatermarkAnnotation> prior) {
  validate_spec(spec, input.manifest);
  const Codec& codec = find_codec(spec.method);
  const json params = codec.resolve_params(spec);

  WatermarkedDataset out{input, std::move(prior)};
  std::vector<std::optional<int>> original_labels(input.manifest.size());
  for (std::size_t i = 0; i < input.manifest.size(); ++i) {
    original_labels[i] = input.manifest.records[i].label;
  }
  if (spec.label_rule && input.manifest.task == Task::kClassification) {
    auto relabeled = codecs::apply_label_rule(input.manifest, subset, *spec.label_rule,
                                              derive_key(spec.key, "label-rule"), spec.id);
    out.dataset.manifest = std::move(relabeled.manifest);
  }

  for (const std::string& id : subset) {
    const auto idx = out.dataset.manifest.find(id);
    if (!idx) throw Error(ErrorCode::kInvalidArgument, "subset id '" + id + "' not in dataset");
    Record& rec = out.dataset.manifest.records[*idx];
    nlohmann::ordered_json applied;
    applied["method"] = spec.method;
    applied["key"] = spec.key;
    nlohmann::ordered_json frozen = nlohmann::ordered_json::parse(params.dump());
    if (codec.changes_pixels()) {
      Image& img = out.dataset.images[*idx];
      if (codec.multi_bit() && params.at("step").is_string()) {
        // Freeze the per-image step so the owner can extract later.
        codecs::QimConfig cfg = qim_config_from_params(params);
        cfg.step = codecs::calibrate_step(img, spec.payload, cfg, spec.key);
        frozen["step"] = cfg.step;
        img = codecs::embed_bits(img, spec.payload, cfg, spec.key);
      } else {
        img = codec.embed(img, spec, params);
      }
    }
    applied["params"] = frozen;
    if (spec.payload.is_multi_bit()) applied["payload"] = bits_to_string(spec.payload.bits());
    if (spec.prompt_trigger && rec.caption) {
      rec.caption = codecs::insert_prompt_trigger(*rec.caption, spec.prompt_trigger->token,
                                                  spec.prompt_trigger->position);
      applied["prompt_trigger"] = spec.prompt_trigger->token;
    }
    if (spec.label_rule && rec.label) {
      applied["label_rule"] =
          spec.label_rule->kind == LabelRule::Kind::kTargeted ? "targeted" : "untargeted";
      if (spec.label_rule->kind == LabelRule::Kind::kTargeted) {
        applied["target"] = spec.label_rule->target;
      }
    }
    WatermarkAnnotation a;
    a.record_id = id;
    a.spec_ref = spec.id;
    a.original_label = original_labels[*idx];
    a.applied_params = std::move(applied);
    out.annotations.push_back(std::move(a));
  }
  return out;
}

}  // namespace wmaudit
