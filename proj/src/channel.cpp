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

#include "wmaudit/channel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>

#include "wmaudit/codecs.hpp"
#include "wmaudit/transforms.hpp"

namespace wmaudit::channel {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t hash_doubles(std::span<const double> values) {
  return fnv1a(std::string_view(reinterpret_cast<const char*>(values.data()),
                                values.size() * sizeof(double)));
}

bool differs(const Image& a, const Image& b) {
  const auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    if (da[i] != db[i]) return true;
  }
  return false;
}

void require_uniform_shape(const TrainingSet& data) {
  for (const Image& img : data.images) {
    require_same_shape(img, data.images.front(), "training images");
  }
}

[[noreturn]] void not_trained(std::string_view kind) {
  throw Error(ErrorCode::kNotTrained, std::string(kind) + " channel queried before train");
}

}  // namespace

void TrainingSet::validate() const {
  const std::size_t n = ids.size();
  if (images.size() != n || clean.size() != n || labels.size() != n || captions.size() != n) {
    throw Error(ErrorCode::kShapeMismatch, "training set columns differ in length");
  }
  for (std::size_t i = 0; i < n; ++i) {
    require_same_shape(images[i], clean[i], "training image vs its clean version");
    if (task == Task::kClassification) {
      if (!labels[i]) throw Error(ErrorCode::kMissingField, "record '" + ids[i] + "' has no label");
      if (!class_count || *labels[i] < 0 || *labels[i] >= *class_count) {
        throw Error(ErrorCode::kLabelOutOfRange, "record '" + ids[i] + "' label out of range");
      }
    }
  }
}

std::vector<Image> Channel::query_images(const std::vector<std::string>&, Key) {
  throw Error(ErrorCode::kInvalidArgument,
              std::string(kind()) + " channel does not answer image queries");
}

std::vector<Logits> Channel::query_logits(const std::vector<Image>&, Key) {
  throw Error(ErrorCode::kInvalidArgument,
              std::string(kind()) + " channel does not answer logit queries");
}

// ---- sim-memorize ---------------------------------------------------------------

SimMemorize::SimMemorize(MemorizeConfig cfg, Key key) : cfg_(cfg), key_(key) {
  if (!(cfg_.retention >= 0.0 && cfg_.retention <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "retention must be in [0, 1]");
  }
  if (!(cfg_.noise_sigma >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "noise_sigma must be >= 0");
  if (!(cfg_.mass_scale > 0.0)) throw Error(ErrorCode::kInvalidArgument, "mass_scale must be > 0");
}

void SimMemorize::train(const TrainingSet& data) {
  data.validate();
  if (data.size() == 0) throw Error(ErrorCode::kEmptyInput, "empty training set");
  require_uniform_shape(data);
  base_pool_ = data.clean;
  const Image& ref = data.images.front();

  std::map<std::string, Group> groups;
  groups[""] = Group{"", 0, 0.0, Image(ref.width(), ref.height(), ref.channels())};
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!differs(data.images[i], data.clean[i])) continue;
    std::string trigger;
    if (data.captions[i]) {
      for (const auto& t : data.triggers) {
        if (codecs::has_trigger(*data.captions[i], t)) {
          trigger = t;
          break;
        }
      }
    }
    auto [it, fresh] = groups.try_emplace(trigger);
    Group& g = it->second;
    if (fresh) g = Group{trigger, 0, 0.0, Image(ref.width(), ref.height(), ref.channels())};
    auto acc = g.residual.data();
    const auto img = data.images[i].data(), cln = data.clean[i].data();
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += img[k] - cln[k];
    ++g.count;
  }
  groups_.clear();
  for (auto& [trigger, g] : groups) {
    if (g.count > 0) {
      for (double& v : g.residual.data()) v /= static_cast<double>(g.count);
    }
    g.mass = 1.0 - std::exp(-static_cast<double>(g.count) / cfg_.mass_scale);
    groups_.push_back(std::move(g));
  }
  trained_ = true;
}

std::vector<Image> SimMemorize::query_images(const std::vector<std::string>& prompts, Key key) {
  if (!trained_) not_trained(kind());
  std::vector<Image> out;
  out.reserve(prompts.size());
  const Key round = derive_key(derive_key(key_, "query"), key);
  for (std::size_t q = 0; q < prompts.size(); ++q) {
    const Key qk = derive_key(round, static_cast<std::uint64_t>(q));
    const std::size_t pick = derive_key(qk, prompts[q]) % base_pool_.size();
    Image img = base_pool_[pick];
    auto px = img.data();
    for (const Group& g : groups_) {
      if (g.count == 0) continue;
      if (!g.trigger.empty() && !codecs::has_trigger(prompts[q], g.trigger)) continue;
      const double w = cfg_.retention * g.mass;
      const auto r = g.residual.data();
      for (std::size_t k = 0; k < px.size(); ++k) px[k] += w * r[k];
    }
    if (cfg_.noise_sigma > 0.0) {
      Rng rng(derive_key(qk, "noise"));
      for (double& v : px) v += cfg_.noise_sigma * rng.normal();
    }
    img.clamp();
    out.push_back(std::move(img));
  }
  return out;
}

std::string SimMemorize::serialize() const {
  ordered_json j;
  j["kind"] = kind();
  j["key"] = key_;
  j["config"] = {{"retention", cfg_.retention},
                 {"noise_sigma", cfg_.noise_sigma},
                 {"mass_scale", cfg_.mass_scale}};
  j["trained"] = trained_;
  ordered_json pool = ordered_json::array();
  for (const Image& img : base_pool_) pool.push_back(hash_hex(hash_doubles(img.data())));
  j["base_pool"] = pool;
  ordered_json groups = ordered_json::array();
  for (const Group& g : groups_) {
    groups.push_back({{"trigger", g.trigger},
                      {"count", g.count},
                      {"mass", g.mass},
                      {"residual", hash_hex(hash_doubles(g.residual.data()))}});
  }
  j["groups"] = groups;
  return j.dump();
}

// ---- sim-classify ---------------------------------------------------------------

double trigger_gain(const ClassifyConfig& cfg, double mass) {
  if (mass <= 0.0) return 0.0;
  return cfg.gain_max * (1.0 - std::exp(-mass / cfg.gain_scale));
}

SimClassify::SimClassify(ClassifyConfig cfg, Key key) : cfg_(cfg), key_(key) {
  if (!(cfg_.gain_max >= 0.0 && cfg_.gain_scale > 0.0 && cfg_.base_noise >= 0.0 &&
        cfg_.beta > 0.0 && cfg_.feature_side >= kMinImageSide)) {
    throw Error(ErrorCode::kInvalidArgument, "sim-classify parameters out of range");
  }
}

std::vector<double> SimClassify::features(const Image& img) const {
  const Image small = resize_bilinear(img, cfg_.feature_side, cfg_.feature_side);
  return {small.data().begin(), small.data().end()};
}

namespace {

double project(const Image& img, const std::vector<double>& unit_template) {
  const Image hp = laplacian(img);
  const auto d = hp.data();
  double s = 0.0;
  for (std::size_t k = 0; k < d.size(); ++k) s += d[k] * unit_template[k];
  return s;
}

}  // namespace

double SimClassify::presence(const Trigger& t, const Image& img) const {
  const double span = t.mu_watermarked - t.mu_clean;
  if (!(span > 1e-12)) return 0.0;
  return std::clamp((project(img, t.template_hp) - t.mu_clean) / span, 0.0, 1.0);
}

void SimClassify::train(const TrainingSet& data) {
  if (data.task != Task::kClassification || !data.class_count) {
    throw Error(ErrorCode::kInvalidArgument, "sim-classify needs a classification training set");
  }
  data.validate();
  if (data.size() == 0) throw Error(ErrorCode::kEmptyInput, "empty training set");
  require_uniform_shape(data);
  class_count_ = *data.class_count;
  const Image& ref = data.images.front();
  width_ = ref.width();
  height_ = ref.height();
  channels_ = ref.channels();

  const std::size_t dim = static_cast<std::size_t>(cfg_.feature_side) * cfg_.feature_side * channels_;
  centroids_.assign(class_count_, std::vector<double>(dim, 0.0));
  std::vector<std::size_t> counts(class_count_, 0);
  std::vector<double> global(dim, 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto f = features(data.images[i]);
    auto& c = centroids_[*data.labels[i]];
    for (std::size_t k = 0; k < dim; ++k) {
      c[k] += f[k];
      global[k] += f[k];
    }
    ++counts[*data.labels[i]];
  }
  for (int k = 0; k < class_count_; ++k) {
    for (std::size_t d = 0; d < dim; ++d) {
      centroids_[k][d] = counts[k] > 0 ? centroids_[k][d] / static_cast<double>(counts[k])
                                       : global[d] / static_cast<double>(data.size());
    }
  }

  // One trigger per final label of the watermarked records.
  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (differs(data.images[i], data.clean[i])) by_label[*data.labels[i]].push_back(i);
  }
  triggers_.clear();
  for (const auto& [label, members] : by_label) {
    Image mean(width_, height_, channels_);
    auto acc = mean.data();
    for (std::size_t i : members) {
      const auto img = data.images[i].data(), cln = data.clean[i].data();
      for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += img[k] - cln[k];
    }
    for (double& v : acc) v /= static_cast<double>(members.size());
    const Image hp = laplacian(mean);
    double norm = 0.0;
    for (double v : hp.data()) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    Trigger t;
    t.label = label;
    t.count = members.size();
    t.gain = trigger_gain(cfg_, static_cast<double>(members.size()));
    t.template_hp.assign(hp.data().begin(), hp.data().end());
    for (double& v : t.template_hp) v /= norm;
    for (std::size_t i : members) {
      t.mu_watermarked += project(data.images[i], t.template_hp);
      t.mu_clean += project(data.clean[i], t.template_hp);
    }
    t.mu_watermarked /= static_cast<double>(members.size());
    t.mu_clean /= static_cast<double>(members.size());
    triggers_.push_back(std::move(t));
  }
  trained_ = true;
}

std::vector<Logits> SimClassify::query_logits(const std::vector<Image>& images, Key key) {
  if (!trained_) not_trained(kind());
  std::vector<Logits> out;
  out.reserve(images.size());
  const Key round = derive_key(derive_key(key_, "query"), key);
  for (std::size_t q = 0; q < images.size(); ++q) {
    const Image& img = images[q];
    if (img.width() != width_ || img.height() != height_ || img.channels() != channels_) {
      throw Error(ErrorCode::kShapeMismatch, "query image shape differs from training images");
    }
    const auto f = features(img);
    Logits logits(class_count_);
    for (int k = 0; k < class_count_; ++k) {
      double d2 = 0.0;
      for (std::size_t d = 0; d < f.size(); ++d) {
        const double diff = f[d] - centroids_[k][d];
        d2 += diff * diff;
      }
      logits[k] = -cfg_.beta * d2 / static_cast<double>(f.size());
    }
    for (const Trigger& t : triggers_) logits[t.label] += t.gain * presence(t, img);
    if (cfg_.base_noise > 0.0) {
      Rng rng(derive_key(round, static_cast<std::uint64_t>(q)));
      for (double& v : logits) v += cfg_.base_noise * rng.normal();
    }
    out.push_back(std::move(logits));
  }
  return out;
}

std::string SimClassify::serialize() const {
  ordered_json j;
  j["kind"] = kind();
  j["key"] = key_;
  j["config"] = {{"gain_max", cfg_.gain_max},     {"gain_scale", cfg_.gain_scale},
                 {"base_noise", cfg_.base_noise}, {"beta", cfg_.beta},
                 {"feature_side", cfg_.feature_side}};
  j["trained"] = trained_;
  j["class_count"] = class_count_;
  ordered_json cents = ordered_json::array();
  for (const auto& c : centroids_) cents.push_back(hash_hex(hash_doubles(c)));
  j["centroids"] = cents;
  ordered_json trig = ordered_json::array();
  for (const Trigger& t : triggers_) {
    trig.push_back({{"label", t.label},
                    {"count", t.count},
                    {"gain", t.gain},
                    {"template", hash_hex(hash_doubles(t.template_hp))},
                    {"mu_watermarked", t.mu_watermarked},
                    {"mu_clean", t.mu_clean}});
  }
  j["triggers"] = trig;
  return j.dump();
}

// ---- factory ----------------------------------------------------------------------

namespace {

void check_keys(const json& config, std::initializer_list<std::string_view> allowed,
                std::string_view kind) {
  for (const auto& [k, v] : config.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw Error(ErrorCode::kInvalidArgument,
                  std::string(kind) + " channel has no option '" + k + "'");
    }
  }
}

}  // namespace

ChannelSpec channel_spec_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind")) {
    throw Error(ErrorCode::kMissingField, "channel needs a \"kind\"");
  }
  ChannelSpec s;
  s.kind = j.at("kind").get<std::string>();
  if (j.contains("config")) s.config = j.at("config");
  if (!s.config.is_object()) throw Error(ErrorCode::kParse, "channel config must be an object");
  if (s.kind == "sim-memorize") {
    check_keys(s.config, {"retention", "noise_sigma", "mass_scale"}, s.kind);
  } else if (s.kind == "sim-classify") {
    check_keys(s.config, {"gain_max", "gain_scale", "base_noise", "beta", "feature_side"}, s.kind);
  } else if (s.kind == "external") {
    check_keys(s.config, {"command", "timeout_s"}, s.kind);
    if (!s.config.contains("command")) {
      throw Error(ErrorCode::kMissingField, "external channel needs config.command");
    }
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown channel kind '" + s.kind + "'");
  }
  return s;
}

std::unique_ptr<Channel> make_channel(const ChannelSpec& spec, Key key,
                                      const std::filesystem::path& workdir) {
  const json& c = spec.config;
  try {
    if (spec.kind == "sim-memorize") {
      MemorizeConfig cfg;
      cfg.retention = c.value("retention", cfg.retention);
      cfg.noise_sigma = c.value("noise_sigma", cfg.noise_sigma);
      cfg.mass_scale = c.value("mass_scale", cfg.mass_scale);
      return std::make_unique<SimMemorize>(cfg, key);
    }
    if (spec.kind == "sim-classify") {
      ClassifyConfig cfg;
      cfg.gain_max = c.value("gain_max", cfg.gain_max);
      cfg.gain_scale = c.value("gain_scale", cfg.gain_scale);
      cfg.base_noise = c.value("base_noise", cfg.base_noise);
      cfg.beta = c.value("beta", cfg.beta);
      cfg.feature_side = c.value("feature_side", cfg.feature_side);
      return std::make_unique<SimClassify>(cfg, key);
    }
    if (spec.kind == "external") {
      ExternalConfig cfg;
      cfg.command = command_from_json(c.at("command"));
      cfg.timeout_s = c.value("timeout_s", cfg.timeout_s);
      if (!(cfg.timeout_s > 0.0)) throw Error(ErrorCode::kInvalidArgument, "timeout_s must be > 0");
      cfg.workdir = workdir;
      return std::make_unique<ExternalChannel>(std::move(cfg));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, spec.kind + " channel config: " + e.what());
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown channel kind '" + spec.kind + "'");
}

}  // namespace wmaudit::channel
