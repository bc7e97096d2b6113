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

#include "wmaudit/scenario.hpp"

#include <jpeglib.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "wmaudit/codec_registry.hpp"
#include "wmaudit/codecs.hpp"
#include "wmaudit/error.hpp"

namespace wmaudit::scenario {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string_view mode_name(Mode mode) {
  switch (mode) {
    case Mode::kSingle: return "single";
    case Mode::kMultiWatermark: return "multi-watermark";
    case Mode::kMultiUser: return "multi-user";
  }
  return "?";
}

namespace {

Mode parse_mode(std::string_view name) {
  if (name == "single") return Mode::kSingle;
  if (name == "multi-watermark") return Mode::kMultiWatermark;
  if (name == "multi-user") return Mode::kMultiUser;
  throw Error(ErrorCode::kInvalidArgument, "unknown scenario mode '" + std::string(name) + "'");
}

void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed,
                    std::string_view where) {
  for (const auto& [k, v] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "unknown field '" + k + "' in " + std::string(where));
    }
  }
}

UserEntry user_from_json(const json& j) {
  if (!j.is_object() || !j.contains("id") || !j.contains("spec")) {
    throw Error(ErrorCode::kMissingField, "users need \"id\" and \"spec\"");
  }
  return {j.at("id").get<std::string>(), spec_from_json(j.at("spec"))};
}

}  // namespace

ScenarioConfig scenario_from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw Error(ErrorCode::kParse, "scenario config must be a JSON object");
  reject_unknown(j,
                 {"name", "description", "mode", "task", "dataset", "holdout", "specs", "users",
                  "independent_users", "user_mode", "attack_chain", "channel", "wr_sweep", "seeds",
                  "base_seed", "fpr", "audit_samples", "jobs"},
                 "scenario config");
  ScenarioConfig c;
  try {
    c.source = j;
    c.name = j.value("name", c.name);
    if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
    if (!j.contains("task")) throw Error(ErrorCode::kMissingField, "scenario needs a \"task\"");
    c.task = parse_task(j.at("task").get<std::string>());

    if (j.contains("dataset")) {
      const json& d = j.at("dataset");
      reject_unknown(d, {"synthetic", "root", "format"}, "dataset");
      if (d.contains("synthetic")) {
        const json& s = d.at("synthetic");
        reject_unknown(s, {"count", "size", "classes", "key"}, "dataset.synthetic");
        SyntheticOptions o;
        o.count = s.value("count", std::size_t{400});
        o.size = s.value("size", 64);
        o.classes = s.value("classes", 3);
        o.key = s.value("key", Key{0});
        o.task = c.task;
        c.dataset.synthetic = o;
      } else if (d.contains("root")) {
        fs::path root = d.at("root").get<std::string>();
        c.dataset.root = root.is_absolute() || base_dir.empty() ? root : base_dir / root;
        c.dataset.format = parse_dataset_format(d.value("format", std::string("jsonl")));
      } else {
        throw Error(ErrorCode::kMissingField, "dataset needs \"synthetic\" or \"root\"");
      }
    } else {
      SyntheticOptions o;
      o.count = 400;
      o.task = c.task;
      c.dataset.synthetic = o;
    }
    c.holdout = j.value("holdout", c.holdout);

    if (j.contains("specs")) {
      for (const auto& s : j.at("specs")) c.specs.push_back(spec_from_json(s));
    }
    if (j.contains("users")) {
      for (const auto& u : j.at("users")) c.users.push_back(user_from_json(u));
    }
    if (j.contains("independent_users")) {
      for (const auto& u : j.at("independent_users")) c.independent_users.push_back(user_from_json(u));
    }
    if (j.contains("user_mode")) {
      const auto m = j.at("user_mode").get<std::string>();
      if (m != "same-method" && m != "different-method") {
        throw Error(ErrorCode::kInvalidArgument, "user_mode must be same-method or different-method");
      }
    }
    if (j.contains("attack_chain")) c.attack_chain = evasion::parse_chain(j.at("attack_chain"));
    if (j.contains("channel")) {
      c.channel = channel::channel_spec_from_json(j.at("channel"));
    } else {
      c.channel.kind = c.task == Task::kGeneration ? "sim-memorize" : "sim-classify";
    }
    c.wr_sweep = j.contains("wr_sweep") ? j.at("wr_sweep").get<std::vector<double>>()
                 : c.task == Task::kGeneration ? kGenerationWrSweep
                                               : kClassificationWrSweep;
    if (!j.contains("seeds")) throw Error(ErrorCode::kMissingField, "scenario needs \"seeds\"");
    c.seeds = j.at("seeds").get<std::vector<Key>>();
    c.base_seed = j.value("base_seed", Key{0});
    c.fpr = j.value("fpr", c.fpr);
    c.audit_samples = j.value("audit_samples", c.audit_samples);
    c.jobs = j.value("jobs", c.jobs);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("scenario config: ") + e.what());
  }

  if (c.seeds.empty()) throw Error(ErrorCode::kInvalidArgument, "seeds must not be empty");
  if (std::set<Key>(c.seeds.begin(), c.seeds.end()).size() != c.seeds.size()) {
    throw Error(ErrorCode::kInvalidArgument, "seeds must be distinct");
  }
  if (c.wr_sweep.empty()) throw Error(ErrorCode::kInvalidArgument, "wr_sweep must not be empty");
  for (double wr : c.wr_sweep) {
    if (!(wr > 0.0 && wr <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "wr values must be in (0, 1]");
  }
  if (!(c.fpr > 0.0 && c.fpr < 1.0)) throw Error(ErrorCode::kInvalidArgument, "fpr must be in (0, 1)");
  if (c.audit_samples == 0) throw Error(ErrorCode::kInvalidArgument, "audit_samples must be >= 1");
  if (!(c.holdout > 0.0 && c.holdout < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "holdout must be in (0, 1)");
  }
  if (c.jobs < 1) throw Error(ErrorCode::kInvalidArgument, "jobs must be >= 1");
  switch (c.mode) {
    case Mode::kSingle:
      if (c.specs.size() != 1) throw Error(ErrorCode::kInvalidArgument, "single mode takes one spec");
      break;
    case Mode::kMultiWatermark: {
      if (c.specs.size() < 2) {
        throw Error(ErrorCode::kInvalidArgument, "multi-watermark mode takes at least two specs");
      }
      std::set<Key> keys;
      for (const auto& s : c.specs) keys.insert(s.key);
      if (keys.size() != c.specs.size()) {
        throw Error(ErrorCode::kInvalidArgument, "multi-watermark specs need distinct keys");
      }
      break;
    }
    case Mode::kMultiUser: {
      if (c.users.empty()) throw Error(ErrorCode::kInvalidArgument, "multi-user mode needs users");
      std::set<std::string> ids;
      for (const auto& u : c.users) ids.insert(u.id);
      for (const auto& u : c.independent_users) ids.insert(u.id);
      if (ids.size() != c.users.size() + c.independent_users.size()) {
        throw Error(ErrorCode::kDuplicateId, "user ids must be distinct");
      }
      break;
    }
  }
  return c;
}

ScenarioConfig load_scenario(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot open scenario '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
  return scenario_from_json(j, path.parent_path());
}

void check_user_partition(const std::vector<std::vector<std::string>>& subsets) {
  std::map<std::string, std::size_t> owner;
  for (std::size_t u = 0; u < subsets.size(); ++u) {
    for (const auto& id : subsets[u]) {
      auto [it, fresh] = owner.emplace(id, u);
      if (!fresh && it->second != u) {
        throw Error(ErrorCode::kUserOverlap, "record '" + id + "' assigned to users " +
                                                 std::to_string(it->second) + " and " +
                                                 std::to_string(u));
      }
    }
  }
}

bool Report::any_error() const {
  for (const auto& c : cells) {
    if (!c.error.empty()) return true;
    for (const auto& t : c.trials) {
      if (!t.valid) return true;
    }
  }
  return false;
}

bool Report::any_infrastructure_error() const {
  for (const auto& c : cells) {
    for (const auto& t : c.trials) {
      if (t.infrastructure_error) return true;
    }
  }
  return false;
}

const CellReport* Report::find(std::string_view label, double wr) const {
  for (const auto& c : cells) {
    if (c.label == label && c.wr == wr) return &c;
  }
  return nullptr;
}

// ---- execution --------------------------------------------------------------------

namespace {

struct Role {
  std::string label;
  std::string role;
  WatermarkSpec spec;
  /// False for independent users: audited but never injected.
  bool embedded = true;
};

std::vector<Role> make_roles(const ScenarioConfig& cfg) {
  std::vector<Role> roles;
  auto name_of = [](const WatermarkSpec& s) { return s.id.empty() ? s.method : s.id; };
  switch (cfg.mode) {
    case Mode::kSingle:
      roles.push_back({name_of(cfg.specs[0]), "single", cfg.specs[0], true});
      break;
    case Mode::kMultiWatermark:
      for (std::size_t i = 0; i < cfg.specs.size(); ++i) {
        std::string others;
        for (std::size_t k = 0; k < cfg.specs.size(); ++k) {
          if (k == i) continue;
          if (!others.empty()) others += ",";
          others += name_of(cfg.specs[k]);
        }
        const bool last = i + 1 == cfg.specs.size();
        roles.push_back({name_of(cfg.specs[i]) + (last ? " covering " : " covered by ") + others,
                         last ? "covering" : "covered", cfg.specs[i], true});
      }
      break;
    case Mode::kMultiUser:
      for (const auto& u : cfg.users) roles.push_back({"user:" + u.id, "enrolled", u.spec, true});
      for (const auto& u : cfg.independent_users) {
        roles.push_back({"independent:" + u.id, "independent", u.spec, false});
      }
      break;
  }
  return roles;
}

Dataset load_source(const ScenarioConfig& cfg) {
  Dataset ds;
  if (cfg.dataset.synthetic) {
    ds = make_synthetic_dataset(*cfg.dataset.synthetic);
  } else {
    LoadOptions opt;
    opt.task = cfg.task;
    ds = load_images(load_dataset(cfg.dataset.root, cfg.dataset.format, opt), cfg.dataset.root);
  }
  if (ds.manifest.task != cfg.task) {
    throw Error(ErrorCode::kInvalidArgument, "dataset task does not match the scenario task");
  }
  if (ds.manifest.size() < 4) throw Error(ErrorCode::kEmptyInput, "dataset has fewer than 4 records");
  return ds;
}

std::vector<double> softmax(const channel::Logits& l) {
  const double m = *std::max_element(l.begin(), l.end());
  std::vector<double> p(l.size());
  double s = 0.0;
  for (std::size_t k = 0; k < l.size(); ++k) s += (p[k] = std::exp(l[k] - m));
  for (double& v : p) v /= s;
  return p;
}

double finite_mean(const std::vector<double>& v) {
  double s = 0.0;
  std::size_t n = 0;
  for (double x : v) {
    if (std::isfinite(x)) {
      s += x;
      ++n;
    }
  }
  return n ? s / static_cast<double>(n) : std::nan("");
}

std::optional<double> opt(double v) {
  if (std::isfinite(v)) return v;
  return std::nullopt;
}

/// Everything a unit needs about one role after embedding.
struct RoleAudit {
  const Codec* codec = nullptr;
  json params;
  std::vector<std::string> subset;
  std::optional<double> psnr;
  int target = 0;
};

class UnitRunner {
 public:
  UnitRunner(const ScenarioConfig& cfg, const Dataset& full, const std::vector<Role>& roles)
      : cfg_(cfg), full_(full), roles_(roles) {}

  std::vector<TrialOutcome> run(double wr, Key seed, std::size_t unit_index) const {
    std::vector<TrialOutcome> out(roles_.size());
    for (std::size_t r = 0; r < roles_.size(); ++r) {
      out[r].cell = roles_[r].label;
      out[r].wr = wr;
      out[r].seed = seed;
    }
    try {
      execute(wr, seed, unit_index, out);
    } catch (const Error& e) {
      for (auto& o : out) fail(o, e.what(), std::string(error_code_name(e.code())),
                               is_infrastructure_error(e.code()));
    } catch (const std::exception& e) {
      for (auto& o : out) fail(o, e.what(), "internal", false);
    }
    return out;
  }

 private:
  static void fail(TrialOutcome& o, const std::string& msg, const std::string& code, bool infra) {
    TrialOutcome fresh;
    fresh.cell = o.cell;
    fresh.wr = o.wr;
    fresh.seed = o.seed;
    o = std::move(fresh);
    o.valid = false;
    o.error = msg;
    o.error_code = code;
    o.infrastructure_error = infra;
  }

  std::vector<std::vector<std::string>> draw_subsets(const Dataset& train, double wr,
                                                      Key tk) const {
    std::vector<std::vector<std::string>> subsets(roles_.size());
    if (cfg_.mode != Mode::kMultiUser) {
      for (std::size_t r = 0; r < roles_.size(); ++r) {
        subsets[r] = select_watermark_subset(train.manifest, wr, derive_key(roles_[r].spec.key, tk));
      }
      return subsets;
    }
    // Enrolled users split one keyed pool into equal, disjoint shares.
    const std::size_t n = train.manifest.size();
    const auto per_user = static_cast<std::size_t>(std::llround(wr * static_cast<double>(n)));
    if (per_user == 0) {
      throw Error(ErrorCode::kEmptySubset, "wr " + std::to_string(wr) + " of " +
                                               std::to_string(n) +
                                               " records rounds to zero per user");
    }
    if (per_user * cfg_.users.size() > n) {
      throw Error(ErrorCode::kInvalidArgument,
                  std::to_string(cfg_.users.size()) + " users at wr " + std::to_string(wr) +
                      " need more than the " + std::to_string(n) + " training records");
    }
    const auto perm = keyed_permutation(n, derive_key(tk, "users"));
    for (std::size_t u = 0; u < cfg_.users.size(); ++u) {
      for (std::size_t k = u * per_user; k < (u + 1) * per_user; ++k) {
        subsets[u].push_back(train.manifest.records[perm[k]].id);
      }
      std::sort(subsets[u].begin(), subsets[u].end());
    }
    check_user_partition(subsets);
    return subsets;
  }

  void execute(double wr, Key seed, std::size_t unit_index, std::vector<TrialOutcome>& out) const {
    const Key tk = derive_key(cfg_.base_seed, seed);
    const Split split = split_records(full_.manifest.size(), cfg_.holdout, derive_key(tk, "split"));
    if (split.train.empty() || split.test.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "holdout leaves an empty train or test split");
    }
    const Dataset train = subset_dataset(full_, split.train);
    const Dataset test = subset_dataset(full_, split.test);

    std::vector<RoleAudit> audits(roles_.size());
    for (std::size_t r = 0; r < roles_.size(); ++r) {
      WatermarkSpec spec = roles_[r].spec;
      spec.wr = wr;
      validate_spec(spec, train.manifest);
      audits[r].codec = &find_codec(spec.method);
      audits[r].params = audits[r].codec->resolve_params(spec);
    }
    const auto subsets = draw_subsets(train, wr, tk);

    WatermarkedDataset wm{train, {}};
    for (std::size_t r = 0; r < roles_.size(); ++r) {
      if (!roles_[r].embedded) continue;
      WatermarkSpec spec = roles_[r].spec;
      spec.wr = wr;
      wm = watermark_dataset(wm.dataset, spec, subsets[r], std::move(wm.annotations));
    }
    for (std::size_t r = 0; r < roles_.size(); ++r) {
      audits[r].subset = roles_[r].embedded ? subsets[r] : std::vector<std::string>{};
      std::vector<double> ps;
      std::map<int, std::size_t> label_votes;
      for (const auto& id : audits[r].subset) {
        const std::size_t i = *train.manifest.find(id);
        ps.push_back(audit::psnr(wm.dataset.images[i], train.images[i]));
        if (wm.dataset.manifest.records[i].label) ++label_votes[*wm.dataset.manifest.records[i].label];
      }
      audits[r].psnr = opt(finite_mean(ps));
      std::size_t best = 0;
      for (const auto& [label, votes] : label_votes) {
        if (votes > best) {
          best = votes;
          audits[r].target = label;
        }
      }
      if (const auto& rule = roles_[r].spec.label_rule;
          rule && rule->kind == LabelRule::Kind::kTargeted) {
        audits[r].target = rule->target;
      }
    }

    // Training sets: positive = watermarked, negative = never watermarked.
    const bool has_pre = std::any_of(cfg_.attack_chain.begin(), cfg_.attack_chain.end(),
                                     [](const auto& a) { return a.stage == evasion::Stage::kPre; });
    channel::TrainingSet pos_set, neg_set;
    pos_set.task = neg_set.task = cfg_.task;
    pos_set.class_count = neg_set.class_count = train.manifest.class_count;
    for (std::size_t i = 0; i < train.manifest.size(); ++i) {
      const auto& clean_rec = train.manifest.records[i];
      const auto& wm_rec = wm.dataset.manifest.records[i];
      const Key inst = fnv1a(clean_rec.id);
      Image clean = has_pre ? evasion::apply_image_chain(train.images[i], cfg_.attack_chain,
                                                         evasion::Stage::kPre, inst)
                            : train.images[i];
      Image final_img = has_pre ? evasion::apply_image_chain(wm.dataset.images[i], cfg_.attack_chain,
                                                             evasion::Stage::kPre, inst)
                                : wm.dataset.images[i];
      pos_set.ids.push_back(wm_rec.id);
      pos_set.images.push_back(std::move(final_img));
      pos_set.clean.push_back(clean);
      pos_set.labels.push_back(wm_rec.label);
      pos_set.captions.push_back(wm_rec.caption);
      neg_set.ids.push_back(clean_rec.id);
      neg_set.images.push_back(clean);
      neg_set.clean.push_back(std::move(clean));
      neg_set.labels.push_back(clean_rec.label);
      neg_set.captions.push_back(clean_rec.caption);
    }
    pos_set.annotations = wm.annotations;
    for (const auto& role : roles_) {
      if (role.embedded && role.spec.prompt_trigger) {
        pos_set.triggers.push_back(role.spec.prompt_trigger->token);
      }
    }

    const Key ck = derive_key(tk, "channel");
    const fs::path wd = cfg_.workdir.empty()
                            ? fs::path()
                            : cfg_.workdir / ("unit_" + std::to_string(unit_index));
    auto pos = channel::make_channel(cfg_.channel, ck, wd / "positive");
    auto neg = channel::make_channel(cfg_.channel, ck, wd / "negative");
    pos->train(pos_set);
    neg->train(neg_set);

    const auto perm = keyed_permutation(test.manifest.size(), derive_key(tk, "audit"));
    const std::size_t n_audit = std::min(cfg_.audit_samples, perm.size());
    const std::vector<std::size_t> audit_idx(perm.begin(),
                                             perm.begin() + static_cast<std::ptrdiff_t>(n_audit));
    const Key qk = derive_key(tk, "queries");

    for (std::size_t r = 0; r < roles_.size(); ++r) {
      audit_role(r, audits[r], test, audit_idx, qk, *pos, *neg, out[r]);
    }
    for (auto* ch : {pos.get(), neg.get()}) {
      if (auto* ext = dynamic_cast<channel::ExternalChannel*>(ch)) ext->shutdown();
    }
    if (!wd.empty()) {
      std::error_code ec;
      fs::remove_all(wd, ec);
    }
  }

  Image estimated_signature(const Role& role, const RoleAudit& ra, const Dataset& test,
                            const std::vector<std::size_t>& audit_idx, int w, int h, int c) const {
    // The owner applies its own codec to reference images and averages the change.
    Image acc(w, h, c);
    const std::size_t n = std::min<std::size_t>(audit_idx.size(), 32);
    for (std::size_t k = 0; k < n; ++k) {
      Image ref = test.images[audit_idx[k]];
      if (ref.width() != w || ref.height() != h) ref = resize_bilinear(ref, w, h);
      if (ref.channels() != c) continue;
      const Image marked = ra.codec->embed(ref, role.spec, ra.params);
      auto a = acc.data();
      const auto m = marked.data();
      const auto o = ref.data();
      for (std::size_t i = 0; i < a.size(); ++i) a[i] += m[i] - o[i];
    }
    return acc;
  }

  void audit_role(std::size_t r, const RoleAudit& ra, const Dataset& test,
                  const std::vector<std::size_t>& audit_idx, Key qk, channel::Channel& pos,
                  channel::Channel& neg, TrialOutcome& o) const {
    const Role& role = roles_[r];
    const bool multibit = ra.codec->multi_bit() && cfg_.task == Task::kGeneration;
    std::vector<double> ps, ns;

    if (cfg_.task == Task::kGeneration) {
      std::vector<std::string> prompts;
      for (std::size_t a : audit_idx) {
        std::string p = test.manifest.records[a].caption.value_or("");
        if (role.spec.prompt_trigger) {
          p = codecs::insert_prompt_trigger(p, role.spec.prompt_trigger->token,
                                            role.spec.prompt_trigger->position);
        }
        prompts.push_back(std::move(p));
      }
      auto outs_pos = pos.query_images(prompts, qk);
      auto outs_neg = neg.query_images(prompts, qk);
      for (std::size_t q = 0; q < prompts.size(); ++q) {
        outs_pos[q] = evasion::apply_image_chain(outs_pos[q], cfg_.attack_chain,
                                                 evasion::Stage::kPost, q);
        outs_neg[q] = evasion::apply_image_chain(outs_neg[q], cfg_.attack_chain,
                                                 evasion::Stage::kPost, q);
      }
      if (multibit) {
        const codecs::QimConfig qc = qim_config_from_params(ra.params);
        const Bits& bits = role.spec.payload.bits();
        auto score = [&](const Image& img) {
          return audit::bit_accuracy(codecs::extract_bits(img, qc, role.spec.key, bits.size()), bits);
        };
        for (const auto& img : outs_pos) ps.push_back(score(img));
        for (const auto& img : outs_neg) ns.push_back(score(img));
      } else {
        std::map<std::tuple<int, int, int>, Image> sigs;
        auto signature_for = [&](const Image& img) -> const Image& {
          const auto shape = std::make_tuple(img.width(), img.height(), img.channels());
          auto it = sigs.find(shape);
          if (it == sigs.end()) {
            auto sig = ra.codec->signature(role.spec, ra.params, img.width(), img.height(),
                                           img.channels());
            if (!sig) {
              sig = estimated_signature(role, ra, test, audit_idx, img.width(), img.height(),
                                        img.channels());
            }
            it = sigs.emplace(shape, std::move(*sig)).first;
          }
          return it->second;
        };
        for (const auto& img : outs_pos) ps.push_back(codecs::detect_pattern_blind(img, signature_for(img)).score);
        for (const auto& img : outs_neg) ns.push_back(codecs::detect_pattern_blind(img, signature_for(img)).score);
      }
    } else {
      std::vector<Image> queries;
      std::vector<int> true_labels;
      for (std::size_t q = 0; q < audit_idx.size(); ++q) {
        const std::size_t a = audit_idx[q];
        Image img = ra.codec->changes_pixels()
                        ? ra.codec->embed(test.images[a], role.spec, ra.params)
                        : test.images[a];
        queries.push_back(evasion::apply_image_chain(img, cfg_.attack_chain,
                                                     evasion::Stage::kPost, q));
        true_labels.push_back(test.manifest.records[a].label.value_or(0));
      }
      const auto lp = pos.query_logits(queries, qk);
      const auto ln = neg.query_logits(queries, qk);
      const bool untargeted =
          role.spec.label_rule && role.spec.label_rule->kind == LabelRule::Kind::kUntargeted;
      auto score = [&](const channel::Logits& raw, std::size_t q) {
        const auto l = evasion::apply_logit_chain(raw, cfg_.attack_chain, q);
        const auto p = softmax(l);
        if (untargeted) return 1.0 - p.at(static_cast<std::size_t>(true_labels[q]));
        return ra.target < static_cast<int>(p.size()) ? p[ra.target] : 0.0;
      };
      for (std::size_t q = 0; q < queries.size(); ++q) {
        ps.push_back(score(lp[q], q));
        ns.push_back(score(ln[q], q));
      }
    }

    o.positive_scores = ps;
    o.negative_scores = ns;
    o.tpr = audit::tpr_at_fpr({ps, ns}, cfg_.fpr);
    if (multibit) {
      o.positive_statistic = audit::mean(ps);
      o.negative_statistic = audit::mean(ns);
      o.bitacc_mean = o.positive_statistic;
    } else {
      o.positive_statistic = audit::median(ps);
      o.negative_statistic = audit::median(ns);
    }
    o.psnr_mean = ra.psnr;
  }

  const ScenarioConfig& cfg_;
  const Dataset& full_;
  const std::vector<Role>& roles_;
};

// Independent roles were never injected, so both models are negatives for them.
void decide(CellReport& cell, bool multibit, bool injected, double fpr) {
  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < cell.trials.size(); ++i) {
    if (cell.trials[i].valid) valid.push_back(i);
  }
  std::vector<audit::TrialRecord> all;
  for (std::size_t i : valid) {
    TrialOutcome& t = cell.trials[i];
    audit::AuditDecision pd, nd;
    if (multibit) {
      pd = audit::decide_bitacc(*t.positive_statistic);
      nd = audit::decide_bitacc(*t.negative_statistic);
    } else {
      // Calibrate on negative-condition samples of the other seeds only.
      std::vector<double> calib;
      for (std::size_t k : valid) {
        if (k == i) continue;
        const auto& ns = cell.trials[k].negative_scores;
        calib.insert(calib.end(), ns.begin(), ns.end());
      }
      if (calib.empty()) continue;
      pd = audit::decide_score(*t.positive_statistic, calib, fpr);
      nd = audit::decide_score(*t.negative_statistic, calib, fpr);
    }
    t.decisions = {{injected, pd, t.seed}, {false, nd, t.seed}};
    all.insert(all.end(), t.decisions.begin(), t.decisions.end());
  }
  if (!all.empty()) cell.vsr = audit::vsr(all);
}

CellReport aggregate(const Role& role, double wr, std::vector<TrialOutcome> trials,
                     const ScenarioConfig& cfg) {
  CellReport cell;
  cell.label = role.label;
  cell.method = role.spec.method;
  cell.role = role.role;
  cell.wr = wr;
  cell.attack_chain = evasion::chain_label(cfg.attack_chain);
  cell.fpr_target = cfg.fpr;
  cell.trials = std::move(trials);
  std::vector<double> tprs, psnrs, bitaccs;
  for (const auto& t : cell.trials) {
    if (!t.valid) {
      ++cell.invalid_trials;
      if (!t.infrastructure_error && cell.error.empty()) cell.error = t.error;
      continue;
    }
    tprs.push_back(*t.tpr);
    if (t.psnr_mean) psnrs.push_back(*t.psnr_mean);
    if (t.bitacc_mean) bitaccs.push_back(*t.bitacc_mean);
  }
  if (!tprs.empty()) cell.tpr = audit::mean(tprs);
  if (!psnrs.empty()) cell.psnr_mean = audit::mean(psnrs);
  if (!bitaccs.empty()) cell.bitacc_mean = audit::mean(bitaccs);
  const bool multibit = find_codec(role.spec.method).multi_bit() && cfg.task == Task::kGeneration;
  decide(cell, multibit, role.embedded, cfg.fpr);
  return cell;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ordered_json environment(const ScenarioConfig& cfg) {
  ordered_json env;
  env["tool"] = "wmaudit";
  env["version"] = WMAUDIT_VERSION;
  env["protocol_version"] = channel::kProtocolVersion;
  env["seeds"] = cfg.seeds;
  env["base_seed"] = cfg.base_seed;
  env["fpr"] = cfg.fpr;
  env["audit_samples"] = cfg.audit_samples;
  env["holdout"] = cfg.holdout;
  json hashed = cfg.source;
  hashed.erase("jobs");
  env["config_hash"] = hex64(fnv1a(hashed.dump()));
  ordered_json specs = ordered_json::object();
  auto add = [&](const std::string& name, const WatermarkSpec& s) {
    specs[name] = hex64(fnv1a(spec_to_json(s).dump()));
  };
  for (const auto& s : cfg.specs) add(s.id.empty() ? s.method : s.id, s);
  for (const auto& u : cfg.users) add("user:" + u.id, u.spec);
  for (const auto& u : cfg.independent_users) add("independent:" + u.id, u.spec);
  env["spec_hashes"] = specs;
  env["attack_chain"] = ordered_json::parse(evasion::chain_to_json(cfg.attack_chain).dump());
  env["channel"] = {{"kind", cfg.channel.kind},
                    {"config", ordered_json::parse(cfg.channel.config.dump())}};
  env["jpeg"] = {{"library", "libjpeg"},
                 {"lib_version", JPEG_LIB_VERSION},
                 {"baseline", true},
                 {"subsampling", "4:2:0"},
                 {"dct", "islow"}};
  return env;
}

Report run(const ScenarioConfig& cfg) {
  const Dataset full = load_source(cfg);
  const std::vector<Role> roles = make_roles(cfg);
  for (const auto& role : roles) {
    WatermarkSpec probe = role.spec;
    probe.wr = cfg.wr_sweep.front();
    validate_spec(probe, full.manifest);
  }

  struct Unit {
    double wr;
    Key seed;
  };
  std::vector<Unit> units;
  for (double wr : cfg.wr_sweep) {
    for (Key s : cfg.seeds) units.push_back({wr, s});
  }
  std::vector<std::vector<TrialOutcome>> results(units.size());
  const UnitRunner runner(cfg, full, roles);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < units.size(); i = next++) {
      results[i] = runner.run(units[i].wr, units[i].seed, i);
    }
  };
  const int n_threads = std::max(1, std::min<int>(cfg.jobs, static_cast<int>(units.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  Report report;
  report.name = cfg.name;
  report.mode = cfg.mode;
  report.task = cfg.task;
  report.wr_sweep = cfg.wr_sweep;
  report.environment = environment(cfg);
  for (std::size_t r = 0; r < roles.size(); ++r) {
    for (std::size_t w = 0; w < cfg.wr_sweep.size(); ++w) {
      std::vector<TrialOutcome> trials;
      for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
        trials.push_back(std::move(results[w * cfg.seeds.size() + s][r]));
      }
      report.cells.push_back(aggregate(roles[r], cfg.wr_sweep[w], std::move(trials), cfg));
    }
  }
  return report;
}

}  // namespace

Report run_single(const ScenarioConfig& cfg) {
  if (cfg.mode != Mode::kSingle) throw Error(ErrorCode::kInvalidArgument, "not a single-mode config");
  return run(cfg);
}

Report run_multi_watermark(const ScenarioConfig& cfg) {
  if (cfg.mode != Mode::kMultiWatermark) {
    throw Error(ErrorCode::kInvalidArgument, "not a multi-watermark config");
  }
  return run(cfg);
}

Report run_multi_user(const ScenarioConfig& cfg) {
  if (cfg.mode != Mode::kMultiUser) throw Error(ErrorCode::kInvalidArgument, "not a multi-user config");
  return run(cfg);
}

Report run_scenario(const ScenarioConfig& cfg) { return run(cfg); }

}  // namespace wmaudit::scenario
