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

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "wmaudit/audit.hpp"
#include "wmaudit/channel.hpp"
#include "wmaudit/codec_registry.hpp"
#include "wmaudit/codecs.hpp"
#include "wmaudit/error.hpp"
#include "wmaudit/evasion.hpp"
#include "wmaudit/synthetic.hpp"

using namespace wmaudit;
using namespace wmaudit::channel;

namespace {

struct Fixture {
  Dataset clean;
  WatermarkedDataset wm;
};

Fixture make(Task task, const WatermarkSpec& spec, double wr, std::size_t n = 60, int side = 32) {
  SyntheticOptions o;
  o.count = n;
  o.size = side;
  o.task = task;
  o.key = 17;
  Fixture f;
  f.clean = make_synthetic_dataset(o);
  if (wr > 0) {
    f.wm = watermark_dataset(f.clean, spec, select_watermark_subset(f.clean.manifest, wr, spec.key));
  } else {
    f.wm = {f.clean, {}};
  }
  return f;
}

TrainingSet to_training(const Fixture& f, const std::vector<std::string>& triggers = {}) {
  TrainingSet t;
  t.task = f.clean.manifest.task;
  t.class_count = f.clean.manifest.class_count;
  for (std::size_t i = 0; i < f.clean.manifest.size(); ++i) {
    t.ids.push_back(f.clean.manifest.records[i].id);
    t.images.push_back(f.wm.dataset.images[i]);
    t.clean.push_back(f.clean.images[i]);
    t.labels.push_back(f.wm.dataset.manifest.records[i].label);
    t.captions.push_back(f.wm.dataset.manifest.records[i].caption);
  }
  t.annotations = f.wm.annotations;
  t.triggers = triggers;
  return t;
}

WatermarkSpec gauss_spec() {
  WatermarkSpec s;
  s.method = "gauss";
  s.key = 31;
  return s;
}

std::vector<std::string> prompts(std::size_t n) {
  std::vector<std::string> p;
  for (std::size_t i = 0; i < n; ++i) p.push_back("a scene number " + std::to_string(i));
  return p;
}

}  // namespace

TEST_CASE("memorizer without watermarked records stores a zero residual") {
  const Fixture f = make(Task::kGeneration, gauss_spec(), 0.0);
  SimMemorize m({}, 1);
  m.train(to_training(f));
  REQUIRE(m.groups().size() == 1);
  CHECK(m.groups()[0].count == 0);
  for (double v : m.groups()[0].residual.data()) CHECK(v == 0.0);
}

TEST_CASE("training twice gives byte-equal state") {
  const Fixture f = make(Task::kGeneration, gauss_spec(), 0.2);
  SimMemorize a({}, 4), b({}, 4);
  a.train(to_training(f));
  b.train(to_training(f));
  CHECK(a.serialize() == b.serialize());
  CHECK(a.query_images(prompts(3), 9) == b.query_images(prompts(3), 9));

  const Fixture c = make(Task::kClassification, gauss_spec(), 0.2);
  SimClassify x({}, 4), y({}, 4);
  x.train(to_training(c));
  y.train(to_training(c));
  CHECK(x.serialize() == y.serialize());
}

TEST_CASE("queries before training fail") {
  SimMemorize m({}, 1);
  CHECK_THROWS_AS(m.query_images(prompts(1), 0), Error);
  SimClassify c({}, 1);
  CHECK_THROWS_AS(c.query_logits({Image(8, 8, 3)}, 0), Error);
}

TEST_CASE("full retention without noise passes the carrier through") {
  const WatermarkSpec spec = gauss_spec();
  const Fixture f = make(Task::kGeneration, spec, 1.0);
  MemorizeConfig cfg;
  cfg.noise_sigma = 0.0;
  SimMemorize m(cfg, 2);
  m.train(to_training(f));
  const auto carrier = codecs::gen_carrier(codecs::CarrierKind::kGaussian, spec.key, 32, 32, 3);
  for (const Image& out : m.query_images(prompts(5), 3)) {
    double best = -1.0;
    for (const Image& base : f.clean.images) {
      best = std::max(best, codecs::detect_carrier(out, base, carrier).score);
    }
    CHECK(best > 0.95);
  }
}

TEST_CASE("zero retention forgets a multi-bit payload") {
  // Low-texture outputs decode to a key-determined word, so chance level only
  // holds on average over keys.
  double acc = 0.0;
  int n = 0;
  for (Key key = 1; key <= 8; ++key) {
    WatermarkSpec spec;
    spec.method = "dwtdct";
    spec.key = derive_key(8, key);
    spec.payload = Payload::random(32, spec.key);
    const Fixture f = make(Task::kGeneration, spec, 1.0, 40, 64);
    MemorizeConfig cfg;
    cfg.retention = 0.0;
    SimMemorize m(cfg, 5);
    m.train(to_training(f));
    for (const Image& o : m.query_images(prompts(20), 1)) {
      acc += audit::bit_accuracy(codecs::extract_bits(o, codecs::QimConfig{}, spec.key, 32),
                                 spec.payload.bits());
      ++n;
    }
  }
  acc /= n;
  CHECK(acc >= 40.0);
  CHECK(acc <= 60.0);
}

TEST_CASE("median detection score rises with retention") {
  const WatermarkSpec spec = gauss_spec();
  const Fixture f = make(Task::kGeneration, spec, 0.3);
  const auto params = find_codec("gauss").resolve_params(spec);
  const Image sig = *find_codec("gauss").signature(spec, params, 32, 32, 3);
  double prev = -1e9;
  for (double rho : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    MemorizeConfig cfg;
    cfg.retention = rho;
    SimMemorize m(cfg, 6);
    m.train(to_training(f));
    std::vector<double> s;
    for (const Image& o : m.query_images(prompts(60), 2)) s.push_back(codecs::detect_pattern_blind(o, sig).score);
    const double med = audit::median(s);
    CHECK(med > prev);
    prev = med;
  }
}

TEST_CASE("trigger groups only fire on prompts carrying the token") {
  WatermarkSpec spec = gauss_spec();
  spec.prompt_trigger = PromptTrigger{"tq", TriggerPosition::kPrefix};
  const Fixture f = make(Task::kGeneration, spec, 0.5);
  MemorizeConfig cfg;
  cfg.noise_sigma = 0.0;
  SimMemorize m(cfg, 7);
  m.train(to_training(f, {"tq"}));
  const auto params = find_codec("gauss").resolve_params(spec);
  const Image sig = *find_codec("gauss").signature(spec, params, 32, 32, 3);
  std::vector<double> with, without;
  std::vector<std::string> trig;
  for (const auto& p : prompts(40)) trig.push_back("tq " + p);
  for (const Image& o : m.query_images(trig, 1)) with.push_back(codecs::detect_pattern_blind(o, sig).score);
  for (const Image& o : m.query_images(prompts(40), 1)) without.push_back(codecs::detect_pattern_blind(o, sig).score);
  CHECK(audit::median(with) > oracle::percentile(without, 95));
}

TEST_CASE("classifier trigger gain is monotone and inert without watermarks") {
  const ClassifyConfig cfg;
  CHECK(trigger_gain(cfg, 0) == 0.0);
  double prev = -1;
  for (double m : {1.0, 2.0, 5.0, 20.0, 200.0}) {
    CHECK(trigger_gain(cfg, m) > prev);
    prev = trigger_gain(cfg, m);
  }
  CHECK(trigger_gain(cfg, 1e6) == doctest::Approx(cfg.gain_max));

  WatermarkSpec spec;
  spec.method = "blend";
  spec.key = 3;
  spec.label_rule = LabelRule{LabelRule::Kind::kTargeted, 0};
  const Fixture f = make(Task::kClassification, spec, 0.0, 90);
  SimClassify c({}, 9);
  c.train(to_training(f));
  CHECK(c.triggers().empty());

  // With no learned trigger, marking a query must not steer it to the target.
  const auto params = find_codec("blend").resolve_params(spec);
  std::vector<Image> clean_q, marked_q;
  for (Key k = 0; k < 200; ++k) {
    const Image img = synthetic_image(900 + k, 32, 32).image;
    clean_q.push_back(img);
    marked_q.push_back(find_codec("blend").embed(img, spec, params));
  }
  auto target_rate = [&](const std::vector<Image>& q) {
    int hits = 0;
    for (const auto& l : c.query_logits(q, 1)) {
      hits += std::max_element(l.begin(), l.end()) == l.begin();
    }
    return hits / static_cast<double>(q.size());
  };
  const double clean_rate = target_rate(clean_q), marked_rate = target_rate(marked_q);
  MESSAGE("target rate clean " << clean_rate << " marked " << marked_rate);
  CHECK(marked_rate <= clean_rate + 0.1);
}

TEST_CASE("saturated trigger steers triggered queries to the target") {
  WatermarkSpec spec;
  spec.method = "blend";
  spec.key = 3;
  spec.label_rule = LabelRule{LabelRule::Kind::kTargeted, 2};
  const Fixture f = make(Task::kClassification, spec, 0.5, 120);
  SimClassify c({}, 9);
  c.train(to_training(f));
  REQUIRE(c.triggers().size() == 1);
  const auto params = find_codec("blend").resolve_params(spec);
  std::vector<Image> marked, clean;
  for (Key k = 0; k < 100; ++k) {
    const Image img = synthetic_image(2000 + k, 32, 32).image;
    clean.push_back(img);
    marked.push_back(find_codec("blend").embed(img, spec, params));
  }
  int hits = 0;
  for (const auto& l : c.query_logits(marked, 4)) hits += std::max_element(l.begin(), l.end()) - l.begin() == 2;
  CHECK(hits >= 95);
  double boost = 0.0;
  for (const Image& img : clean) boost += c.triggers()[0].gain * c.presence(c.triggers()[0], img);
  CHECK(boost / 100.0 < 0.05 * c.triggers()[0].gain);

  // Logit attacks compose on the outputs.
  const auto logits = c.query_logits(marked, 4);
  const auto chain = evasion::parse_chain(nlohmann::json::parse(R"([{"kind":"logit-perturb"},{"kind":"one-hot"}])"));
  for (const auto& l : logits) CHECK(evasion::apply_logit_chain(l, chain).size() == 3);
}

TEST_CASE("channel specs validate their options") {
  using nlohmann::json;
  CHECK(channel_spec_from_json(json::parse(R"({"kind":"sim-memorize","config":{"retention":0.5}})")).kind ==
        "sim-memorize");
  CHECK_THROWS_AS(channel_spec_from_json(json::parse(R"({"kind":"sim-memorize","config":{"rho":1}})")), Error);
  CHECK_THROWS_AS(channel_spec_from_json(json::parse(R"({"kind":"tensorflow"})")), Error);
  CHECK_THROWS_AS(channel_spec_from_json(json::parse(R"({"kind":"external"})")), Error);
}
