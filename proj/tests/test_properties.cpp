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

// Randomised invariant checks. Each case draws its inputs from a fixed key so
// failures reproduce exactly.

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "wmaudit/audit.hpp"
#include "wmaudit/codec_registry.hpp"
#include "wmaudit/codecs.hpp"
#include "wmaudit/dataset.hpp"
#include "wmaudit/evasion.hpp"
#include "wmaudit/synthetic.hpp"

using namespace wmaudit;
using nlohmann::json;

namespace {

bool in_unit_range(const Image& img) {
  return std::all_of(img.data().begin(), img.data().end(),
                     [](double v) { return v >= 0.0 && v <= 1.0; });
}

}  // namespace

TEST_CASE("every codec preserves shape and range and is a function of its key") {
  Rng rng(1);
  for (int round = 0; round < 6; ++round) {
    const int side = 32 + 16 * static_cast<int>(rng.index(4));
    const Image img = synthetic_image(rng.next_u64(), side, side).image;
    for (auto id : codec_ids()) {
      const Codec& c = find_codec(id);
      WatermarkSpec spec;
      spec.method = std::string(id);
      spec.key = rng.next_u64();
      if (c.multi_bit()) spec.payload = Payload::random(16, spec.key);
      if (id == "prompt-trigger") spec.prompt_trigger = PromptTrigger{"tq"};
      const auto params = c.resolve_params(spec);
      const Image out = c.embed(img, spec, params);
      CHECK(out.same_shape(img));
      CHECK(in_unit_range(out));
      CHECK(out == c.embed(img, spec, params));
      if (!c.changes_pixels()) CHECK(out == img);
    }
  }
}

TEST_CASE("qim round trip holds for any payload length that fits") {
  Rng rng(2);
  const codecs::QimConfig cfg;
  for (int round = 0; round < 15; ++round) {
    const Image img = synthetic_image(rng.next_u64(), 64, 64).image;
    const std::size_t n = 8 + rng.index(57);
    const Payload p = Payload::random(n, rng.next_u64());
    const Key key = rng.next_u64();
    CHECK(codecs::extract_bits(codecs::embed_bits(img, p, cfg, key), cfg, key, n) == p.bits());
  }
}

TEST_CASE("threshold invariants on random score sets") {
  Rng rng(3);
  for (int round = 0; round < 300; ++round) {
    std::vector<double> pos(1 + rng.index(100)), neg(1 + rng.index(100));
    const int levels = 1 + static_cast<int>(rng.index(10));
    for (double& v : pos) v = static_cast<double>(rng.index(levels)) + 0.5 * rng.coin();
    for (double& v : neg) v = static_cast<double>(rng.index(levels));
    double prev_tpr = 101.0;
    for (double fpr : {0.5, 0.2, 0.1, 0.05, 0.01}) {
      const auto t = audit::calibrate_threshold(neg, fpr);
      CHECK(t.achieved_fpr <= fpr);
      CHECK(std::find(neg.begin(), neg.end(), t.tau) != neg.end());
      const double tpr = audit::tpr_at_fpr({pos, neg}, fpr);
      CHECK(tpr >= 0.0);
      CHECK(tpr <= prev_tpr);
      prev_tpr = tpr;
    }
  }
}

TEST_CASE("welch is antisymmetric in its arguments") {
  Rng rng(4);
  for (int round = 0; round < 50; ++round) {
    std::vector<double> a(2 + rng.index(20)), b(2 + rng.index(20));
    for (double& v : a) v = rng.normal() + 0.3;
    for (double& v : b) v = 2 * rng.normal();
    const auto ab = audit::welch_t_test(a, b), ba = audit::welch_t_test(b, a);
    CHECK(ab.t == doctest::Approx(-ba.t).epsilon(1e-12));
    CHECK(ab.p == doctest::Approx(ba.p).epsilon(1e-12));
    CHECK(ab.p >= 0.0);
    CHECK(ab.p <= 1.0);
    const double g = audit::welch_t_test(a, b, audit::Tail::kGreater).p;
    const double l = audit::welch_t_test(b, a, audit::Tail::kGreater).p;
    CHECK(g + l == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("image attacks keep shape and range and are deterministic") {
  Rng rng(5);
  const std::vector<std::string> kinds = {"crop", "rotate", "rescale", "blur", "jpeg"};
  for (int round = 0; round < 10; ++round) {
    const Image img = synthetic_image(rng.next_u64(), 48, 40).image;
    json chain = json::array();
    const std::size_t len = 1 + rng.index(3);
    for (std::size_t k = 0; k < len; ++k) chain.push_back({{"kind", kinds[rng.index(kinds.size())]}});
    const auto specs = evasion::parse_chain(chain);
    const Key inst = rng.next_u64();
    const Image out = evasion::apply_image_chain(img, specs, evasion::Stage::kPost, inst);
    CHECK(out.same_shape(img));
    CHECK(in_unit_range(out));
    CHECK(out == evasion::apply_image_chain(img, specs, evasion::Stage::kPost, inst));
  }
}

TEST_CASE("logit perturbation has exactly the requested relative size") {
  Rng rng(6);
  for (int round = 0; round < 100; ++round) {
    std::vector<double> l(2 + rng.index(10));
    for (double& v : l) v = 5 * rng.normal();
    const double level = rng.uniform();
    const auto out = evasion::perturb_logits(l, level, rng.next_u64());
    double dn = 0.0, n = 0.0;
    for (std::size_t i = 0; i < l.size(); ++i) {
      dn += (out[i] - l[i]) * (out[i] - l[i]);
      n += l[i] * l[i];
    }
    CHECK(std::abs(std::sqrt(dn) - level * std::sqrt(n)) < 1e-9 * std::max(1.0, std::sqrt(n)));
  }
}

TEST_CASE("subset selection is a sorted keyed sample of the right size") {
  Rng rng(7);
  for (int round = 0; round < 50; ++round) {
    SyntheticOptions o;
    o.count = 5 + rng.index(200);
    o.size = 8;
    const auto m = make_synthetic_dataset(o).manifest;
    const double wr = 0.05 + 0.95 * rng.uniform();
    const auto expected = static_cast<std::size_t>(std::llround(wr * static_cast<double>(m.size())));
    if (expected == 0) continue;
    const auto s = select_watermark_subset(m, wr, rng.next_u64());
    CHECK(s.size() == expected);
    CHECK(std::is_sorted(s.begin(), s.end()));
    CHECK(std::adjacent_find(s.begin(), s.end()) == s.end());
    for (const auto& id : s) CHECK(m.find(id).has_value());
  }
}

TEST_CASE("manifest text round trips") {
  Rng rng(8);
  for (int round = 0; round < 10; ++round) {
    SyntheticOptions o;
    o.count = 1 + rng.index(30);
    o.size = 8;
    o.task = rng.coin() ? Task::kGeneration : Task::kClassification;
    o.key = rng.next_u64();
    const auto m = make_synthetic_dataset(o).manifest;
    CHECK(parse_manifest(serialize_manifest(m)) == m);
  }
}

TEST_CASE("keyed permutations are permutations") {
  Rng rng(9);
  for (int round = 0; round < 50; ++round) {
    const std::size_t n = rng.index(300);
    auto p = keyed_permutation(n, rng.next_u64());
    std::sort(p.begin(), p.end());
    for (std::size_t i = 0; i < n; ++i) CHECK(p[i] == i);
  }
}
