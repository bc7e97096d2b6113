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

#include <fstream>

#include "doctest.h"
#include "oracles.hpp"
#include "wmaudit/codec_registry.hpp"
#include "wmaudit/dataset.hpp"
#include "wmaudit/error.hpp"
#include "wmaudit/synthetic.hpp"
#include "wmaudit/watermark_spec.hpp"

using namespace wmaudit;
namespace fs = std::filesystem;

namespace {

DatasetManifest manifest_of(std::size_t n) {
  SyntheticOptions o;
  o.count = n;
  o.size = 8;
  return make_synthetic_dataset(o).manifest;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_CASE("imagefolder counts records and classes") {
  const auto root = oracle::scratch_dir("imagefolder");
  for (const char* cls : {"cat", "dog"}) {
    fs::create_directories(root / cls);
    for (int i = 0; i < 3; ++i) {
      write_png(noise_image(i, 8, 8), root / cls / ("im" + std::to_string(i) + ".png"));
    }
  }
  const auto m = load_dataset(root, DatasetFormat::kImageFolder);
  CHECK(m.size() == 6);
  CHECK(m.class_count == 2);
  CHECK(m.task == Task::kClassification);
  CHECK(m.records[0].id == "cat/im0");
  CHECK(m.records[5].label == 1);
  CHECK(serialize_manifest(load_dataset(root, DatasetFormat::kImageFolder)) ==
        serialize_manifest(m));
}

TEST_CASE("jsonl generation record without caption is rejected") {
  const auto root = oracle::scratch_dir("jsonl_missing");
  write_png(noise_image(1, 8, 8), root / "a.png");
  std::ofstream(root / "manifest.jsonl") << "{\"id\":\"a\",\"image\":\"a.png\"}\n";
  LoadOptions o;
  o.task = Task::kGeneration;
  CHECK(code_of([&] { load_dataset(root, DatasetFormat::kJsonl, o); }) == ErrorCode::kMissingField);
}

TEST_CASE("duplicate ids are rejected") {
  const auto root = oracle::scratch_dir("jsonl_dup");
  write_png(noise_image(1, 8, 8), root / "a.png");
  std::ofstream(root / "manifest.jsonl")
      << "{\"id\":\"a\",\"image\":\"a.png\",\"caption\":\"x\"}\n"
      << "{\"id\":\"a\",\"image\":\"a.png\",\"caption\":\"y\"}\n";
  CHECK(code_of([&] { load_dataset(root, DatasetFormat::kJsonl); }) == ErrorCode::kDuplicateId);
}

TEST_CASE("save then load reproduces manifest and pixels") {
  SyntheticOptions o;
  o.count = 6;
  o.size = 16;
  o.task = Task::kClassification;
  const Dataset ds = make_synthetic_dataset(o);
  const auto root = oracle::scratch_dir("roundtrip");
  save_dataset(ds, root);
  const auto m = load_dataset(root, DatasetFormat::kJsonl);
  CHECK(m == ds.manifest);
  const Dataset back = load_images(m, root);
  for (std::size_t i = 0; i < ds.images.size(); ++i) CHECK(back.images[i] == quantize8(ds.images[i]));
}

TEST_CASE("watermark subset size follows rounding") {
  CHECK(select_watermark_subset(manifest_of(100), 0.1, 1).size() == 10);
  CHECK(select_watermark_subset(manifest_of(100), 1.0, 1).size() == 100);
  CHECK(code_of([] { select_watermark_subset(manifest_of(50), 0.001, 1); }) ==
        ErrorCode::kEmptySubset);
  CHECK(code_of([] { select_watermark_subset(manifest_of(50), 0.0, 1); }) ==
        ErrorCode::kInvalidArgument);
  const auto a = select_watermark_subset(manifest_of(100), 0.3, 5);
  CHECK(std::is_sorted(a.begin(), a.end()));
  CHECK(a == select_watermark_subset(manifest_of(100), 0.3, 5));
  CHECK(a != select_watermark_subset(manifest_of(100), 0.3, 6));
}

TEST_CASE("split is disjoint and covers every record") {
  const Split s = split_records(40, 0.25, 3);
  CHECK(s.test.size() == 10);
  CHECK(s.train.size() == 30);
  std::vector<std::size_t> all = s.train;
  all.insert(all.end(), s.test.begin(), s.test.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
}

TEST_CASE("spec json round trip and validation") {
  const auto j = nlohmann::json::parse(R"({"id":"w","method":"dwtdct","key":9,"wr":0.2,
      "payload":"10110010101100101011001010110010"})");
  const WatermarkSpec s = spec_from_json(j);
  CHECK(s.payload.is_multi_bit());
  CHECK(s.payload.bits().size() == 32);
  const WatermarkSpec again = spec_from_json(nlohmann::json::parse(spec_to_json(s).dump()));
  CHECK(again.payload == s.payload);
  CHECK(again.key == 9);

  WatermarkSpec bad = s;
  bad.method = "nope";
  CHECK(code_of([&] { validate_spec(bad, manifest_of(10)); }) == ErrorCode::kUnknownCodec);
  WatermarkSpec no_payload = s;
  no_payload.payload = Payload::one_bit();
  CHECK_THROWS_AS(validate_spec(no_payload, manifest_of(10)), Error);
  WatermarkSpec unknown_param = s;
  unknown_param.params = {{"stepp", 1}};
  CHECK(code_of([&] { validate_spec(unknown_param, manifest_of(10)); }) ==
        ErrorCode::kInvalidArgument);
}

TEST_CASE("annotations survive a save and load") {
  SyntheticOptions o;
  o.count = 10;
  o.size = 16;
  o.task = Task::kClassification;
  const Dataset ds = make_synthetic_dataset(o);
  WatermarkSpec spec;
  spec.id = "b";
  spec.method = "blend";
  spec.key = 3;
  spec.label_rule = LabelRule{LabelRule::Kind::kTargeted, 2};
  const auto subset = select_watermark_subset(ds.manifest, 0.3, 3);
  const auto wm = watermark_dataset(ds, spec, subset);
  CHECK(wm.annotations.size() == 3);
  const auto dir = oracle::scratch_dir("annotations");
  save_annotations(wm.annotations, dir / "annotations.jsonl");
  const auto back = load_annotations(dir / "annotations.jsonl");
  REQUIRE(back.size() == 3);
  CHECK(back[0].record_id == wm.annotations[0].record_id);
  CHECK(back[0].original_label == wm.annotations[0].original_label);
}
