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
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "wmaudit/error.hpp"
#include "wmaudit/scenario.hpp"

using namespace wmaudit;
using namespace wmaudit::scenario;
using nlohmann::json;

namespace {

json base_generation() {
  return json::parse(R"({
    "name": "t", "task": "generation",
    "dataset": {"synthetic": {"count": 80, "size": 32, "key": 3}},
    "specs": [{"id": "g", "method": "gauss", "key": 5}],
    "wr_sweep": [0.2], "seeds": [1, 2, 3], "audit_samples": 30
  })");
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

TEST_CASE("config validation") {
  CHECK_NOTHROW(scenario_from_json(base_generation()));
  auto j = base_generation();
  j["seedz"] = 1;
  CHECK(code_of([&] { scenario_from_json(j); }) == ErrorCode::kInvalidArgument);
  j = base_generation();
  j.erase("seeds");
  CHECK(code_of([&] { scenario_from_json(j); }) == ErrorCode::kMissingField);
  j = base_generation();
  j["fpr"] = 1.5;
  CHECK_THROWS_AS(scenario_from_json(j), Error);
  j = base_generation();
  j["mode"] = "multi-watermark";
  CHECK_THROWS_AS(scenario_from_json(j), Error);
  j = base_generation();
  j["attack_chain"] = json::parse(R"([{"kind":"smudge"}])");
  CHECK(code_of([&] { scenario_from_json(j); }) == ErrorCode::kUnknownAttack);
  const auto c = scenario_from_json(base_generation());
  CHECK(c.channel.kind == "sim-memorize");
}

TEST_CASE("an unreachable wr fails its own cell only") {
  auto j = base_generation();
  j["wr_sweep"] = {0.2, 0.001};
  const Report r = run_scenario(scenario_from_json(j));
  REQUIRE(r.cells.size() == 2);
  CHECK(r.cells[0].error.empty());
  CHECK(r.cells[0].tpr.has_value());
  CHECK_FALSE(r.cells[1].error.empty());
  CHECK(r.cells[1].invalid_trials == 3);
  CHECK(r.cells[1].trials[0].error_code == "empty-subset");
  CHECK(r.any_error());
  CHECK_FALSE(r.any_infrastructure_error());
  CHECK(report_csv(r).find("ERR") != std::string::npos);
}

TEST_CASE("worker count does not change the report") {
  auto cfg = scenario_from_json(base_generation());
  cfg.wr_sweep = {0.5, 0.2};
  const std::string one = report_json(run_scenario(cfg));
  cfg.jobs = 3;
  const Report r3 = run_scenario(cfg);
  CHECK(report_json(r3) == one);
  CHECK(report_json(run_scenario(cfg)) == one);
  CHECK(trials_jsonl(r3) == trials_jsonl(run_scenario(cfg)));
}

TEST_CASE("csv layout") {
  const Report r = run_scenario(scenario_from_json(base_generation()));
  std::istringstream in(report_csv(r));
  std::string line;
  std::getline(in, line);
  CHECK(line == "label,metric,0.2");
  std::getline(in, line);
  CHECK(line.rfind("g,tpr,", 0) == 0);
  std::getline(in, line);
  CHECK(line.rfind("g,vsr,", 0) == 0);
  std::getline(in, line);
  CHECK(line.rfind("g,psnr,", 0) == 0);
  const auto j = json::parse(report_json(r));
  CHECK(j["environment"]["tool"] == "wmaudit");
  CHECK(j["cells"][0]["attack_chain"] == "none");
}

TEST_CASE("user partition must be disjoint") {
  CHECK_NOTHROW(check_user_partition({{"a", "b"}, {"c"}}));
  CHECK(code_of([] { check_user_partition({{"a", "b"}, {"b", "c"}}); }) == ErrorCode::kUserOverlap);
}

TEST_CASE("five users are reported separately") {
  auto j = base_generation();
  j["mode"] = "multi-user";
  j.erase("specs");
  j["users"] = json::array();
  for (int u = 0; u < 5; ++u) {
    j["users"].push_back({{"id", "u" + std::to_string(u)}, {"spec", {{"method", "gauss"}, {"key", 100 + u}}}});
  }
  j["wr_sweep"] = {0.1};
  const Report r = run_scenario(scenario_from_json(j));
  REQUIRE(r.cells.size() == 5);
  for (const auto& c : r.cells) {
    CHECK(c.role == "enrolled");
    CHECK(c.error.empty());
  }
  CHECK(r.cells[2].label == "user:u2");
}

TEST_CASE("independent user sharing a key collides with the enrolled one") {
  auto j = base_generation();
  j["mode"] = "multi-user";
  j.erase("specs");
  j["users"] = json::parse(R"([{"id":"a","spec":{"method":"gauss","key":7}}])");
  j["independent_users"] = json::parse(R"([{"id":"b","spec":{"method":"gauss","key":7}}])");
  const Report r = run_scenario(scenario_from_json(j));
  const auto* a = r.find("user:a", 0.2);
  const auto* b = r.find("independent:b", 0.2);
  REQUIRE(a);
  REQUIRE(b);
  CHECK(*b->tpr == doctest::Approx(*a->tpr).epsilon(0.05));
}

TEST_CASE("too many users for the training set is a config error") {
  auto j = base_generation();
  j["mode"] = "multi-user";
  j.erase("specs");
  j["users"] = json::parse(R"([{"id":"a","spec":{"method":"gauss","key":7}},
                               {"id":"b","spec":{"method":"gauss","key":8}}])");
  j["wr_sweep"] = {0.6};
  const Report r = run_scenario(scenario_from_json(j));
  CHECK_FALSE(r.cells[0].error.empty());
}

TEST_CASE("a full-frame overwrite erases an earlier patch") {
  auto j = base_generation();
  j["mode"] = "multi-watermark";
  j["specs"] = json::parse(R"([{"id":"p","method":"patch","key":1,"params":{"size":6}},
                               {"id":"b","method":"blend","key":2,"params":{"alpha":1.0}}])");
  j["wr_sweep"] = {1.0};
  const Report r = run_scenario(scenario_from_json(j));
  const auto& covered = r.cells[0];
  CHECK(covered.role == "covered");
  for (const auto& t : covered.trials) {
    REQUIRE(t.valid);
    CHECK(*t.tpr <= 20.0);
  }
}

TEST_CASE("a killed adapter invalidates trials and flags infrastructure") {
  auto j = json::parse(R"({
    "name": "ext", "task": "classification",
    "dataset": {"synthetic": {"count": 30, "size": 16, "key": 3}},
    "specs": [{"method": "patch", "key": 5, "label_rule": {"kind": "targeted", "target": 1}}],
    "wr_sweep": [0.2], "seeds": [1, 2], "audit_samples": 10
  })");
  j["channel"] = {{"kind", "external"},
                  {"config", {{"command", json::array({(oracle::bin_dir() / "echo_stub").string(), "--die-on-train"})}}}};
  auto cfg = scenario_from_json(j);
  cfg.workdir = oracle::scratch_dir("scenario_die");
  const Report r = run_scenario(cfg);
  CHECK(r.cells[0].invalid_trials == 2);
  CHECK(r.cells[0].error.empty());
  CHECK(r.any_infrastructure_error());
  CHECK_FALSE(r.cells[0].vsr.has_value());
  CHECK(r.cells[0].trials[0].error_code == "channel-aborted");
  const auto rj = json::parse(report_json(r));
  CHECK(rj["cells"][0]["invalid_trials"] == 2);

  j["channel"]["config"]["command"] = "echo-stub";
  cfg = scenario_from_json(j);
  cfg.workdir = oracle::scratch_dir("scenario_ok");
  const Report ok = run_scenario(cfg);
  CHECK(ok.cells[0].invalid_trials == 0);
}

TEST_CASE("report files are written") {
  const Report r = run_scenario(scenario_from_json(base_generation()));
  const auto dir = oracle::scratch_dir("report_files");
  write_report(r, dir);
  for (const char* f : {"report.json", "report.csv", "trials.jsonl"}) CHECK(std::filesystem::exists(dir / f));
  std::ifstream in(dir / "trials.jsonl");
  std::size_t lines = 0;
  for (std::string l; std::getline(in, l);) {
    ++lines;
    const auto t = json::parse(l);
    CHECK(t["positive_scores"].size() == 30);
    CHECK(t["decisions"].size() == 2);
  }
  CHECK(lines == 3);
}
