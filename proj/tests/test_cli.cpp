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

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "wmaudit/codec_registry.hpp"
#include "wmaudit/evasion.hpp"
#include "wmaudit/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result wmaudit_cli(const std::string& args) {
  const std::string cmd = (oracle::bin_dir() / "wmaudit").string() + " " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), p)) r.out += buf.data();
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

fs::path small_dataset(const std::string& name) {
  const auto dir = oracle::scratch_dir(name);
  wmaudit::SyntheticOptions o;
  o.count = 8;
  o.size = 32;
  wmaudit::save_dataset(wmaudit::make_synthetic_dataset(o), dir / "data");
  return dir;
}

fs::path only_run_dir(const fs::path& parent) {
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(parent)) dirs.push_back(e.path());
  REQUIRE(dirs.size() == 1);
  return dirs[0];
}

}  // namespace

TEST_CASE("help lists codecs and attack kinds with their parameters") {
  const auto r = wmaudit_cli("--help");
  CHECK(r.code == 0);
  for (auto id : wmaudit::codec_ids()) CHECK(r.out.find(std::string(id)) != std::string::npos);
  for (const auto& a : wmaudit::evasion::attack_catalog()) {
    CHECK(r.out.find(std::string(a.kind)) != std::string::npos);
    CHECK(r.out.find(a.defaults.dump()) != std::string::npos);
  }
  CHECK(wmaudit_cli("").code == 2);
  CHECK(wmaudit_cli("frobnicate").code == 2);
}

TEST_CASE("embed: success, missing spec and the strict quality gate") {
  const auto dir = small_dataset("cli_embed");
  write(dir / "spec.json", R"({"id":"g","method":"gauss","key":4,"wr":0.5})");
  auto r = wmaudit_cli("embed --in " + (dir / "data").string() + " --spec " + (dir / "spec.json").string() +
                       " --out " + (dir / "out").string() + " --seed 3");
  CHECK(r.code == 0);
  CHECK(r.out.find("psnr") != std::string::npos);
  CHECK(fs::exists(dir / "out" / "annotations.jsonl"));
  CHECK(fs::exists(dir / "out" / "manifest.jsonl"));

  r = wmaudit_cli("embed --in " + (dir / "data").string() + " --out " + (dir / "o2").string());
  CHECK(r.code == 2);
  r = wmaudit_cli("embed --in " + (dir / "data").string() + " --spec " + (dir / "nope.json").string() +
                  " --out " + (dir / "o2").string());
  CHECK(r.code == 2);

  write(dir / "loud.json", R"({"method":"blend","key":4,"wr":0.5,"params":{"alpha":0.9}})");
  const std::string loud = "embed --in " + (dir / "data").string() + " --spec " + (dir / "loud.json").string() +
                           " --out " + (dir / "o3").string();
  CHECK(wmaudit_cli(loud).code == 0);
  CHECK(wmaudit_cli(loud + " --strict-psnr").code == 3);
}

TEST_CASE("attack: identity copy, bad kind and recorded chain") {
  const auto dir = small_dataset("cli_attack");
  write(dir / "empty.json", "[]");
  auto r = wmaudit_cli("attack --in " + (dir / "data").string() + " --chain " + (dir / "empty.json").string() +
                       " --out " + (dir / "same").string() + " --seed 1");
  CHECK(r.code == 0);
  for (const auto& e : fs::directory_iterator(dir / "data" / "images")) {
    CHECK(slurp(e.path()) == slurp(dir / "same" / "images" / e.path().filename()));
  }
  write(dir / "bad.json", R"([{"kind":"smudge"}])");
  r = wmaudit_cli("attack --in " + (dir / "data").string() + " --chain " + (dir / "bad.json").string() +
                  " --out " + (dir / "bad").string());
  CHECK(r.code == 2);

  write(dir / "jpeg.json", R"([{"kind":"jpeg","params":{"quality":40}}])");
  r = wmaudit_cli("attack --in " + (dir / "data").string() + " --chain " + (dir / "jpeg.json").string() +
                  " --out " + (dir / "jpeg").string());
  CHECK(r.code == 0);
  const auto meta = json::parse(slurp(dir / "jpeg" / "attack.json"));
  CHECK(meta["label"] == "jpeg(quality=40)");
  CHECK(meta["attack_chain"][0]["params"]["quality"] == 40);
}

TEST_CASE("audit: separation, fpr pass-through and malformed input") {
  const auto dir = oracle::scratch_dir("cli_audit");
  json scores = {{"positives", json::array()}, {"negatives", json::array()}};
  for (int i = 0; i < 100; ++i) {
    scores["negatives"].push_back(i);
    scores["positives"].push_back(200 + i);
  }
  write(dir / "s.json", scores.dump());
  auto r = wmaudit_cli("audit --scores " + (dir / "s.json").string() + " --seed 2");
  CHECK(r.code == 0);
  auto out = json::parse(r.out);
  CHECK(out["tpr"] == 100.0);
  CHECK(out["threshold"] == 94.0);
  r = wmaudit_cli("audit --scores " + (dir / "s.json").string() + " --fpr 0.01");
  out = json::parse(r.out);
  CHECK(out["threshold"] == 98.0);
  write(dir / "bad.json", R"({"positives": [1, "x"]})");
  CHECK(wmaudit_cli("audit --scores " + (dir / "bad.json").string()).code == 2);
  write(dir / "junk.json", "not json");
  CHECK(wmaudit_cli("audit --scores " + (dir / "junk.json").string()).code == 2);
}

TEST_CASE("run: byte-identical reruns and exit codes") {
  const auto dir = oracle::scratch_dir("cli_run");
  const json cfg = json::parse(R"({
    "name": "cli", "task": "generation",
    "dataset": {"synthetic": {"count": 60, "size": 32, "key": 3}},
    "specs": [{"id": "g", "method": "gauss", "key": 5}],
    "attack_chain": [{"kind": "jpeg"}],
    "wr_sweep": [0.5, 0.2], "seeds": [1, 2], "audit_samples": 20
  })");
  write(dir / "cfg.json", cfg.dump());
  CHECK(wmaudit_cli("run --config " + (dir / "cfg.json").string() + " --out " + (dir / "a").string()).code == 0);
  CHECK(wmaudit_cli("run --config " + (dir / "cfg.json").string() + " --out " + (dir / "b").string() +
                    " --jobs 2").code == 0);
  const auto a = only_run_dir(dir / "a"), b = only_run_dir(dir / "b");
  CHECK(a.filename().string().rfind("cli-", 0) == 0);
  for (const char* f : {"report.json", "report.csv", "trials.jsonl"}) CHECK(slurp(a / f) == slurp(b / f));

  CHECK(wmaudit_cli("run --config " + (dir / "cfg.json").string() + " --run-dir " + (dir / "s7").string() +
                    " --seed 7").code == 0);
  CHECK(slurp(dir / "s7" / "report.csv") != slurp(a / "report.csv"));

  json missing = cfg;
  missing["task"] = "classification";
  missing["specs"][0]["label_rule"] = {{"kind", "targeted"}, {"target", 0}};
  missing["channel"] = {{"kind", "external"}, {"config", {{"command", "/nonexistent/adapter"}}}};
  write(dir / "missing.json", missing.dump());
  CHECK(wmaudit_cli("run --config " + (dir / "missing.json").string() + " --out " + (dir / "m").string()).code == 4);

  json bad = cfg;
  bad["wr_sweep"] = {0.001};
  write(dir / "bad.json", bad.dump());
  CHECK(wmaudit_cli("run --config " + (dir / "bad.json").string() + " --out " + (dir / "x").string()).code == 2);
  write(dir / "broken.json", "{");
  CHECK(wmaudit_cli("run --config " + (dir / "broken.json").string() + " --out " + (dir / "x").string()).code == 2);
}

TEST_CASE("protocol-check against the bundled stub") {
  CHECK(wmaudit_cli("protocol-check --seed 1 -- echo-stub").code == 0);
  CHECK(wmaudit_cli("protocol-check -- echo-stub --version 2").code == 4);
  const auto r = wmaudit_cli("protocol-check --timeout 0.5 -- echo-stub --hang-on-train");
  CHECK(r.code == 4);
  CHECK(r.out.find("channel-timeout") != std::string::npos);
}
