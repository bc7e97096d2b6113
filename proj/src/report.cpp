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
#include <cstdio>
#include <fstream>

#include "wmaudit/error.hpp"
#include "wmaudit/scenario.hpp"

namespace wmaudit::scenario {

using nlohmann::ordered_json;

namespace {

// Fixed-precision numbers keep reports stable across libm differences.
ordered_json num(const std::optional<double>& v, int digits = 6) {
  if (!v || !std::isfinite(*v)) return nullptr;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, *v);
  return ordered_json::parse(buf);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

ordered_json decision_json(const audit::TrialRecord& t) {
  return {{"ground_truth", t.ground_truth},
          {"verdict", t.decision.verdict},
          {"statistic", num(t.decision.statistic)},
          {"threshold", num(t.decision.threshold)},
          {"method", t.decision.method}};
}

}  // namespace

std::string report_json(const Report& report) {
  ordered_json j;
  j["name"] = report.name;
  j["mode"] = std::string(mode_name(report.mode));
  j["task"] = std::string(task_name(report.task));
  j["wr_sweep"] = report.wr_sweep;
  j["environment"] = report.environment;
  ordered_json cells = ordered_json::array();
  for (const auto& c : report.cells) {
    ordered_json cj;
    cj["label"] = c.label;
    cj["method"] = c.method;
    cj["role"] = c.role;
    cj["wr"] = c.wr;
    cj["attack_chain"] = c.attack_chain;
    cj["fpr_target"] = c.fpr_target;
    cj["tpr"] = num(c.tpr);
    cj["vsr"] = num(c.vsr);
    cj["psnr_mean"] = num(c.psnr_mean);
    cj["bitacc_mean"] = num(c.bitacc_mean);
    cj["trials"] = c.trials.size();
    cj["invalid_trials"] = c.invalid_trials;
    cj["error"] = c.error.empty() ? ordered_json(nullptr) : ordered_json(c.error);
    ordered_json errs = ordered_json::array();
    for (const auto& t : c.trials) {
      if (!t.valid) errs.push_back({{"seed", t.seed}, {"code", t.error_code}, {"message", t.error}});
    }
    cj["trial_errors"] = errs;
    cells.push_back(std::move(cj));
  }
  j["cells"] = std::move(cells);
  return j.dump(2) + "\n";
}

std::string report_csv(const Report& report) {
  std::string out = "label,metric";
  for (double wr : report.wr_sweep) out += "," + fmt("%g", wr);
  out += "\n";

  std::vector<std::string> labels;
  for (const auto& c : report.cells) {
    if (std::find(labels.begin(), labels.end(), c.label) == labels.end()) labels.push_back(c.label);
  }
  for (const auto& label : labels) {
    bool bitacc = false;
    for (double wr : report.wr_sweep) {
      if (const auto* c = report.find(label, wr); c && c->bitacc_mean) bitacc = true;
    }
    std::vector<std::pair<std::string, std::optional<double> CellReport::*>> metrics = {
        {"tpr", &CellReport::tpr}, {"vsr", &CellReport::vsr}, {"psnr", &CellReport::psnr_mean}};
    if (bitacc) metrics.emplace_back("bitacc", &CellReport::bitacc_mean);
    for (const auto& [name, field] : metrics) {
      std::string quoted = label;
      if (quoted.find_first_of(",\"") != std::string::npos) {
        std::string esc;
        for (char ch : quoted) esc += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        quoted = "\"" + esc + "\"";
      }
      out += quoted + "," + name;
      for (double wr : report.wr_sweep) {
        out += ",";
        const auto* c = report.find(label, wr);
        if (!c) continue;
        const bool all_invalid = !c->trials.empty() && c->invalid_trials == c->trials.size();
        if (!c->error.empty() || all_invalid) {
          out += "ERR";
        } else if ((c->*field)) {
          out += fmt("%.4f", *(c->*field));
        }
      }
      out += "\n";
    }
  }
  return out;
}

std::string trials_jsonl(const Report& report) {
  std::string out;
  for (const auto& c : report.cells) {
    for (const auto& t : c.trials) {
      ordered_json j;
      j["cell"] = t.cell;
      j["wr"] = t.wr;
      j["seed"] = t.seed;
      j["valid"] = t.valid;
      if (!t.valid) {
        j["error_code"] = t.error_code;
        j["error"] = t.error;
      }
      j["tpr"] = num(t.tpr);
      j["positive_statistic"] = num(t.positive_statistic);
      j["negative_statistic"] = num(t.negative_statistic);
      j["psnr_mean"] = num(t.psnr_mean);
      j["bitacc_mean"] = num(t.bitacc_mean);
      ordered_json ps = ordered_json::array(), ns = ordered_json::array();
      for (double v : t.positive_scores) ps.push_back(num(v));
      for (double v : t.negative_scores) ns.push_back(num(v));
      j["positive_scores"] = std::move(ps);
      j["negative_scores"] = std::move(ns);
      ordered_json ds = ordered_json::array();
      for (const auto& d : t.decisions) ds.push_back(decision_json(d));
      j["decisions"] = std::move(ds);
      out += j.dump() + "\n";
    }
  }
  return out;
}

void write_report(const Report& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create '" + dir.string() + "': " + ec.message());
  auto put = [&](const char* name, const std::string& body) {
    std::ofstream f(dir / name, std::ios::binary);
    f << body;
    if (!f) throw Error(ErrorCode::kIo, "cannot write '" + (dir / name).string() + "'");
  };
  put("report.json", report_json(report));
  put("report.csv", report_csv(report));
  put("trials.jsonl", trials_jsonl(report));
}

}  // namespace wmaudit::scenario
