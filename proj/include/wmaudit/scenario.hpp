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

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "wmaudit/audit.hpp"
#include "wmaudit/channel.hpp"
#include "wmaudit/dataset.hpp"
#include "wmaudit/evasion.hpp"
#include "wmaudit/synthetic.hpp"
#include "wmaudit/watermark_spec.hpp"

namespace wmaudit::scenario {

enum class Mode { kSingle, kMultiWatermark, kMultiUser };

std::string_view mode_name(Mode mode);

struct DatasetSource {
  /// Set when the scenario generates its own data.
  std::optional<SyntheticOptions> synthetic;
  std::filesystem::path root;
  DatasetFormat format = DatasetFormat::kJsonl;
};

struct UserEntry {
  std::string id;
  WatermarkSpec spec;
};

inline const std::vector<double> kClassificationWrSweep = {0.1, 0.01, 0.001, 0.0001};
inline const std::vector<double> kGenerationWrSweep = {0.5, 0.2, 0.1, 0.02};

struct ScenarioConfig {
  std::string name = "scenario";
  Mode mode = Mode::kSingle;
  Task task = Task::kGeneration;
  DatasetSource dataset;
  /// Fraction of records held out as the audit query pool.
  double holdout = 0.4;
  std::vector<WatermarkSpec> specs;
  std::vector<UserEntry> users;
  std::vector<UserEntry> independent_users;
  std::vector<evasion::AttackSpec> attack_chain;
  channel::ChannelSpec channel;
  std::vector<double> wr_sweep;
  std::vector<Key> seeds;
  /// Mixed into every trial key; the CLI --seed flag sets it.
  Key base_seed = 0;
  double fpr = audit::kDefaultFpr;
  std::size_t audit_samples = audit::kMaxAuditSamples;
  /// Worker threads; never affects results.
  int jobs = 1;
  /// Scratch space for external channels.
  std::filesystem::path workdir;
  /// The document the config was parsed from, for fingerprinting.
  nlohmann::json source = nlohmann::json::object();
};

/// Relative dataset roots resolve against `base_dir`. Throws Error on any
/// structural problem (exit code 2 territory).
ScenarioConfig scenario_from_json(const nlohmann::json& j,
                                  const std::filesystem::path& base_dir = {});
ScenarioConfig load_scenario(const std::filesystem::path& path);

struct TrialOutcome {
  std::string cell;
  double wr = 0.0;
  Key seed = 0;
  bool valid = true;
  /// Empty when the trial completed.
  std::string error;
  std::string error_code;
  bool infrastructure_error = false;

  std::optional<double> tpr;
  std::optional<double> positive_statistic;
  std::optional<double> negative_statistic;
  std::optional<double> psnr_mean;
  std::optional<double> bitacc_mean;
  std::vector<double> positive_scores;
  std::vector<double> negative_scores;
  /// Filled during aggregation: positive trial first, then negative.
  std::vector<audit::TrialRecord> decisions;
};

struct CellReport {
  std::string label;
  std::string method;
  std::string role;
  double wr = 0.0;
  std::string attack_chain;
  double fpr_target = audit::kDefaultFpr;
  std::optional<double> tpr;
  std::optional<double> vsr;
  std::optional<double> psnr_mean;
  std::optional<double> bitacc_mean;
  std::size_t invalid_trials = 0;
  /// First configuration/data error of the cell, if any.
  std::string error;
  std::vector<TrialOutcome> trials;
};

struct Report {
  std::string name;
  Mode mode = Mode::kSingle;
  Task task = Task::kGeneration;
  std::vector<double> wr_sweep;
  nlohmann::ordered_json environment;
  std::vector<CellReport> cells;

  bool any_error() const;
  bool any_infrastructure_error() const;
  const CellReport* find(std::string_view label, double wr) const;
};

Report run_single(const ScenarioConfig& cfg);
Report run_multi_watermark(const ScenarioConfig& cfg);
/// Throws kUserOverlap if enrolled subsets intersect.
Report run_multi_user(const ScenarioConfig& cfg);
Report run_scenario(const ScenarioConfig& cfg);

/// Asserts pairwise disjointness of record-id subsets.
void check_user_partition(const std::vector<std::vector<std::string>>& subsets);

// ---- serialisation -------------------------------------------------------------------

std::string report_json(const Report& report);
std::string report_csv(const Report& report);
std::string trials_jsonl(const Report& report);
/// Writes report.json, report.csv and trials.jsonl into `dir`.
void write_report(const Report& report, const std::filesystem::path& dir);

}  // namespace wmaudit::scenario
