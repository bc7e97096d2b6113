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

// Command-line front end. Exit codes: 0 ok, 2 usage/config,
// 3 quality gate, 4 channel/infrastructure.

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include <unistd.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "wmaudit/audit.hpp"
#include "wmaudit/channel.hpp"
#include "wmaudit/codec_registry.hpp"
#include "wmaudit/dataset.hpp"
#include "wmaudit/error.hpp"
#include "wmaudit/evasion.hpp"
#include "wmaudit/scenario.hpp"

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;
using namespace wmaudit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitGate = 3;
constexpr int kExitInfra = 4;

int exit_code_for(ErrorCode code) { return is_infrastructure_error(code) ? kExitInfra : kExitUsage; }

std::string catalog_text() {
  std::ostringstream os;
  os << "\nCodecs (spec \"method\"; params override the defaults shown):\n";
  for (auto id : codec_ids()) {
    const Codec& c = find_codec(id);
    os << "  " << id << (c.multi_bit() ? " [multi-bit]" : "") << "  " << c.summary()
       << "\n      params " << c.default_params().dump() << "\n";
  }
  os << "\nAttack kinds (chain = JSON list of {\"kind\",\"params\",\"key\",\"stage\"}):\n";
  for (const auto& a : evasion::attack_catalog()) {
    os << "  " << a.kind << (a.on_logits ? " [logits]" : "") << "  " << a.summary
       << "\n      params " << a.defaults.dump() << "\n";
  }
  os << "\nExit codes: 0 ok, 2 usage/config, 3 quality gate, 4 channel/infrastructure\n";
  return os.str();
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

Dataset load_input(const fs::path& dir, const std::string& format) {
  const auto manifest = load_dataset(dir, parse_dataset_format(format));
  return load_images(manifest, dir);
}

struct Common {
  Key seed = 0;
  std::string format = "jsonl";
};

// ---- embed ---------------------------------------------------------------------------

struct EmbedArgs {
  fs::path in, spec, out;
  bool strict = false;
};

int cmd_embed(const EmbedArgs& a, const Common& c) {
  const Dataset ds = load_input(a.in, c.format);
  const WatermarkSpec spec = load_spec(a.spec);
  validate_spec(spec, ds.manifest);
  const auto subset = select_watermark_subset(ds.manifest, spec.wr, derive_key(spec.key, c.seed));
  const auto wm = watermark_dataset(ds, spec, subset);
  save_dataset(wm.dataset, a.out);
  save_annotations(wm.annotations, a.out / kAnnotationsFile);

  std::vector<double> ps;
  std::size_t below = 0;
  for (const auto& id : subset) {
    const std::size_t i = *ds.manifest.find(id);
    const double p = audit::psnr(wm.dataset.images[i], ds.images[i]);
    if (std::isfinite(p)) ps.push_back(p);
    if (p < audit::kPsnrGateDb) ++below;
  }
  std::printf("embedded %zu of %zu records with %s\n", subset.size(), ds.manifest.size(),
              spec.method.c_str());
  if (!ps.empty()) {
    std::printf("psnr min %.2f  median %.2f  max %.2f dB\n",
                *std::min_element(ps.begin(), ps.end()), audit::median(ps),
                *std::max_element(ps.begin(), ps.end()));
  } else {
    std::printf("psnr: pixels unchanged\n");
  }
  if (below > 0) {
    std::fprintf(stderr, "warning: %zu image(s) below the %.0f dB stealth gate\n", below,
                 audit::kPsnrGateDb);
    if (a.strict) return kExitGate;
  }
  return kExitOk;
}

// ---- attack --------------------------------------------------------------------------

struct AttackArgs {
  fs::path in, chain, out;
};

bool find_attack_info_on_logits(const evasion::AttackSpec& s) {
  return evasion::find_attack(s.kind).on_logits;
}

int cmd_attack(const AttackArgs& a, const Common& c) {
  auto chain = evasion::parse_chain(read_json_file(a.chain));
  for (const auto& s : chain) {
    if (find_attack_info_on_logits(s)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "attack '" + s.kind + "' acts on logits and cannot be applied to images");
    }
  }
  for (auto& s : chain) s.key = derive_key(s.key, c.seed);
  const Dataset ds = load_input(a.in, c.format);
  Dataset out = ds;
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    if (chain.empty()) continue;
    Image img = ds.images[i];
    const Key inst = fnv1a(ds.manifest.records[i].id);
    for (const auto& s : chain) img = evasion::apply_attack(img, s, inst);
    out.images[i] = std::move(img);
  }
  if (chain.empty()) {
    // Byte copy so the identity chain cannot perturb anything.
    fs::create_directories(a.out);
    for (const auto& r : ds.manifest.records) {
      fs::create_directories((a.out / r.image).parent_path());
      fs::copy_file(a.in / r.image, a.out / r.image, fs::copy_options::overwrite_existing);
    }
    save_manifest(ds.manifest, a.out / kManifestFile);
  } else {
    save_dataset(out, a.out);
  }
  if (fs::exists(a.in / kAnnotationsFile)) {
    fs::copy_file(a.in / kAnnotationsFile, a.out / kAnnotationsFile,
                  fs::copy_options::overwrite_existing);
  }
  ordered_json meta;
  meta["attack_chain"] = ordered_json::parse(evasion::chain_to_json(chain).dump());
  meta["label"] = evasion::chain_label(chain);
  meta["seed"] = c.seed;
  meta["records"] = ds.manifest.size();
  std::ofstream(a.out / "attack.json") << meta.dump(2) << "\n";
  std::printf("applied %s to %zu records\n", evasion::chain_label(chain).c_str(),
              ds.manifest.size());
  return kExitOk;
}

// ---- audit ---------------------------------------------------------------------------

struct AuditArgs {
  fs::path scores;
  double fpr = audit::kDefaultFpr;
};

std::vector<double> number_list(const json& j, const char* field) {
  if (!j.contains(field) || !j.at(field).is_array()) {
    throw Error(ErrorCode::kParse, std::string("scores file needs a \"") + field + "\" array");
  }
  std::vector<double> v;
  for (const auto& x : j.at(field)) {
    if (!x.is_number()) throw Error(ErrorCode::kParse, std::string(field) + " must hold numbers");
    v.push_back(x.get<double>());
  }
  return v;
}

int cmd_audit(const AuditArgs& a, const Common&) {
  const json j = read_json_file(a.scores);
  if (!j.is_object()) throw Error(ErrorCode::kParse, "scores file must be a JSON object");
  audit::ScoreSet s{number_list(j, "positives"), number_list(j, "negatives")};
  if (s.positives.empty()) throw Error(ErrorCode::kEmptyInput, "no positive scores");
  const auto th = audit::calibrate_threshold(s.negatives, a.fpr);
  const double tpr = audit::tpr_at_fpr(s, a.fpr);
  ordered_json out;
  out["fpr_target"] = a.fpr;
  out["threshold"] = th.tau;
  out["achieved_fpr"] = th.achieved_fpr;
  out["tpr"] = tpr;
  out["low_sample"] = th.low_sample;
  out["positives"] = s.positives.size();
  out["negatives"] = s.negatives.size();
  if (s.positives.size() >= 2 && s.negatives.size() >= 2) {
    const auto t = audit::welch_t_test(s.positives, s.negatives, audit::Tail::kGreater);
    out["welch_t"] = t.t;
    out["welch_df"] = t.df;
    out["welch_p"] = t.p;
  }
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

// ---- run -----------------------------------------------------------------------------

struct RunArgs {
  fs::path config, out, run_dir;
  int jobs = 0;
  bool seed_set = false;
};

std::string timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%S", &tm);
  return buf;
}

int cmd_run(const RunArgs& a, const Common& c) {
  scenario::ScenarioConfig cfg = scenario::load_scenario(a.config);
  if (a.seed_set) cfg.base_seed = c.seed;
  if (a.jobs > 0) cfg.jobs = a.jobs;
  fs::path dir = a.run_dir;
  if (dir.empty()) {
    dir = a.out / (cfg.name + "-" + timestamp());
    for (int k = 2; fs::exists(dir); ++k) {
      dir = a.out / (cfg.name + "-" + timestamp() + "-" + std::to_string(k));
    }
  }
  fs::create_directories(dir);
  cfg.workdir = dir / "work";
  const auto t0 = std::chrono::steady_clock::now();
  const auto report = scenario::run_scenario(cfg);
  scenario::write_report(report, dir);
  std::error_code ec;
  fs::remove_all(cfg.workdir, ec);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::cout << scenario::report_csv(report);
  std::printf("run dir: %s (%.1f s)\n", dir.string().c_str(), secs);
  for (const auto& cell : report.cells) {
    for (const auto& t : cell.trials) {
      if (!t.valid) {
        std::fprintf(stderr, "error: %s wr=%g seed=%llu: %s\n", cell.label.c_str(), cell.wr,
                     static_cast<unsigned long long>(t.seed), t.error.c_str());
      }
    }
  }
  if (report.any_infrastructure_error()) return kExitInfra;
  if (report.any_error()) return kExitUsage;
  return kExitOk;
}

// ---- protocol-check ------------------------------------------------------------------

struct CheckArgs {
  std::vector<std::string> command;
  double timeout = 600.0;
  fs::path workdir;
};

int cmd_protocol_check(const CheckArgs& a, const Common& c) {
  if (a.command.empty()) throw Error(ErrorCode::kInvalidArgument, "no adapter command given");
  fs::path wd = a.workdir;
  bool temp = false;
  if (wd.empty()) {
    wd = fs::temp_directory_path() /
         ("wmaudit-check-" + std::to_string(::getpid()));
    temp = true;
  }
  const auto cmd = channel::command_from_json(json(a.command));
  const auto report = channel::protocol_check(cmd, a.timeout, wd, c.seed);
  for (const auto& s : report.steps) {
    std::printf("%-14s %s%s%s\n", s.name.c_str(), s.ok ? "ok" : "FAIL",
                s.detail.empty() ? "" : "  ", s.detail.c_str());
  }
  if (temp) {
    std::error_code ec;
    fs::remove_all(wd, ec);
  }
  if (report.ok()) {
    std::printf("conformant\n");
    return kExitOk;
  }
  std::printf("not conformant\n");
  return report.first_error ? exit_code_for(*report.first_error) : kExitInfra;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wmaudit: dataset copyright auditing benchmark"};
  app.footer(catalog_text());
  app.require_subcommand(1);
  Common common;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", common.seed, "seed mixed into every keyed draw");
  };

  EmbedArgs ea;
  auto* embed = app.add_subcommand("embed", "watermark a dataset directory");
  embed->add_option("--in", ea.in, "input dataset directory")->required();
  embed->add_option("--spec", ea.spec, "watermark spec JSON")->required();
  embed->add_option("--out", ea.out, "output dataset directory")->required();
  embed->add_option("--format", common.format, "input format: jsonl|imagefolder");
  embed->add_flag("--strict-psnr", ea.strict, "exit 3 when an image misses the PSNR gate");
  add_common(embed);

  AttackArgs aa;
  auto* attack = app.add_subcommand("attack", "apply an attack chain to a dataset directory");
  attack->add_option("--in", aa.in, "input dataset directory")->required();
  attack->add_option("--chain", aa.chain, "attack chain JSON list")->required();
  attack->add_option("--out", aa.out, "output dataset directory")->required();
  attack->add_option("--format", common.format, "input format: jsonl|imagefolder");
  add_common(attack);

  AuditArgs ua;
  auto* aud = app.add_subcommand("audit", "TPR at fixed FPR from a scores file");
  aud->add_option("--scores", ua.scores, "JSON {\"positives\":[...],\"negatives\":[...]}")
      ->required();
  aud->add_option("--fpr", ua.fpr, "target false-positive rate");
  add_common(aud);

  RunArgs ra;
  auto* run = app.add_subcommand("run", "run a scenario config");
  run->add_option("--config", ra.config, "scenario JSON")->required();
  run->add_option("--out", ra.out, "parent directory for the timestamped run dir")
      ->default_val("runs");
  run->add_option("--run-dir", ra.run_dir, "exact run directory (skips the timestamp)");
  run->add_option("--jobs", ra.jobs, "worker threads");
  auto* run_seed = run->add_option("--seed", common.seed, "overrides the config base_seed");

  CheckArgs ca;
  auto* check = app.add_subcommand("protocol-check", "conformance test of a channel adapter");
  check->add_option("--timeout", ca.timeout, "per-request timeout in seconds");
  check->add_option("--workdir", ca.workdir, "scratch directory");
  check->add_option("command", ca.command, "adapter command (after --), or echo-stub")
      ->required();
  add_common(check);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*embed) return cmd_embed(ea, common);
    if (*attack) return cmd_attack(aa, common);
    if (*aud) return cmd_audit(ua, common);
    if (*run) {
      ra.seed_set = run_seed->count() > 0;
      return cmd_run(ra, common);
    }
    if (*check) return cmd_protocol_check(ca, common);
  } catch (const Error& e) {
    std::fprintf(stderr, "wmaudit: %s\n", e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "wmaudit: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}
