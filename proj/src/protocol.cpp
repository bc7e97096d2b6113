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

// Client side of the adapter wire protocol: one JSON object per line on the
// child's stdin/stdout, one reply per request, PNG files for pixels.

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "wmaudit/channel.hpp"
#include "wmaudit/subprocess.hpp"
#include "wmaudit/synthetic.hpp"

namespace wmaudit::channel {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path self_dir() {
  std::error_code ec;
  const fs::path exe = fs::read_symlink("/proc/self/exe", ec);
  return ec ? fs::path() : exe.parent_path();
}

std::string numbered(std::string_view stem, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%05zu", i);
  return std::string(stem) + buf;
}

bool has_cap(const std::vector<std::string>& caps, std::string_view cap) {
  return std::find(caps.begin(), caps.end(), cap) != caps.end();
}

}  // namespace

std::vector<std::string> command_from_json(const json& j) {
  std::vector<std::string> argv;
  if (j.is_string()) {
    std::istringstream in(j.get<std::string>());
    for (std::string tok; in >> tok;) argv.push_back(tok);
  } else if (j.is_array()) {
    for (const auto& a : j) argv.push_back(a.get<std::string>());
  } else {
    throw Error(ErrorCode::kParse, "command must be a string or a list of strings");
  }
  if (argv.empty()) throw Error(ErrorCode::kInvalidArgument, "empty adapter command");
  if (argv[0] == "echo-stub") {
    const fs::path bundled = self_dir() / "echo_stub";
    if (fs::exists(bundled)) argv[0] = bundled.string();
  }
  return argv;
}

void write_training_dir(const TrainingSet& data, const fs::path& dir) {
  data.validate();
  DatasetManifest m;
  m.task = data.task;
  m.class_count = data.class_count;
  for (std::size_t i = 0; i < data.size(); ++i) {
    Record r;
    r.id = data.ids[i];
    r.image = fs::path("images") / (data.ids[i] + ".png");
    r.label = data.labels[i];
    r.caption = data.captions[i];
    const fs::path target = dir / r.image;
    fs::create_directories(target.parent_path());
    write_png(data.images[i], target);
    m.records.push_back(std::move(r));
  }
  std::sort(m.records.begin(), m.records.end(),
            [](const Record& a, const Record& b) { return a.id < b.id; });
  save_manifest(m, dir / kManifestFile);
  save_annotations(data.annotations, dir / kAnnotationsFile);
}

ExternalChannel::ExternalChannel(ExternalConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.command.empty()) throw Error(ErrorCode::kInvalidArgument, "empty adapter command");
  if (cfg_.workdir.empty()) {
    cfg_.workdir = fs::temp_directory_path() / ("wmaudit-" + std::to_string(::getpid()));
  }
}

ExternalChannel::~ExternalChannel() = default;

json ExternalChannel::request(const json& msg, std::string_view expect_type) {
  const std::string what = msg.at("type").get<std::string>();
  proc_->write_line(msg.dump());
  const auto line = proc_->read_line(cfg_.timeout_s);
  if (!line) {
    const auto status = proc_->wait(1.0);
    throw Error(ErrorCode::kChannelAborted,
                "adapter exited during '" + what + "'" +
                    (status ? " with status " + std::to_string(*status) : std::string()));
  }
  json reply;
  try {
    reply = json::parse(*line);
  } catch (const json::parse_error&) {
    throw Error(ErrorCode::kChannelProtocol, "malformed reply to '" + what + "': " + *line);
  }
  if (!reply.is_object() || !reply.contains("type") || !reply.at("type").is_string()) {
    throw Error(ErrorCode::kChannelProtocol, "reply to '" + what + "' has no type");
  }
  const auto type = reply.at("type").get<std::string>();
  if (type == "error") {
    throw Error(ErrorCode::kChannelProtocol,
                "adapter error on '" + what + "': " + reply.value("message", std::string("?")));
  }
  if (type != expect_type) {
    throw Error(ErrorCode::kChannelProtocol, "expected '" + std::string(expect_type) +
                                                 "' reply to '" + what + "', got '" + type + "'");
  }
  return reply;
}

void ExternalChannel::start() {
  if (proc_) return;
  proc_ = std::make_unique<Subprocess>(cfg_.command);
  const json reply = request({{"type", "hello"}, {"version", kProtocolVersion}}, "hello");
  if (!reply.contains("version") || !reply.at("version").is_number_integer()) {
    throw Error(ErrorCode::kChannelProtocol, "hello reply without an integer version");
  }
  const int version = reply.at("version").get<int>();
  if (version != kProtocolVersion) {
    throw Error(ErrorCode::kVersionMismatch, "adapter speaks version " + std::to_string(version) +
                                                 ", expected " +
                                                 std::to_string(kProtocolVersion));
  }
  caps_.clear();
  if (reply.contains("caps")) {
    for (const auto& c : reply.at("caps")) caps_.push_back(c.get<std::string>());
  }
}

void ExternalChannel::train(const TrainingSet& data) {
  start();
  const bool classify = data.task == Task::kClassification;
  if (!has_cap(caps_, classify ? "classify" : "generate")) {
    throw Error(ErrorCode::kChannelProtocol, std::string("adapter lacks the '") +
                                                 (classify ? "classify" : "generate") +
                                                 "' capability");
  }
  const fs::path dir = fs::absolute(cfg_.workdir / "train");
  fs::remove_all(dir);
  write_training_dir(data, dir);
  const json reply = request({{"type", "train"},
                              {"dataset_dir", dir.string()},
                              {"manifest", (dir / kManifestFile).string()},
                              {"task", task_name(data.task)}},
                             "trained");
  if (reply.contains("benign_accuracy") && reply.at("benign_accuracy").is_number()) {
    benign_accuracy_ = reply.at("benign_accuracy").get<double>();
  }
  trained_ = true;
}

std::vector<Logits> ExternalChannel::query_logits(const std::vector<Image>& images, Key) {
  if (!trained_) throw Error(ErrorCode::kNotTrained, "external channel queried before train");
  if (!has_cap(caps_, "classify")) {
    throw Error(ErrorCode::kChannelProtocol, "adapter lacks the 'classify' capability");
  }
  const fs::path dir = fs::absolute(cfg_.workdir / numbered("query", query_round_++));
  fs::create_directories(dir);
  json paths = json::array();
  for (std::size_t i = 0; i < images.size(); ++i) {
    const fs::path p = dir / (numbered("q", i) + ".png");
    write_png(images[i], p);
    paths.push_back(p.string());
  }
  const json reply = request({{"type", "query_logits"}, {"images", paths}}, "logits");
  std::vector<Logits> out;
  try {
    for (const auto& row : reply.at("values")) out.push_back(row.get<Logits>());
  } catch (const json::exception&) {
    throw Error(ErrorCode::kChannelProtocol, "logits reply is not a list of number lists");
  }
  if (out.size() != images.size()) {
    throw Error(ErrorCode::kChannelProtocol, "adapter returned " + std::to_string(out.size()) +
                                                 " logit rows for " +
                                                 std::to_string(images.size()) + " images");
  }
  for (const auto& row : out) {
    if (row.empty() || !std::all_of(row.begin(), row.end(), [](double v) { return std::isfinite(v); })) {
      throw Error(ErrorCode::kChannelProtocol, "empty or non-finite logit row");
    }
  }
  return out;
}

std::vector<Image> ExternalChannel::query_images(const std::vector<std::string>& prompts, Key) {
  if (!trained_) throw Error(ErrorCode::kNotTrained, "external channel queried before train");
  if (!has_cap(caps_, "generate")) {
    throw Error(ErrorCode::kChannelProtocol, "adapter lacks the 'generate' capability");
  }
  const fs::path dir = fs::absolute(cfg_.workdir / numbered("generated", query_round_++));
  fs::create_directories(dir);
  const json reply =
      request({{"type", "query_images"}, {"prompts", prompts}, {"out_dir", dir.string()}}, "images");
  std::vector<Image> out;
  std::vector<std::string> paths;
  try {
    paths = reply.at("paths").get<std::vector<std::string>>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kChannelProtocol, "images reply without a path list");
  }
  if (paths.size() != prompts.size()) {
    throw Error(ErrorCode::kChannelProtocol, "adapter returned " + std::to_string(paths.size()) +
                                                 " images for " +
                                                 std::to_string(prompts.size()) + " prompts");
  }
  for (const auto& p : paths) {
    try {
      out.push_back(read_png(p));
    } catch (const Error& e) {
      throw Error(ErrorCode::kChannelProtocol, std::string("unreadable generated image: ") + e.what());
    }
  }
  return out;
}

void ExternalChannel::shutdown() {
  if (!proc_) return;
  proc_->write_line(json{{"type", "shutdown"}}.dump());
  const auto status = proc_->wait(cfg_.timeout_s);
  if (!status) throw Error(ErrorCode::kChannelTimeout, "adapter did not exit after shutdown");
  if (*status != 0) {
    throw Error(ErrorCode::kChannelAborted,
                "adapter exited with status " + std::to_string(*status) + " after shutdown");
  }
}

std::string ExternalChannel::serialize() const {
  nlohmann::ordered_json j;
  j["kind"] = kind();
  j["command"] = cfg_.command;
  j["caps"] = caps_;
  j["trained"] = trained_;
  return j.dump();
}

// ---- conformance ------------------------------------------------------------------

bool CheckReport::ok() const {
  return !steps.empty() &&
         std::all_of(steps.begin(), steps.end(), [](const CheckStep& s) { return s.ok; });
}

namespace {

TrainingSet probe_set(Task task, Key key) {
  SyntheticOptions opt;
  opt.count = 12;
  opt.size = 16;
  opt.classes = 3;
  opt.task = task;
  opt.key = key;
  const Dataset ds = make_synthetic_dataset(opt);
  TrainingSet t;
  t.task = task;
  t.class_count = ds.manifest.class_count;
  for (std::size_t i = 0; i < ds.manifest.size(); ++i) {
    t.ids.push_back(ds.manifest.records[i].id);
    t.images.push_back(ds.images[i]);
    t.clean.push_back(ds.images[i]);
    t.labels.push_back(ds.manifest.records[i].label);
    t.captions.push_back(ds.manifest.records[i].caption);
  }
  return t;
}

}  // namespace

CheckReport protocol_check(const std::vector<std::string>& command, double timeout_s,
                           const fs::path& workdir, Key key) {
  CheckReport report;
  ExternalConfig cfg;
  cfg.command = command;
  cfg.timeout_s = timeout_s;
  cfg.workdir = workdir;
  std::unique_ptr<ExternalChannel> ch;

  auto step = [&](const std::string& name, auto&& body) {
    if (!report.steps.empty() && !report.steps.back().ok) return;
    CheckStep s{name, false, ""};
    try {
      s.detail = body();
      s.ok = true;
    } catch (const Error& e) {
      s.detail = e.what();
      if (!report.first_error) report.first_error = e.code();
    } catch (const std::exception& e) {
      s.detail = e.what();
      if (!report.first_error) report.first_error = ErrorCode::kChannelProtocol;
    }
    report.steps.push_back(std::move(s));
  };

  step("handshake", [&] {
    ch = std::make_unique<ExternalChannel>(cfg);
    ch->start();
    std::string caps;
    for (const auto& c : ch->caps()) caps += (caps.empty() ? "" : ",") + c;
    if (!has_cap(ch->caps(), "classify") && !has_cap(ch->caps(), "generate")) {
      throw Error(ErrorCode::kChannelProtocol, "adapter advertises no capability");
    }
    return "version " + std::to_string(kProtocolVersion) + ", caps [" + caps + "]";
  });
  const bool classify = ch && has_cap(ch->caps(), "classify");
  step("train", [&] {
    ch->train(probe_set(classify ? Task::kClassification : Task::kGeneration, key));
    return std::string("12 records");
  });
  if (classify) {
    step("query_logits", [&] {
      const auto set = probe_set(Task::kClassification, derive_key(key, "probe-query"));
      const auto rows = ch->query_logits({set.images[0], set.images[1]}, key);
      for (const auto& r : rows) {
        if (r.size() != 3) throw Error(ErrorCode::kChannelProtocol, "expected 3 logits per row");
      }
      return std::string("2 rows");
    });
  }
  if (ch && has_cap(ch->caps(), "generate")) {
    // A classify-only trainer was trained on a classification set; generation
    // queries need a generation-trained model, so retrain when both caps exist.
    if (classify) {
      step("train_generate", [&] {
        ch->train(probe_set(Task::kGeneration, key));
        return std::string("12 records");
      });
    }
    step("query_images", [&] {
      const auto imgs = ch->query_images({"a red circle", "a blue square"}, key);
      return std::to_string(imgs.size()) + " images";
    });
  }
  step("shutdown", [&] {
    ch->shutdown();
    return std::string("exit 0");
  });
  return report;
}

}  // namespace wmaudit::channel
