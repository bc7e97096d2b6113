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

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "wmaudit/dataset.hpp"
#include "wmaudit/error.hpp"
#include "wmaudit/image.hpp"
#include "wmaudit/rng.hpp"
#include "wmaudit/watermark_spec.hpp"

// The suspect model: something trained on a (possibly watermarked) dataset
// that can then be queried. Two parametric surrogates run in-process; real
// trainers plug in through a line-delimited JSON protocol on stdio.
namespace wmaudit::channel {

/// What a channel trains on. `clean` holds each record as it would look had
/// it never been watermarked (same pre-attacks applied), which the surrogate
/// channels use to isolate the watermark signal. External trainers only see
/// `images`, `labels` and `captions`.
struct TrainingSet {
  Task task = Task::kClassification;
  std::optional<int> class_count;
  std::vector<std::string> ids;
  std::vector<Image> images;
  std::vector<Image> clean;
  std::vector<std::optional<int>> labels;
  std::vector<std::optional<std::string>> captions;
  std::vector<WatermarkAnnotation> annotations;
  /// Prompt trigger tokens bound by the specs applied to this set.
  std::vector<std::string> triggers;

  std::size_t size() const { return ids.size(); }
  /// Throws kShapeMismatch / kInvalidArgument on inconsistent columns.
  void validate() const;
};

using Logits = std::vector<double>;

class Channel {
 public:
  virtual ~Channel() = default;
  virtual std::string_view kind() const = 0;
  virtual void train(const TrainingSet& data) = 0;
  /// Throws kNotTrained before train, kInvalidArgument on the wrong task.
  virtual std::vector<Image> query_images(const std::vector<std::string>& prompts, Key key);
  virtual std::vector<Logits> query_logits(const std::vector<Image>& images, Key key);
  /// Canonical dump of the trained state; byte-equal for equal inputs and key.
  virtual std::string serialize() const = 0;
};

// ---- sim-memorize ---------------------------------------------------------------

struct MemorizeConfig {
  /// Retention rho in [0, 1].
  double retention = 1.0;
  double noise_sigma = 0.02;
  /// Watermark mass saturates as 1 - exp(-count / mass_scale).
  double mass_scale = 5.0;
};

class SimMemorize final : public Channel {
 public:
  SimMemorize(MemorizeConfig cfg, Key key);
  std::string_view kind() const override { return "sim-memorize"; }
  void train(const TrainingSet& data) override;
  std::vector<Image> query_images(const std::vector<std::string>& prompts, Key key) override;
  std::string serialize() const override;

  struct Group {
    /// Empty for the unconditional group.
    std::string trigger;
    std::size_t count = 0;
    double mass = 0.0;
    Image residual;
  };
  const std::vector<Group>& groups() const { return groups_; }

 private:
  MemorizeConfig cfg_;
  Key key_;
  bool trained_ = false;
  std::vector<Image> base_pool_;
  std::vector<Group> groups_;
};

// ---- sim-classify ---------------------------------------------------------------

struct ClassifyConfig {
  double gain_max = 12.0;
  double gain_scale = 10.0;
  double base_noise = 0.1;
  /// Logit temperature of the nearest-centroid base classifier.
  double beta = 20.0;
  int feature_side = 8;
};

/// g(m) = gain_max * (1 - exp(-m / gain_scale)); monotone in m.
double trigger_gain(const ClassifyConfig& cfg, double mass);

class SimClassify final : public Channel {
 public:
  SimClassify(ClassifyConfig cfg, Key key);
  std::string_view kind() const override { return "sim-classify"; }
  void train(const TrainingSet& data) override;
  std::vector<Logits> query_logits(const std::vector<Image>& images, Key key) override;
  std::string serialize() const override;

  struct Trigger {
    int label = 0;
    std::size_t count = 0;
    double gain = 0.0;
    /// High-passed mean residual, unit norm.
    std::vector<double> template_hp;
    double mu_watermarked = 0.0;
    double mu_clean = 0.0;
  };
  const std::vector<Trigger>& triggers() const { return triggers_; }
  /// Projection-based presence in [0, 1] of one learned trigger.
  double presence(const Trigger& t, const Image& img) const;

 private:
  std::vector<double> features(const Image& img) const;

  ClassifyConfig cfg_;
  Key key_;
  bool trained_ = false;
  int class_count_ = 0;
  int width_ = 0, height_ = 0, channels_ = 0;
  std::vector<std::vector<double>> centroids_;
  std::vector<Trigger> triggers_;
};

// ---- external process -------------------------------------------------------------

inline constexpr int kProtocolVersion = 1;
inline constexpr double kDefaultTimeoutSeconds = 600.0;

struct ExternalConfig {
  std::vector<std::string> command;
  double timeout_s = kDefaultTimeoutSeconds;
  /// Scratch space for PNG exchange; created on demand.
  std::filesystem::path workdir;
};

/// A JSON string (split on spaces) or list of strings. The name "echo-stub"
/// resolves to the bundled conformance stub next to the running executable.
std::vector<std::string> command_from_json(const nlohmann::json& j);

class Subprocess;

/// Supervised adapter process. The child is killed when the channel is dropped.
class ExternalChannel final : public Channel {
 public:
  explicit ExternalChannel(ExternalConfig cfg);
  ~ExternalChannel() override;
  ExternalChannel(const ExternalChannel&) = delete;
  ExternalChannel& operator=(const ExternalChannel&) = delete;

  std::string_view kind() const override { return "external"; }
  /// Launch plus hello handshake. Called lazily by train.
  void start();
  void train(const TrainingSet& data) override;
  std::vector<Image> query_images(const std::vector<std::string>& prompts, Key key) override;
  std::vector<Logits> query_logits(const std::vector<Image>& images, Key key) override;
  std::string serialize() const override;
  /// Sends shutdown and waits for exit 0. Throws on any other outcome.
  void shutdown();

  const std::vector<std::string>& caps() const { return caps_; }
  std::optional<double> benign_accuracy() const { return benign_accuracy_; }

 private:
  nlohmann::json request(const nlohmann::json& msg, std::string_view expect_type);

  ExternalConfig cfg_;
  std::unique_ptr<Subprocess> proc_;
  std::vector<std::string> caps_;
  std::optional<double> benign_accuracy_;
  bool trained_ = false;
  int query_round_ = 0;
};

/// Writes images/<id>.png, manifest.jsonl and annotations.jsonl under `dir`.
void write_training_dir(const TrainingSet& data, const std::filesystem::path& dir);

// ---- factory and conformance ---------------------------------------------------------

struct ChannelSpec {
  std::string kind;
  nlohmann::json config = nlohmann::json::object();
};

ChannelSpec channel_spec_from_json(const nlohmann::json& j);
/// `workdir` is only used by external channels.
std::unique_ptr<Channel> make_channel(const ChannelSpec& spec, Key key,
                                      const std::filesystem::path& workdir = {});

struct CheckStep {
  std::string name;
  bool ok = false;
  std::string detail;
};

struct CheckReport {
  std::vector<CheckStep> steps;
  bool ok() const;
  /// Error code of the first failing step.
  std::optional<ErrorCode> first_error;
};

/// Handshake, train on a tiny synthetic set, one query per advertised
/// capability, shutdown with exit 0.
CheckReport protocol_check(const std::vector<std::string>& command, double timeout_s,
                           const std::filesystem::path& workdir, Key key = 0);

}  // namespace wmaudit::channel
