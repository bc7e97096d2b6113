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

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "wmaudit/image.hpp"
#include "wmaudit/rng.hpp"

// Attacks a dataset user may apply to hide watermark traces, either to the
// training data (pre) or to model outputs (post).
namespace wmaudit::evasion {

/// Central crop keeping `keep` of the area, resized back to the input shape.
/// Throws kInvalidArgument when keep is outside (0, 1] or the crop is < 8 px.
Image crop_resize(const Image& img, double keep);

/// Rotation about the image centre, bilinear with reflected borders.
Image rotate(const Image& img, double degrees);

/// Down-sample by `factor` and back up to the input shape.
Image rescale(const Image& img, double factor);

/// Normalised 1-D kernel of radius ceil(3 sigma); sigma 0 is the identity.
std::vector<double> gaussian_kernel(double sigma);
/// Separable Gaussian, replicated borders.
Image gaussian_blur(const Image& img, double sigma);

/// Baseline libjpeg round trip (4:2:0 for colour, islow DCT both ways).
Image jpeg_compress(const Image& img, int quality);

/// argmax -> 1, everything else 0; ties go to the lowest index.
std::vector<double> one_hot(std::span<const double> logits);
/// logits + level * |logits|_2 * u with u a keyed unit-norm Gaussian direction.
std::vector<double> perturb_logits(std::span<const double> logits, double level, Key key);

enum class Stage { kPre, kPost };

struct AttackSpec {
  std::string kind;
  nlohmann::json params = nlohmann::json::object();
  Key key = 0;
  /// Pre attacks hit the training images, post attacks the model outputs.
  Stage stage = Stage::kPost;
};

struct AttackInfo {
  std::string_view kind;
  std::string_view summary;
  nlohmann::json defaults;
  bool on_logits = false;
};

const std::vector<AttackInfo>& attack_catalog();
/// Throws kUnknownAttack.
const AttackInfo& find_attack(std::string_view kind);

/// Accepts {"kind": ..., "params": {...}, "key": n, "stage": "pre"|"post"}.
/// Parameters are merged over the catalog defaults; unknown ones throw.
AttackSpec attack_from_json(const nlohmann::json& j);
nlohmann::json attack_to_json(const AttackSpec& spec);
/// A JSON list of attack objects; an empty list is the identity chain.
std::vector<AttackSpec> parse_chain(const nlohmann::json& j);
nlohmann::json chain_to_json(const std::vector<AttackSpec>& chain);
/// Compact label such as "jpeg(quality=70)+blur(sigma=1)", or "none".
std::string chain_label(const std::vector<AttackSpec>& chain);

/// `instance` distinguishes per-image draws (e.g. rotation sign).
Image apply_attack(const Image& img, const AttackSpec& spec, Key instance = 0);
std::vector<double> apply_logit_attack(std::span<const double> logits, const AttackSpec& spec,
                                       Key instance = 0);

/// Image attacks of the given stage, in order. Logit attacks are skipped.
Image apply_image_chain(const Image& img, const std::vector<AttackSpec>& chain, Stage stage,
                        Key instance = 0);
std::vector<double> apply_logit_chain(std::span<const double> logits,
                                      const std::vector<AttackSpec>& chain, Key instance = 0);

}  // namespace wmaudit::evasion
