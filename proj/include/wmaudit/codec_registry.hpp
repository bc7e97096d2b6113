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

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "wmaudit/codecs.hpp"
#include "wmaudit/dataset.hpp"
#include "wmaudit/image.hpp"
#include "wmaudit/watermark_spec.hpp"

namespace wmaudit {

/// A registered watermark method: parameter schema plus the per-image
/// transform applied to every selected record.
class Codec {
 public:
  virtual ~Codec() = default;

  virtual std::string_view id() const = 0;
  virtual std::string_view summary() const = 0;
  virtual nlohmann::json default_params() const = 0;
  virtual bool multi_bit() const { return false; }
  /// False for codecs that only touch captions or labels.
  virtual bool changes_pixels() const { return true; }

  /// Defaults overlaid with spec.params; unknown keys and out-of-range values
  /// throw kInvalidArgument.
  nlohmann::json resolve_params(const WatermarkSpec& spec) const;

  virtual Image embed(const Image& img, const WatermarkSpec& spec,
                      const nlohmann::json& params) const = 0;

  /// Content-independent detection pattern for one-bit codecs, if the method
  /// has one (carriers, blend noise, patch). Warp and hue do not.
  virtual std::optional<Image> signature(const WatermarkSpec& spec, const nlohmann::json& params,
                                         int width, int height, int channels) const;

 protected:
  virtual void check_params(const WatermarkSpec& spec, const nlohmann::json& params) const;
};

/// Throws kUnknownCodec.
const Codec& find_codec(std::string_view id);
std::vector<std::string_view> codec_ids();

/// Registry membership, parameter ranges, payload/task consistency.
void validate_spec(const WatermarkSpec& spec, const DatasetManifest& manifest);

codecs::QimConfig qim_config_from_params(const nlohmann::json& params);
codecs::CarrierParams carrier_params_from_params(const nlohmann::json& params);

struct WatermarkedDataset {
  Dataset dataset;
  std::vector<WatermarkAnnotation> annotations;
};

/// Applies the spec to the records in `subset`: pixel transform, caption
/// trigger (generation) and label rule (classification). Annotations of
/// earlier specs are carried over and new ones appended.
WatermarkedDataset watermark_dataset(const Dataset& input, const WatermarkSpec& spec,
                                     const std::vector<std::string>& subset,
                                     std::vector<WatermarkAnnotation> prior = {});

}  // namespace wmaudit
