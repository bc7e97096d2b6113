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

#include <stdexcept>
#include <string>
#include <string_view>

namespace wmaudit {

enum class ErrorCode {
  kInvalidArgument,
  kShapeMismatch,
  kMissingFile,
  kDuplicateId,
  kLabelOutOfRange,
  kMissingField,
  kParse,
  kIo,
  kEmptySubset,
  kCapacity,
  kEmptyPayload,
  kUnknownCodec,
  kUnknownAttack,
  kUserOverlap,
  kEmptyInput,
  kNotTrained,
  kChannelLaunch,
  kChannelTimeout,
  kChannelProtocol,
  kVersionMismatch,
  kChannelAborted,
};

/// Stable kebab-case name, used in reports and CLI messages.
std::string_view error_code_name(ErrorCode code);

/// True for failures of the channel / process infrastructure rather than of
/// the configuration or the data.
bool is_infrastructure_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace wmaudit
