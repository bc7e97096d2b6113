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

#include "wmaudit/error.hpp"

namespace wmaudit {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
    case ErrorCode::kMissingFile: return "missing-file";
    case ErrorCode::kDuplicateId: return "duplicate-id";
    case ErrorCode::kLabelOutOfRange: return "label-out-of-range";
    case ErrorCode::kMissingField: return "missing-field";
    case ErrorCode::kParse: return "parse-error";
    case ErrorCode::kIo: return "io-error";
    case ErrorCode::kEmptySubset: return "empty-subset";
    case ErrorCode::kCapacity: return "capacity-shortfall";
    case ErrorCode::kEmptyPayload: return "empty-payload";
    case ErrorCode::kUnknownCodec: return "unknown-codec";
    case ErrorCode::kUnknownAttack: return "unknown-attack";
    case ErrorCode::kUserOverlap: return "user-overlap";
    case ErrorCode::kEmptyInput: return "empty-input";
    case ErrorCode::kNotTrained: return "not-trained";
    case ErrorCode::kChannelLaunch: return "channel-launch";
    case ErrorCode::kChannelTimeout: return "channel-timeout";
    case ErrorCode::kChannelProtocol: return "channel-protocol";
    case ErrorCode::kVersionMismatch: return "version-mismatch";
    case ErrorCode::kChannelAborted: return "channel-aborted";
  }
  return "unknown";
}

bool is_infrastructure_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::kChannelLaunch:
    case ErrorCode::kChannelTimeout:
    case ErrorCode::kChannelProtocol:
    case ErrorCode::kVersionMismatch:
    case ErrorCode::kChannelAborted:
      return true;
    default:
      return false;
  }
}

}  // namespace wmaudit
