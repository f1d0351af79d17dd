// Copyright 2026 The shvprobe Authors
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

#include "shvprobe/errors.hpp"

namespace shvprobe {

const char* ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kTopology:
      return "topology";
    case ErrorKind::kParse:
      return "parse";
    case ErrorKind::kValidation:
      return "validation";
    case ErrorKind::kInsufficientData:
      return "insufficient_data";
    case ErrorKind::kConfiguration:
      return "configuration";
    case ErrorKind::kLookup:
      return "lookup";
    case ErrorKind::kInput:
      return "input";
    case ErrorKind::kEvaluation:
      return "evaluation";
    case ErrorKind::kProtocol:
      return "protocol";
    case ErrorKind::kTraining:
      return "training";
    case ErrorKind::kBudget:
      return "budget";
    case ErrorKind::kDomain:
      return "domain";
  }
  return "unknown";
}

}  // namespace shvprobe
