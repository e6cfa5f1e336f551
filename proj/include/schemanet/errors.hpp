// Copyright 2026 The schemanet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
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
#include <utility>
#include <vector>

namespace schemanet {

enum class ErrorCode {
  InvalidKnowledgeBase,
  EmptyIndividualPool,
  UndeclaredType,
  UndefinedAtom,
  CycleDetected,
  SelfArc,
  DuplicateNodeDefinition,
  InvalidNetwork,
  UnknownNode,
  VarNotInScope,
  TooLargeForOracle,
  FactorTooLarge,
  ImpossibleEvidence,
  InvalidEliminationOrder,
};

inline std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidKnowledgeBase: return "InvalidKnowledgeBase";
    case ErrorCode::EmptyIndividualPool: return "EmptyIndividualPool";
    case ErrorCode::UndeclaredType: return "UndeclaredType";
    case ErrorCode::UndefinedAtom: return "UndefinedAtom";
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::SelfArc: return "SelfArc";
    case ErrorCode::DuplicateNodeDefinition: return "DuplicateNodeDefinition";
    case ErrorCode::InvalidNetwork: return "InvalidNetwork";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::VarNotInScope: return "VarNotInScope";
    case ErrorCode::TooLargeForOracle: return "TooLargeForOracle";
    case ErrorCode::FactorTooLarge: return "FactorTooLarge";
    case ErrorCode::ImpossibleEvidence: return "ImpossibleEvidence";
    case ErrorCode::InvalidEliminationOrder: return "InvalidEliminationOrder";
  }
  return "Unknown";
}

// Every failure raised by grounding and inference. `witness` carries the
// offending node names where one exists (the cycle for CycleDetected, the
// node for SelfArc, candidate names for UnknownNode).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::vector<std::string> witness = {})
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code),
        witness_(std::move(witness)) {}

  ErrorCode code() const { return code_; }
  const std::vector<std::string>& witness() const { return witness_; }

 private:
  ErrorCode code_;
  std::vector<std::string> witness_;
};

}  // namespace schemanet
