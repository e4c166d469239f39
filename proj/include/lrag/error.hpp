/* Copyright 2026 The lrag Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lrag {

enum class ErrorCode {
  // tensor_store
  MalformedHeader,
  ShapeMismatch,
  UnsupportedDtype,
  NameNotFound,
  InvalidValue,
  IoFailure,
  // linalg
  NoConvergence,
  ZeroMatrix,
  EmptyInput,
  NotNormalized,
  // td_analysis
  AllZeroSpectrum,
  PatternMatchesNothing,
  EmptyAfterSkip,
  TooFewLayers,
  // toy_lm / logit_lens
  InvalidConfig,
  TokenOutOfRange,
  SequenceTooLong,
  LayerOutOfRange,
  DimensionMismatch,
  // retrieval
  EmptyCorpus,
  EmptyAfterTokenization,
  // rep_retriever
  InvalidTemperature,
  NoTrainingData,
  InvalidBatch,
  // pipeline
  ModeMismatch,
  EmptyGold,
  InvalidSpec,
  InvalidExample,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::UnsupportedDtype: return "UnsupportedDtype";
    case ErrorCode::NameNotFound: return "NameNotFound";
    case ErrorCode::InvalidValue: return "InvalidValue";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::ZeroMatrix: return "ZeroMatrix";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::AllZeroSpectrum: return "AllZeroSpectrum";
    case ErrorCode::PatternMatchesNothing: return "PatternMatchesNothing";
    case ErrorCode::EmptyAfterSkip: return "EmptyAfterSkip";
    case ErrorCode::TooFewLayers: return "TooFewLayers";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::TokenOutOfRange: return "TokenOutOfRange";
    case ErrorCode::SequenceTooLong: return "SequenceTooLong";
    case ErrorCode::LayerOutOfRange: return "LayerOutOfRange";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::EmptyAfterTokenization: return "EmptyAfterTokenization";
    case ErrorCode::InvalidTemperature: return "InvalidTemperature";
    case ErrorCode::NoTrainingData: return "NoTrainingData";
    case ErrorCode::InvalidBatch: return "InvalidBatch";
    case ErrorCode::ModeMismatch: return "ModeMismatch";
    case ErrorCode::EmptyGold: return "EmptyGold";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidExample: return "InvalidExample";
  }
  return "Unknown";
}

/// Every failure in the library surfaces as an Error carrying a stable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace lrag
