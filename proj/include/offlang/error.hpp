#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace offlang {

enum class ErrorCode {
  // corpus
  MalformedRow,
  DuplicateId,
  UnknownLabel,
  EmptyFile,
  TooFewSamples,
  InvalidFraction,
  IdCollisionWithDifferentText,
  InvalidSample,
  // classifier
  UnknownBackbone,
  WeightsUnavailable,
  EmptyTrainingSet,
  NonFiniteLoss,
  EmptyInput,
  OutOfRange,
  CorruptCheckpoint,
  VersionMismatch,
  // augmentor
  UnlabeledSample,
  UnparseableResponse,
  AllCallsFailed,
  InsufficientAugmentedSamples,
  IncompleteSheet,
  ClientError,
  // selftrain
  EmptyPool,
  PoolContamination,
  InvalidPolicy,
  // evalkit
  LengthMismatch,
  EmptyMatrix,
  EmptyReportList,
  // cli
  ParseError,
  MissingPath,
  NoBackbones,
};

inline std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::InvalidFraction: return "InvalidFraction";
    case ErrorCode::IdCollisionWithDifferentText: return "IdCollisionWithDifferentText";
    case ErrorCode::InvalidSample: return "InvalidSample";
    case ErrorCode::UnknownBackbone: return "UnknownBackbone";
    case ErrorCode::WeightsUnavailable: return "WeightsUnavailable";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::UnlabeledSample: return "UnlabeledSample";
    case ErrorCode::UnparseableResponse: return "UnparseableResponse";
    case ErrorCode::AllCallsFailed: return "AllCallsFailed";
    case ErrorCode::InsufficientAugmentedSamples: return "InsufficientAugmentedSamples";
    case ErrorCode::IncompleteSheet: return "IncompleteSheet";
    case ErrorCode::ClientError: return "ClientError";
    case ErrorCode::EmptyPool: return "EmptyPool";
    case ErrorCode::PoolContamination: return "PoolContamination";
    case ErrorCode::InvalidPolicy: return "InvalidPolicy";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::EmptyReportList: return "EmptyReportList";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MissingPath: return "MissingPath";
    case ErrorCode::NoBackbones: return "NoBackbones";
  }
  return "Unknown";
}

/// Library-wide exception. Every documented failure mode maps to one ErrorCode.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  std::string_view code_name() const noexcept { return error_code_name(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace offlang
