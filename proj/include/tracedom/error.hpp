#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tracedom {

enum class ErrorCode {
  ManifestParse,
  MissingImage,
  EmptyTrace,
  InvalidTrace,
  ImageDecode,
  UnsupportedFormat,
  ZeroAreaImage,
  StartStateMismatch,
  UnreachableNode,
  OracleSizeGuard,
  EmptyReference,
  JudgeTransport,
  JudgeProtocol,
  ModelFormat,
  ModelVersion,
  InvalidConfig,
  Precondition,
  Io,
};

inline std::string_view to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::ManifestParse: return "manifest-parse";
    case ErrorCode::MissingImage: return "missing-image";
    case ErrorCode::EmptyTrace: return "empty-trace";
    case ErrorCode::InvalidTrace: return "invalid-trace";
    case ErrorCode::ImageDecode: return "image-decode";
    case ErrorCode::UnsupportedFormat: return "unsupported-format";
    case ErrorCode::ZeroAreaImage: return "zero-area-image";
    case ErrorCode::StartStateMismatch: return "start-state-mismatch";
    case ErrorCode::UnreachableNode: return "unreachable-node";
    case ErrorCode::OracleSizeGuard: return "oracle-size-guard";
    case ErrorCode::EmptyReference: return "empty-reference";
    case ErrorCode::JudgeTransport: return "judge-transport";
    case ErrorCode::JudgeProtocol: return "judge-protocol";
    case ErrorCode::ModelFormat: return "model-format";
    case ErrorCode::ModelVersion: return "model-version";
    case ErrorCode::InvalidConfig: return "invalid-config";
    case ErrorCode::Precondition: return "precondition";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-readable code so
/// callers (the CLI, the judge fallback policy) can branch on the kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tracedom
