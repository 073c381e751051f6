#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fuq {

enum class ErrorKind {
  InvalidArgument,
  OutOfDomain,
  DimensionMismatch,
  DomainMismatch,
  NonFiniteActivation,
  ShapeMismatch,
  NonFiniteUpdate,
  NonFiniteLoss,
  InsufficientSamples,
  SeedOutOfDomain,
  EmptyBundle,
  NonSquare,
  ZeroRange,
  EmptySet,
  EmptyTruth,
  SizeMismatch,
  ParseError,
  BadMagic,
  VersionUnsupported,
  CorruptPayload,
  IoError,
  InvalidConfig,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::OutOfDomain: return "OutOfDomain";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::DomainMismatch: return "DomainMismatch";
    case ErrorKind::NonFiniteActivation: return "NonFiniteActivation";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonFiniteUpdate: return "NonFiniteUpdate";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::SeedOutOfDomain: return "SeedOutOfDomain";
    case ErrorKind::EmptyBundle: return "EmptyBundle";
    case ErrorKind::NonSquare: return "NonSquare";
    case ErrorKind::ZeroRange: return "ZeroRange";
    case ErrorKind::EmptySet: return "EmptySet";
    case ErrorKind::EmptyTruth: return "EmptyTruth";
    case ErrorKind::SizeMismatch: return "SizeMismatch";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::VersionUnsupported: return "VersionUnsupported";
    case ErrorKind::CorruptPayload: return "CorruptPayload";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

/// Every failure in the library is reported as an `Error` carrying a
/// machine-readable kind; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace fuq
