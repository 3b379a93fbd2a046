#pragma once

#include <stdexcept>
#include <string>

namespace nsca {

enum class ErrorCode {
  NotPositiveDefinite,
  NoConvergence,
  InvalidWindow,
  DegenerateSeries,
  Diverged,
  SingularToeplitz,
  ModelMismatch,
  BadChannel,
  EmptyClass,
  DegenerateIndex,
  ClassTooSmall,
  BadClass,
  BadComponent,
  ShapeMismatch,
  BadSpec,
  DegenerateTruth,
  BadInput,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::InvalidWindow: return "InvalidWindow";
    case ErrorCode::DegenerateSeries: return "DegenerateSeries";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::SingularToeplitz: return "SingularToeplitz";
    case ErrorCode::ModelMismatch: return "ModelMismatch";
    case ErrorCode::BadChannel: return "BadChannel";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::DegenerateIndex: return "DegenerateIndex";
    case ErrorCode::ClassTooSmall: return "ClassTooSmall";
    case ErrorCode::BadClass: return "BadClass";
    case ErrorCode::BadComponent: return "BadComponent";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::BadSpec: return "BadSpec";
    case ErrorCode::DegenerateTruth: return "DegenerateTruth";
    case ErrorCode::BadInput: return "BadInput";
  }
  return "Unknown";
}

/// Library-wide exception. `code()` identifies the failure class so callers
/// (the CLI in particular) can map it to a recovery action or exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// ClassTooSmall carries the offending class so callers can merge or lengthen it.
class ClassTooSmallError : public Error {
 public:
  ClassTooSmallError(int cls, std::size_t count, std::size_t needed)
      : Error(ErrorCode::ClassTooSmall,
              "class " + std::to_string(cls) + " has " + std::to_string(count) +
                  " samples, needs at least " + std::to_string(needed)),
        cls_(cls) {}

  int class_index() const noexcept { return cls_; }

 private:
  int cls_;
};

}  // namespace nsca
