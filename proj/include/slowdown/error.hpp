#pragma once

#include <stdexcept>
#include <string>

namespace slowdown {

// Every failure raised by the library carries one of these codes. The CLI maps
// them to process exit codes (see exit_code()).
enum class ErrorCode {
  kUsage,
  kIo,
  kSeriesTooShort,
  kNonUniformSampling,
  kAllGaps,
  kOutOfRange,
  kInvalidArgument,
  kInvalidCorpus,
  kOverlap,
  kPlacementFailure,
  kClassMissing,
  kTooFewSamples,
  kShapeMismatch,
  kStaleCache,
  kWrongHead,
  kDivergedLoss,
  kCorruptModel,
  kCorruptDataset,
  kEmptySeries,
};

const char* error_code_name(ErrorCode code) noexcept;

// Process exit status used by the command-line tool for a given error class.
int exit_code(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

}  // namespace slowdown
