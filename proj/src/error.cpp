#include "slowdown/error.hpp"

namespace slowdown {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kUsage: return "UsageError";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kSeriesTooShort: return "SeriesTooShort";
    case ErrorCode::kNonUniformSampling: return "NonUniformSampling";
    case ErrorCode::kAllGaps: return "AllGaps";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kInvalidCorpus: return "InvalidCorpus";
    case ErrorCode::kOverlap: return "Overlap";
    case ErrorCode::kPlacementFailure: return "PlacementFailure";
    case ErrorCode::kClassMissing: return "ClassMissing";
    case ErrorCode::kTooFewSamples: return "TooFewSamples";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kStaleCache: return "StaleCache";
    case ErrorCode::kWrongHead: return "WrongHead";
    case ErrorCode::kDivergedLoss: return "DivergedLoss";
    case ErrorCode::kCorruptModel: return "CorruptModel";
    case ErrorCode::kCorruptDataset: return "CorruptDataset";
    case ErrorCode::kEmptySeries: return "EmptySeries";
  }
  return "Error";
}

int exit_code(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kUsage: return 2;
    case ErrorCode::kIo: return 3;
    case ErrorCode::kSeriesTooShort:
    case ErrorCode::kNonUniformSampling:
    case ErrorCode::kAllGaps:
    case ErrorCode::kOutOfRange:
    case ErrorCode::kInvalidCorpus:
    case ErrorCode::kEmptySeries:
      return 4;
    case ErrorCode::kOverlap:
    case ErrorCode::kPlacementFailure:
      return 5;
    case ErrorCode::kClassMissing:
    case ErrorCode::kTooFewSamples:
    case ErrorCode::kCorruptDataset:
      return 6;
    case ErrorCode::kDivergedLoss: return 7;
    case ErrorCode::kCorruptModel: return 8;
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kShapeMismatch:
    case ErrorCode::kStaleCache:
    case ErrorCode::kWrongHead:
      return 9;
  }
  return 1;
}

void fail(ErrorCode code, const std::string& what) {
  throw Error(code, std::string(error_code_name(code)) + ": " + what);
}

}  // namespace slowdown
