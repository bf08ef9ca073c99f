#include "modex/error.hpp"

namespace modex {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedRow: return "MalformedRow";
    case ErrorCode::kDanglingEdge: return "DanglingEdge";
    case ErrorCode::kDuplicateNode: return "DuplicateNode";
    case ErrorCode::kMissingStats: return "MissingStats";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kPoolingMismatch: return "PoolingMismatch";
    case ErrorCode::kEmptyTokenList: return "EmptyTokenList";
    case ErrorCode::kMissingEmbedding: return "MissingEmbedding";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kUnsortedSegments: return "UnsortedSegments";
    case ErrorCode::kEmptyMask: return "EmptyMask";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kModeFeatureMismatch: return "ModeFeatureMismatch";
    case ErrorCode::kMissingSelfLoop: return "MissingSelfLoop";
    case ErrorCode::kEmptyTrainSplit: return "EmptyTrainSplit";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kNeighborhoodTooSmall: return "NeighborhoodTooSmall";
    case ErrorCode::kNonpositiveSigma: return "NonpositiveSigma";
    case ErrorCode::kNoTokenEmbeddings: return "NoTokenEmbeddings";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kWriteFailure: return "WriteFailure";
    case ErrorCode::kReadFailure: return "ReadFailure";
    case ErrorCode::kSpecTooSmall: return "SpecTooSmall";
    case ErrorCode::kUnknownNode: return "UnknownNode";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace modex
