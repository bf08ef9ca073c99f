#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace modex {

// Domain error categories. The CLI maps every one of these to exit code 1 and
// prints "<code>: <message>" on stderr.
enum class ErrorCode {
  kMalformedRow,
  kDanglingEdge,
  kDuplicateNode,
  kMissingStats,
  kBadMagic,
  kDimensionMismatch,
  kPoolingMismatch,
  kEmptyTokenList,
  kMissingEmbedding,
  kShapeMismatch,
  kUnsortedSegments,
  kEmptyMask,
  kIndexOutOfRange,
  kModeFeatureMismatch,
  kMissingSelfLoop,
  kEmptyTrainSplit,
  kEmptyInput,
  kNeighborhoodTooSmall,
  kNonpositiveSigma,
  kNoTokenEmbeddings,
  kLengthMismatch,
  kWriteFailure,
  kReadFailure,
  kSpecTooSmall,
  kUnknownNode,
  kInvalidArgument,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace modex
