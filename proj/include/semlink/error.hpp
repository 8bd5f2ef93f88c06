#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace semlink {

enum class ErrorCode {
  kFileMissing,
  kMalformedLine,
  kEmptyField,
  kInvalidArgument,
  kDimensionMismatch,
  kParse,
  kEmpty,
  kOutOfVocabulary,
  kShapeMismatch,
  kNonFinite,
  kUnknownLabel,
  kDuplicateId,
  kInvalidBox,
  kMissingVector,
  kUnknownEntity,
};

const char* to_string(ErrorCode code);

/// Validation or input error. `line()` is the 1-based source line when the
/// error came from a text file, 0 otherwise.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::size_t line = 0);

  ErrorCode code() const noexcept { return code_; }
  std::size_t line() const noexcept { return line_; }

 private:
  ErrorCode code_;
  std::size_t line_;
};

}  // namespace semlink
