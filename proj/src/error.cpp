#include "semlink/error.hpp"

namespace semlink {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kFileMissing: return "file-missing";
    case ErrorCode::kMalformedLine: return "malformed-line";
    case ErrorCode::kEmptyField: return "empty-field";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kParse: return "parse-error";
    case ErrorCode::kEmpty: return "empty";
    case ErrorCode::kOutOfVocabulary: return "out-of-vocabulary";
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
    case ErrorCode::kNonFinite: return "non-finite";
    case ErrorCode::kUnknownLabel: return "unknown-label";
    case ErrorCode::kDuplicateId: return "duplicate-id";
    case ErrorCode::kInvalidBox: return "invalid-box";
    case ErrorCode::kMissingVector: return "missing-vector";
    case ErrorCode::kUnknownEntity: return "unknown-entity";
  }
  return "unknown";
}

namespace {

std::string format_message(ErrorCode code, const std::string& message, std::size_t line) {
  std::string out = to_string(code);
  if (line > 0) out += " at line " + std::to_string(line);
  out += ": ";
  out += message;
  return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message, std::size_t line)
    : std::runtime_error(format_message(code, message, line)), code_(code), line_(line) {}

}  // namespace semlink
