#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ecogdec {

enum class ErrorCode {
  Format,           // missing or malformed container field
  Size,             // payload length disagrees with the header
  Validation,       // non-finite or otherwise invalid values
  Rate,             // sample rates / bin length do not divide evenly
  TooShort,         // series shorter than an operation requires
  UnsupportedRate,  // sample rate too low for the default band plan
  Design,           // filter design would be unstable
  Shape,            // mismatched matrix or channel dimensions
  EmptyFeatures,    // no feature columns supplied
  DegenerateData,   // zero-variance input where variance is required
  DegenerateTarget, // zero-variance target on the validation split
  SelectionFailed,  // stepwise selection kept no column
  Config,           // invalid synthetic-generator or run configuration
  Io,               // filesystem failure
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Format: return "format error";
    case ErrorCode::Size: return "size error";
    case ErrorCode::Validation: return "validation error";
    case ErrorCode::Rate: return "rate error";
    case ErrorCode::TooShort: return "too-short error";
    case ErrorCode::UnsupportedRate: return "unsupported-rate error";
    case ErrorCode::Design: return "design error";
    case ErrorCode::Shape: return "shape error";
    case ErrorCode::EmptyFeatures: return "empty-feature error";
    case ErrorCode::DegenerateData: return "degenerate-data error";
    case ErrorCode::DegenerateTarget: return "degenerate-target error";
    case ErrorCode::SelectionFailed: return "selection-failed error";
    case ErrorCode::Config: return "config error";
    case ErrorCode::Io: return "I/O error";
  }
  return "error";
}

/// Every failure raised by the library carries one of the codes above; the
/// message is prefixed with the code's name so CLI output stays greppable.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ecogdec
