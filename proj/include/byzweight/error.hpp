#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace byzweight {

enum class ErrorCode {
  InvalidArgument,
  ZeroTotalWeight,
  DegenerateInterval,
  PreprocessInfeasible,
  AlphaTooSmall,
  ValueExceedsU,
  InfeasibleTotal,
  SizeMismatch,
  EmptyClientData,
  WeightSumZero,
  AllMassTrimmed,
  ParseError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ZeroTotalWeight: return "ZeroTotalWeight";
    case ErrorCode::DegenerateInterval: return "DegenerateInterval";
    case ErrorCode::PreprocessInfeasible: return "PreprocessInfeasible";
    case ErrorCode::AlphaTooSmall: return "AlphaTooSmall";
    case ErrorCode::ValueExceedsU: return "ValueExceedsU";
    case ErrorCode::InfeasibleTotal: return "InfeasibleTotal";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::EmptyClientData: return "EmptyClientData";
    case ErrorCode::WeightSumZero: return "WeightSumZero";
    case ErrorCode::AllMassTrimmed: return "AllMassTrimmed";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

// Every failure raised by the library carries one of the codes above so
// callers (and the CLI's exit-code mapping) can branch without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace byzweight
