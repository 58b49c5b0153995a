#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace powerq {

enum class ErrorCode {
  NonScaledSpeed,
  Unstable,
  NegativeRate,
  BadThreshold,
  BadParameter,
  TruncationTooSmall,
  SingularSystem,
  ToleranceNotMet,
  EmptyFeasibleSet,
  PreferenceViolated,
  UnstableDetected,
  DegenerateBatches,
};

inline constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonScaledSpeed: return "NonScaledSpeed";
    case ErrorCode::Unstable: return "Unstable";
    case ErrorCode::NegativeRate: return "NegativeRate";
    case ErrorCode::BadThreshold: return "BadThreshold";
    case ErrorCode::BadParameter: return "BadParameter";
    case ErrorCode::TruncationTooSmall: return "TruncationTooSmall";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::ToleranceNotMet: return "ToleranceNotMet";
    case ErrorCode::EmptyFeasibleSet: return "EmptyFeasibleSet";
    case ErrorCode::PreferenceViolated: return "PreferenceViolated";
    case ErrorCode::UnstableDetected: return "UnstableDetected";
    case ErrorCode::DegenerateBatches: return "DegenerateBatches";
  }
  return "Unknown";
}

/// Domain error raised by every module. The code identifies the failure
/// class; the message carries the offending values.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace powerq
