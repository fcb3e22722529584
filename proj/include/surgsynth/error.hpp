#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace surgsynth {

enum class Errc {
  kBehindCamera,
  kOutOfRange,
  kParseError,
  kEmptyMesh,
  kInvalidParam,
  kJointLimit,
  kResolutionMismatch,
  kIoError,
  kConfigError,
  kDepthOverflow,
  kSchemaError,
  kMissingGt,
  kEmptyInput,
  kDegenerateConfiguration,
  kDiverged,
};

std::string_view to_string(Errc code);

// Every domain failure in the library is reported as an Error carrying a code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string &what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::kBehindCamera: return "BehindCamera";
    case Errc::kOutOfRange: return "OutOfRange";
    case Errc::kParseError: return "ParseError";
    case Errc::kEmptyMesh: return "EmptyMesh";
    case Errc::kInvalidParam: return "InvalidParam";
    case Errc::kJointLimit: return "JointLimit";
    case Errc::kResolutionMismatch: return "ResolutionMismatch";
    case Errc::kIoError: return "IoError";
    case Errc::kConfigError: return "ConfigError";
    case Errc::kDepthOverflow: return "DepthOverflow";
    case Errc::kSchemaError: return "SchemaError";
    case Errc::kMissingGt: return "MissingGt";
    case Errc::kEmptyInput: return "EmptyInput";
    case Errc::kDegenerateConfiguration: return "DegenerateConfiguration";
    case Errc::kDiverged: return "Diverged";
  }
  return "Unknown";
}

}  // namespace surgsynth
