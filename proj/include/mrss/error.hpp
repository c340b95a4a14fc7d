#pragma once

#include <stdexcept>
#include <string>

namespace mrss {

enum class ErrorCode {
  DimensionMismatch,
  NonPsdInnovation,
  SingularJointCovariance,
  UnsupportedValue,
  ModeDiverged,
  DegenerateWeights,
  InitFailed,
  NotConverged,
  NotNested,
  LayoutMismatch,
  UnknownGroup,
  ScenarioIncomplete,
  UntreatedGroup,
  RankDeficient,
  ZeroPredVariance,
  Validation,
};

const char* to_string(ErrorCode code);

// Validation-type failures (bad input) vs numeric failures; the CLI maps these to exit codes.
bool is_validation_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code),
        detail_(what) {}

  ErrorCode code() const noexcept { return code_; }
  // Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace mrss
