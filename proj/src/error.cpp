#include "mrss/error.hpp"

namespace mrss {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonPsdInnovation: return "NonPsdInnovation";
    case ErrorCode::SingularJointCovariance: return "SingularJointCovariance";
    case ErrorCode::UnsupportedValue: return "UnsupportedValue";
    case ErrorCode::ModeDiverged: return "ModeDiverged";
    case ErrorCode::DegenerateWeights: return "DegenerateWeights";
    case ErrorCode::InitFailed: return "InitFailed";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::NotNested: return "NotNested";
    case ErrorCode::LayoutMismatch: return "LayoutMismatch";
    case ErrorCode::UnknownGroup: return "UnknownGroup";
    case ErrorCode::ScenarioIncomplete: return "ScenarioIncomplete";
    case ErrorCode::UntreatedGroup: return "UntreatedGroup";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::ZeroPredVariance: return "ZeroPredVariance";
    case ErrorCode::Validation: return "Validation";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch:
    case ErrorCode::UnsupportedValue:
    case ErrorCode::NotNested:
    case ErrorCode::LayoutMismatch:
    case ErrorCode::UnknownGroup:
    case ErrorCode::ScenarioIncomplete:
    case ErrorCode::UntreatedGroup:
    case ErrorCode::Validation:
      return true;
    default:
      return false;
  }
}

}  // namespace mrss
