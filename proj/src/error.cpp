#include "rgwalk/error.hpp"

namespace rgwalk {

std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::RejectsKernel: return "RejectsKernel";
    case ErrorCode::InvalidKernel: return "InvalidKernel";
    case ErrorCode::WindowOverflow: return "WindowOverflow";
    case ErrorCode::GridTooCoarse: return "GridTooCoarse";
    case ErrorCode::InvalidDisorder: return "InvalidDisorder";
    case ErrorCode::InsufficientReplicas: return "InsufficientReplicas";
    case ErrorCode::BoundaryContamination: return "BoundaryContamination";
    case ErrorCode::DivisibilityError: return "DivisibilityError";
    case ErrorCode::FitUnstable: return "FitUnstable";
    case ErrorCode::FlowDiverged: return "FlowDiverged";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::TooManyTerminals: return "TooManyTerminals";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace rgwalk
