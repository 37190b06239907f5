#include "nusar/error.hpp"

namespace nusar {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonStationary: return "NonStationary";
    case ErrorCode::Divergent: return "Divergent";
    case ErrorCode::WrongQuadrant: return "WrongQuadrant";
    case ErrorCode::NotSPD: return "NotSPD";
    case ErrorCode::MethodUnsupported: return "MethodUnsupported";
    case ErrorCode::MissingValues: return "MissingValues";
    case ErrorCode::MissingInnovations: return "MissingInnovations";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::Indeterminate: return "Indeterminate";
    case ErrorCode::Singular: return "Singular";
    case ErrorCode::RateUndefined: return "RateUndefined";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace nusar
