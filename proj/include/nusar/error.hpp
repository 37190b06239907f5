#pragma once

#include <stdexcept>
#include <string>

namespace nusar {

enum class ErrorCode {
  NonStationary,
  Divergent,
  WrongQuadrant,
  NotSPD,
  MethodUnsupported,
  MissingValues,
  MissingInnovations,
  SingularDesign,
  OutOfRange,
  Indeterminate,
  Singular,
  RateUndefined,
  InvalidConfig,
  Io,
};

const char* to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace nusar
