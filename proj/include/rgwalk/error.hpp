#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rgwalk {

enum class ErrorCode {
  RejectsKernel,
  InvalidKernel,
  WindowOverflow,
  GridTooCoarse,
  InvalidDisorder,
  InsufficientReplicas,
  BoundaryContamination,
  DivisibilityError,
  FitUnstable,
  FlowDiverged,
  TooLarge,
  TooManyTerminals,
  SchemaError,
  IoError,
};

std::string_view error_name(ErrorCode code) noexcept;

/// Every module failure surfaces as this exception; the CLI turns `code()` into
/// the machine-readable error object.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }
  [[nodiscard]] std::string_view name() const noexcept { return error_name(code_); }

 private:
  ErrorCode code_;
};

}  // namespace rgwalk
