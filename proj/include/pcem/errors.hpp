#pragma once

#include <stdexcept>
#include <string>

namespace pcem {

enum class ErrorCode {
  non_square,
  negative_off_diagonal,
  row_sum_nonzero,
  non_convergent,
  invalid_step,
  length_mismatch,
  domain_error,
  dimension_unsupported,
  all_overflowed,
  degenerate_fit,
  quadrature_non_convergent,
  config_error,
  resource_guard,
};

/// Library-wide exception type; `code()` tells callers which contract failed.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

} // namespace pcem
