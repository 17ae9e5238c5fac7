#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace syssamp {

enum class ErrorCode {
  io,
  parse,
  length_mismatch,
  too_few_units,
  not_divisible,
  zero_variance,
  out_of_range,
  invalid_argument,
  negative_intraclass_factor,
  domain,
  singular,
  no_measured_units,
  non_finite,
  missing_value,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::io: return "io";
    case ErrorCode::parse: return "parse";
    case ErrorCode::length_mismatch: return "length_mismatch";
    case ErrorCode::too_few_units: return "too_few_units";
    case ErrorCode::not_divisible: return "not_divisible";
    case ErrorCode::zero_variance: return "zero_variance";
    case ErrorCode::out_of_range: return "out_of_range";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::negative_intraclass_factor: return "negative_intraclass_factor";
    case ErrorCode::domain: return "domain";
    case ErrorCode::singular: return "singular";
    case ErrorCode::no_measured_units: return "no_measured_units";
    case ErrorCode::non_finite: return "non_finite";
    case ErrorCode::missing_value: return "missing_value";
  }
  return "unknown";
}

// Every failure raised by the library carries a code so callers (and the CLI
// exit-status mapping) can tell input problems apart from numerical ones.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

  [[nodiscard]] bool is_input_error() const noexcept {
    return code_ == ErrorCode::io || code_ == ErrorCode::parse ||
           code_ == ErrorCode::length_mismatch;
  }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace syssamp
