#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dnrnn {

enum class ErrorCode {
  invalid_parameter,
  invalid_input,
  degenerate_denominator,
  no_real_root,
  degenerate_root,
  convergence,
  domain,
  dimension_mismatch,
  dead_layer,
  label_format,
  dataset,
  format,
  io,
  config,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_parameter: return "invalid-parameter";
    case ErrorCode::invalid_input: return "invalid-input";
    case ErrorCode::degenerate_denominator: return "degenerate-denominator";
    case ErrorCode::no_real_root: return "no-real-root";
    case ErrorCode::degenerate_root: return "degenerate-root";
    case ErrorCode::convergence: return "convergence";
    case ErrorCode::domain: return "domain";
    case ErrorCode::dimension_mismatch: return "dimension-mismatch";
    case ErrorCode::dead_layer: return "dead-layer";
    case ErrorCode::label_format: return "label-format";
    case ErrorCode::dataset: return "dataset";
    case ErrorCode::format: return "format";
    case ErrorCode::io: return "io";
    case ErrorCode::config: return "config";
  }
  return "unknown";
}

// All library failures surface as Error; code() identifies the category.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dnrnn
