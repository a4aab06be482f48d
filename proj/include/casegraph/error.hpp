#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace casegraph {

enum class ErrorCode {
  invalid_argument,
  unknown_parent,
  duplicate_path,
  attribute_collision,
  unregistered_type,
  schema_violation,
  dangling_endpoint,
  kind_violation,
  unknown_item,
  already_hidden,
  permission_denied,
  type_mismatch,
  storage_failure,
  broken_chain,
  parse_error,
  validation_error,
  duplicate_module,
  no_prior_run,
  document_mismatch,
  ontology_error,
  layout_diverged,
};

std::string_view to_string(ErrorCode code);

// All library failures surface as this exception; the code is stable and is
// what the HTTP layer maps to status codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace casegraph
