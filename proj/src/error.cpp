#include "casegraph/error.hpp"

namespace casegraph {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::unknown_parent: return "unknown_parent";
    case ErrorCode::duplicate_path: return "duplicate_path";
    case ErrorCode::attribute_collision: return "attribute_collision";
    case ErrorCode::unregistered_type: return "unregistered_type";
    case ErrorCode::schema_violation: return "schema_violation";
    case ErrorCode::dangling_endpoint: return "dangling_endpoint";
    case ErrorCode::kind_violation: return "kind_violation";
    case ErrorCode::unknown_item: return "unknown_item";
    case ErrorCode::already_hidden: return "already_hidden";
    case ErrorCode::permission_denied: return "permission_denied";
    case ErrorCode::type_mismatch: return "type_mismatch";
    case ErrorCode::storage_failure: return "storage_failure";
    case ErrorCode::broken_chain: return "broken_chain";
    case ErrorCode::parse_error: return "parse_error";
    case ErrorCode::validation_error: return "validation_error";
    case ErrorCode::duplicate_module: return "duplicate_module";
    case ErrorCode::no_prior_run: return "no_prior_run";
    case ErrorCode::document_mismatch: return "document_mismatch";
    case ErrorCode::ontology_error: return "ontology_error";
    case ErrorCode::layout_diverged: return "layout_diverged";
  }
  return "unknown";
}

}  // namespace casegraph
