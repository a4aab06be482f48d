#pragma once

// Case report bundles: the selected items, their full provenance traces,
// the documents they rest on and the log head they were cut from. The JSON
// form is self-contained and can be audited without the store.

#include <string>
#include <vector>

#include <json.hpp>

#include "casegraph/graph_store.hpp"

namespace casegraph::report {

struct Selection {
  std::string title;
  std::vector<ItemId> items;
  bool include_hidden = false;
};

// Throws Error(invalid_argument) for an empty selection and
// Error(unknown_item) listing ids that do not exist (or are hidden while
// include_hidden is off).
nlohmann::json build(const GraphStore& store, const Selection& selection, const Clock& clock);

std::string render_html(const nlohmann::json& bundle);

// Offline audit: entry hashes, chain links between consecutive entries, and
// that every claim (creation, hiding, review, document digest) resolves to
// an entry of the bundle. Returns the problems found; empty means verified.
std::vector<std::string> verify(const nlohmann::json& bundle);

}  // namespace casegraph::report
