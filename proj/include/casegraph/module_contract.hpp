#pragma once

// The run contract every analysis module implements: inputs are a snapshot of
// the triggering item (plus its stored bytes, if any) and a JSON parameter
// document; outputs are candidate nodes and edges that the orchestrator
// commits atomically with attribution and the automation grade cap.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "casegraph/graph_store.hpp"
#include "casegraph/provenance.hpp"
#include "casegraph/schema.hpp"

namespace casegraph {

struct ListenerSpec {
  TypePath type;                      // fires for this type and its descendants
  std::vector<Mutation> mutations{Mutation::create_node};
};

struct ContextAction {
  std::string id;
  std::string label;
  TypePath target;
};

struct PreviewHandler {
  TypePath target;
  std::string renderer;
};

struct ModuleDescriptor {
  std::string id;
  std::vector<std::string> ingest_types;  // media-type patterns: "text/plain", "audio/*", "*/*"
  std::vector<ListenerSpec> listeners;
  std::vector<ContextAction> actions;
  std::vector<PreviewHandler> previews;
};

bool media_type_matches(std::string_view pattern, std::string_view media_type);

struct RunInput {
  NodeRecord item;
  std::optional<std::string> bytes;  // stored object of the item, when it has one
  nlohmann::json parameters = nlohmann::json::object();
  std::uint32_t cascade_depth = 0;
};

// Either an item already in the store or an index into RunOutput::nodes.
struct EndpointRef {
  std::optional<ItemId> existing;
  std::size_t local = 0;

  static EndpointRef item(ItemId id) { return {id, 0}; }
  static EndpointRef candidate(std::size_t index) { return {std::nullopt, index}; }
};

struct CandidateNode {
  NodeCandidate node;
  bool fresh = false;  // bypass label dedup (derived documents)
};

struct CandidateEdge {
  std::string kind;
  EndpointRef from;
  EndpointRef to;
  std::optional<ConfidenceGrade> grade;
  Attributes attributes;
};

struct RunOutput {
  std::vector<CandidateNode> nodes;
  std::vector<CandidateEdge> edges;
};

// Modules hold no mutable state; `run` may be called concurrently.
class AnalysisModule {
 public:
  virtual ~AnalysisModule() = default;
  virtual ModuleDescriptor descriptor() const = 0;
  virtual RunOutput run(const RunInput& input) const = 0;
  // Read-only context actions ("show similar persons"). The default rejects
  // every action.
  virtual nlohmann::json context_action(const std::string& action, const NodeRecord& item,
                                        const nlohmann::json& parameters, const GraphState& state) const;
};

}  // namespace casegraph
