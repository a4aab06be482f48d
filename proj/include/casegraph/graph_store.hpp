#pragma once

// Runtime of the integrated data model. The store is a pure fold over the
// provenance log: every mutation is appended to the log first and applied to
// the in-memory state only after the append returned.

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "casegraph/clock.hpp"
#include "casegraph/provenance.hpp"
#include "casegraph/schema.hpp"

namespace casegraph {

struct ItemId {
  std::uint64_t value = 0;
  friend auto operator<=>(const ItemId&, const ItemId&) = default;
};

struct ItemIdHash {
  std::size_t operator()(ItemId id) const noexcept { return std::hash<std::uint64_t>{}(id.value); }
};

// -- attribute values -------------------------------------------------------

struct Timestamp {
  EpochSeconds value = 0;
  friend bool operator==(const Timestamp&, const Timestamp&) = default;
};
struct Interval {  // half-open [start, end)
  EpochSeconds start = 0;
  EpochSeconds end = 0;
  friend bool operator==(const Interval&, const Interval&) = default;
};
struct GeoPoint {
  double lat = 0;
  double lon = 0;
  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};
struct BinaryRef {
  std::string digest;
  friend bool operator==(const BinaryRef&, const BinaryRef&) = default;
};

using AttributeValue =
    std::variant<std::string, std::int64_t, double, Timestamp, Interval, GeoPoint, BinaryRef>;
using Attributes = std::map<std::string, AttributeValue>;

AttrKind kind_of(const AttributeValue& v);
nlohmann::json to_json(const AttributeValue& v);
AttributeValue attribute_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Attributes& attrs);
Attributes attributes_from_json(const nlohmann::json& j);

// -- records ----------------------------------------------------------------

struct Attribution {
  std::optional<ItemId> document;
  std::optional<std::string> module;
  std::optional<std::uint64_t> run;
  friend bool operator==(const Attribution&, const Attribution&) = default;
};

nlohmann::json to_json(const Attribution& a);
Attribution attribution_from_json(const nlohmann::json& j);

enum class Disposition { none, flagged, disproved };
std::string_view to_string(Disposition d);
Disposition disposition_from_string(std::string_view s);

struct Annotation {
  Actor actor;
  std::string comment;
  Disposition disposition = Disposition::none;
  std::uint64_t seq = 0;
};

struct NodeRecord {
  ItemId id;
  TypePath type;
  std::string label;
  std::string normalized_label;
  Attributes attributes;
  bool hidden = false;
  std::string hide_reason;
  Actor created_by;
  bool reviewed = false;
  std::string created_at;
  std::uint32_t cascade_depth = 0;
  bool mergeable = true;  // participates in (type, label) dedup
  std::vector<Attribution> attributions;
  std::vector<Annotation> annotations;
};

struct EdgeRecord {
  ItemId id;
  std::string kind;
  ItemId from;
  ItemId to;
  ConfidenceGrade grade = kUnknownGrade;
  Attribution attribution;
  Attributes attributes;
  bool hidden = false;
  std::string hide_reason;
  Actor created_by;
  bool reviewed = false;
  std::string created_at;
  std::uint32_t cascade_depth = 0;
  std::vector<Annotation> annotations;
};

nlohmann::json to_json(const NodeRecord& n);
nlohmann::json to_json(const EdgeRecord& e);

// -- views ------------------------------------------------------------------

struct ViewFilter {
  std::optional<std::pair<EpochSeconds, EpochSeconds>> time_range;  // inclusive
  std::optional<ConfidenceGrade> min_grade;
  bool cross_match_only = false;
  bool include_hidden = false;
  std::vector<TypePath> type_selection;    // empty: all types
  std::vector<std::string> edge_kinds;     // empty: all kinds
};

struct AliasCluster {
  ItemId representative;
  std::vector<ItemId> members;
  std::vector<ItemId> confirming_edges;
  ConfidenceGrade grade = kUnknownGrade;
};

struct GraphView {
  std::vector<ItemId> nodes;  // ascending
  std::vector<ItemId> edges;  // ascending
  std::vector<AliasCluster> clusters;
};

// -- state (the fold) -------------------------------------------------------

class GraphState {
 public:
  // Applies one sealed entry. Audit-only mutation kinds leave the state
  // untouched. Throws Error(validation_error) when the entry is inconsistent
  // with the state it is applied to.
  void apply(const ProvenanceEntry& entry);

  const NodeRecord* node(ItemId id) const;
  const EdgeRecord* edge(ItemId id) const;
  bool exists(ItemId id) const { return node(id) != nullptr || edge(id) != nullptr; }

  const std::vector<NodeRecord>& nodes() const noexcept { return nodes_; }
  const std::vector<EdgeRecord>& edges() const noexcept { return edges_; }
  // Edge indices incident to a node index.
  const std::vector<std::uint32_t>& incident(std::size_t node_index) const {
    return adjacency_[node_index];
  }
  std::optional<std::size_t> node_index(ItemId id) const;
  std::optional<std::size_t> edge_index(ItemId id) const;

  // Visible non-document-like node with this dedup key, if any.
  std::optional<ItemId> find_dedup(const TypePath& type, const std::string& normalized_label) const;

  ItemId next_id() const noexcept { return ItemId{next_id_}; }
  std::uint64_t applied_entries() const noexcept { return applied_; }

  // Canonical serialization; equal states serialize to identical bytes.
  nlohmann::json to_json() const;
  std::string fingerprint() const;

 private:
  struct Slot {
    bool is_node = true;
    std::uint32_t index = 0;
  };

  void check_new_id(std::uint64_t id) const;
  NodeRecord& node_mut(ItemId id);
  EdgeRecord& edge_mut(ItemId id);

  std::vector<NodeRecord> nodes_;
  std::vector<EdgeRecord> edges_;
  std::vector<std::vector<std::uint32_t>> adjacency_;
  std::unordered_map<std::uint64_t, Slot> slots_;
  std::unordered_map<std::string, std::uint64_t> dedup_;
  std::uint64_t next_id_ = 1;
  std::uint64_t applied_ = 0;
};

// Replays a verified log (or its prefix through `up_to_seq`, inclusive).
// Throws Error(broken_chain) when the chain does not verify.
GraphState replay(std::span<const ProvenanceEntry> entries,
                  std::optional<std::uint64_t> up_to_seq = std::nullopt);

// -- store ------------------------------------------------------------------

struct NodeCandidate {
  TypePath type;
  std::string label;
  Attributes attributes;
};

struct EdgeCandidate {
  std::string kind;
  ItemId from;
  ItemId to;
  std::optional<ConfidenceGrade> grade;  // absent: F6
  Attributes attributes;
};

struct UpsertResult {
  ItemId id;
  bool created = false;  // false: merged into an existing node
};

// Sequence numbers of the provenance entries a call committed.
struct Receipt {
  std::vector<std::uint64_t> seqs;
};

struct MutationEvent {
  ItemId item;
  Mutation mutation;
  std::uint32_t cascade_depth = 0;
};

class GraphStore {
 public:
  GraphStore(std::shared_ptr<const SchemaRegistry> schema, std::shared_ptr<ProvenanceLog> log);

  // Rebuilds the state from the log the store was given (used at startup).
  void rebuild_from_log();

  UpsertResult upsert_node(const NodeCandidate& candidate, const Actor& actor,
                           const std::optional<Attribution>& attribution = std::nullopt,
                           std::uint32_t cascade_depth = 0);
  // Always creates a node, bypassing label dedup (one node per ingest).
  ItemId insert_node(const NodeCandidate& candidate, const Actor& actor,
                     const std::optional<Attribution>& attribution = std::nullopt,
                     std::uint32_t cascade_depth = 0);
  ItemId upsert_edge(const EdgeCandidate& candidate, const Actor& actor,
                     const std::optional<Attribution>& attribution = std::nullopt,
                     std::uint32_t cascade_depth = 0);

  Receipt hide(ItemId id, const Actor& actor, const std::string& reason);
  Receipt review(ItemId id, const Actor& actor, std::optional<ConfidenceGrade> grade);
  Receipt annotate(ItemId id, const Actor& actor, const std::string& comment,
                   Disposition disposition);
  AliasCluster merge_cluster(const std::vector<ItemId>& members, const Actor& actor,
                             ConfidenceGrade grade);

  GraphView apply_filter(const ViewFilter& filter) const;
  GraphView neighborhood(ItemId center, std::uint32_t k, const ViewFilter& filter) const;

  // Complete, chronologically ordered history of an item, its source
  // documents (transitively) and the module runs that produced them.
  std::vector<ProvenanceEntry> trace(ItemId id) const;

  std::shared_ptr<const GraphState> snapshot() const;
  // Runs `fn` against the live state under the read lock. `fn` must not call
  // back into the store's mutators.
  template <typename Fn>
  decltype(auto) read(Fn&& fn) const {
    std::shared_lock lock(mutex_);
    return std::forward<Fn>(fn)(std::as_const(state_));
  }
  std::optional<NodeRecord> node(ItemId id) const;
  std::optional<EdgeRecord> edge(ItemId id) const;
  bool exists(ItemId id) const;

  const SchemaRegistry& schema() const noexcept { return *schema_; }
  ProvenanceLog& log() noexcept { return *log_; }
  const ProvenanceLog& log() const noexcept { return *log_; }

  // Called for every committed create/update/hide, after it became visible.
  void set_listener(std::function<void(const MutationEvent&)> listener);
  // Test hook: runs between the durable append and the in-memory apply.
  void set_commit_fault(std::function<void(const ProvenanceEntry&)> fault);

  // Throws Error(schema_violation) unless the candidate could be stored.
  void validate_node(const NodeCandidate& candidate) const;

  // Appends an audit-only entry (ingest, module_run, search_executed, ...).
  ProvenanceEntry record(const Actor& actor, Mutation mutation, nlohmann::json payload);

 private:
  ProvenanceEntry commit(const Actor& actor, Mutation mutation, nlohmann::json payload,
                         std::vector<MutationEvent>& events);
  void notify(const std::vector<MutationEvent>& events);
  void validate_attributes(const TypePath& type, const Attributes& attrs) const;
  ItemId create_node_locked(const NodeCandidate& candidate, const Actor& actor,
                            const std::optional<Attribution>& attribution,
                            std::uint32_t cascade_depth, bool fresh,
                            std::vector<MutationEvent>& events);
  void hide_locked(ItemId id, const Actor& actor, const std::string& reason, Receipt& receipt,
                   std::vector<MutationEvent>& events);

  std::shared_ptr<const SchemaRegistry> schema_;
  std::shared_ptr<ProvenanceLog> log_;
  mutable std::shared_mutex mutex_;
  std::mutex writer_;
  GraphState state_;
  std::function<void(const MutationEvent&)> listener_;
  std::function<void(const ProvenanceEntry&)> commit_fault_;
};

// View computation over a state; shared by the store and by offline tools.
GraphView compute_view(const GraphState& state, const ViewFilter& filter);
GraphView compute_neighborhood(const GraphState& state, ItemId center, std::uint32_t k,
                               const ViewFilter& filter);

std::string dedup_key(const TypePath& type, const std::string& normalized_label);

}  // namespace casegraph
