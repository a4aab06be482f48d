#include "casegraph/graph_store.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <mutex>
#include <numeric>
#include <unordered_set>

#include "casegraph/digest.hpp"
#include "casegraph/error.hpp"
#include "casegraph/text.hpp"

namespace casegraph {

using nlohmann::json;

// -- attribute values -------------------------------------------------------

AttrKind kind_of(const AttributeValue& v) {
  return std::visit(
      [](const auto& x) -> AttrKind {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::string>) return AttrKind::text;
        if constexpr (std::is_same_v<T, std::int64_t>) return AttrKind::integer;
        if constexpr (std::is_same_v<T, double>) return AttrKind::real;
        if constexpr (std::is_same_v<T, Timestamp>) return AttrKind::timestamp;
        if constexpr (std::is_same_v<T, Interval>) return AttrKind::interval;
        if constexpr (std::is_same_v<T, GeoPoint>) return AttrKind::geo_point;
        if constexpr (std::is_same_v<T, BinaryRef>) return AttrKind::binary_reference;
      },
      v);
}

json to_json(const AttributeValue& v) {
  json out{{"kind", std::string(to_string(kind_of(v)))}};
  std::visit(
      [&out](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Timestamp>) {
          out["value"] = format_rfc3339(x.value);
        } else if constexpr (std::is_same_v<T, Interval>) {
          out["value"] = json::array({format_rfc3339(x.start), format_rfc3339(x.end)});
        } else if constexpr (std::is_same_v<T, GeoPoint>) {
          out["value"] = json{{"lat", x.lat}, {"lon", x.lon}};
        } else if constexpr (std::is_same_v<T, BinaryRef>) {
          out["value"] = x.digest;
        } else {
          out["value"] = x;
        }
      },
      v);
  return out;
}

AttributeValue attribute_from_json(const json& j) {
  const auto kind = attr_kind_from_string(j.at("kind").get<std::string>());
  const auto& v = j.at("value");
  switch (kind) {
    case AttrKind::text: return v.get<std::string>();
    case AttrKind::integer: return v.get<std::int64_t>();
    case AttrKind::real: return v.get<double>();
    case AttrKind::timestamp: return Timestamp{parse_rfc3339(v.get<std::string>())};
    case AttrKind::interval:
      return Interval{parse_rfc3339(v.at(0).get<std::string>()),
                      parse_rfc3339(v.at(1).get<std::string>())};
    case AttrKind::geo_point: return GeoPoint{v.at("lat").get<double>(), v.at("lon").get<double>()};
    case AttrKind::binary_reference: return BinaryRef{v.get<std::string>()};
  }
  throw Error(ErrorCode::parse_error, "unreachable attribute kind");
}

json to_json(const Attributes& attrs) {
  json out = json::object();
  for (const auto& [name, value] : attrs) out[name] = to_json(value);
  return out;
}

Attributes attributes_from_json(const json& j) {
  Attributes out;
  if (j.is_null()) return out;
  for (const auto& [name, value] : j.items()) out.emplace(name, attribute_from_json(value));
  return out;
}

json to_json(const Attribution& a) {
  json out = json::object();
  if (a.document) out["document"] = a.document->value;
  if (a.module) out["module"] = *a.module;
  if (a.run) out["run"] = *a.run;
  return out;
}

Attribution attribution_from_json(const json& j) {
  Attribution a;
  if (j.contains("document")) a.document = ItemId{j.at("document").get<std::uint64_t>()};
  if (j.contains("module")) a.module = j.at("module").get<std::string>();
  if (j.contains("run")) a.run = j.at("run").get<std::uint64_t>();
  return a;
}

std::string_view to_string(Disposition d) {
  switch (d) {
    case Disposition::none: return "none";
    case Disposition::flagged: return "flagged";
    case Disposition::disproved: return "disproved";
  }
  return "none";
}

Disposition disposition_from_string(std::string_view s) {
  if (s == "none") return Disposition::none;
  if (s == "flagged") return Disposition::flagged;
  if (s == "disproved") return Disposition::disproved;
  throw Error(ErrorCode::invalid_argument, "unknown disposition '" + std::string(s) + "'");
}

namespace {

json annotations_json(const std::vector<Annotation>& list) {
  json out = json::array();
  for (const auto& a : list) {
    out.push_back({{"actor", to_json(a.actor)},
                   {"comment", a.comment},
                   {"disposition", std::string(to_string(a.disposition))},
                   {"seq", a.seq}});
  }
  return out;
}

}  // namespace

json to_json(const NodeRecord& n) {
  json attributions = json::array();
  for (const auto& a : n.attributions) attributions.push_back(to_json(a));
  return json{{"id", n.id.value},
              {"type", n.type.str()},
              {"label", n.label},
              {"normalized_label", n.normalized_label},
              {"attributes", to_json(n.attributes)},
              {"hidden", n.hidden},
              {"hide_reason", n.hide_reason},
              {"created_by", to_json(n.created_by)},
              {"reviewed", n.reviewed},
              {"created_at", n.created_at},
              {"cascade_depth", n.cascade_depth},
              {"mergeable", n.mergeable},
              {"attributions", attributions},
              {"annotations", annotations_json(n.annotations)}};
}

json to_json(const EdgeRecord& e) {
  return json{{"id", e.id.value},
              {"kind", e.kind},
              {"from", e.from.value},
              {"to", e.to.value},
              {"grade", e.grade.str()},
              {"attribution", to_json(e.attribution)},
              {"attributes", to_json(e.attributes)},
              {"hidden", e.hidden},
              {"hide_reason", e.hide_reason},
              {"created_by", to_json(e.created_by)},
              {"reviewed", e.reviewed},
              {"created_at", e.created_at},
              {"cascade_depth", e.cascade_depth},
              {"annotations", annotations_json(e.annotations)}};
}

std::string dedup_key(const TypePath& type, const std::string& normalized_label) {
  return type.str() + '\x1f' + normalized_label;
}

// -- GraphState -------------------------------------------------------------

const NodeRecord* GraphState::node(ItemId id) const {
  const auto it = slots_.find(id.value);
  if (it == slots_.end() || !it->second.is_node) return nullptr;
  return &nodes_[it->second.index];
}

const EdgeRecord* GraphState::edge(ItemId id) const {
  const auto it = slots_.find(id.value);
  if (it == slots_.end() || it->second.is_node) return nullptr;
  return &edges_[it->second.index];
}

std::optional<std::size_t> GraphState::node_index(ItemId id) const {
  const auto it = slots_.find(id.value);
  if (it == slots_.end() || !it->second.is_node) return std::nullopt;
  return it->second.index;
}

std::optional<std::size_t> GraphState::edge_index(ItemId id) const {
  const auto it = slots_.find(id.value);
  if (it == slots_.end() || it->second.is_node) return std::nullopt;
  return it->second.index;
}

NodeRecord& GraphState::node_mut(ItemId id) {
  const auto idx = node_index(id);
  if (!idx) throw Error(ErrorCode::validation_error, "entry references unknown node " + std::to_string(id.value));
  return nodes_[*idx];
}

EdgeRecord& GraphState::edge_mut(ItemId id) {
  const auto idx = edge_index(id);
  if (!idx) throw Error(ErrorCode::validation_error, "entry references unknown edge " + std::to_string(id.value));
  return edges_[*idx];
}

std::optional<ItemId> GraphState::find_dedup(const TypePath& type,
                                             const std::string& normalized_label) const {
  const auto it = dedup_.find(dedup_key(type, normalized_label));
  if (it == dedup_.end()) return std::nullopt;
  return ItemId{it->second};
}

void GraphState::check_new_id(std::uint64_t id) const {
  if (id != next_id_) {
    throw Error(ErrorCode::validation_error, "entry creates id " + std::to_string(id) +
                                                 " but the next id is " + std::to_string(next_id_));
  }
}

void GraphState::apply(const ProvenanceEntry& entry) {
  const auto& p = entry.payload;
  switch (entry.mutation) {
    case Mutation::create_node: {
      const auto id = p.at("id").get<std::uint64_t>();
      check_new_id(id);
      NodeRecord n;
      n.id = ItemId{id};
      n.type = TypePath(p.at("type").get<std::string>());
      n.label = p.at("label").get<std::string>();
      n.normalized_label = p.at("normalized_label").get<std::string>();
      n.attributes = attributes_from_json(p.at("attributes"));
      n.created_by = entry.actor;
      n.created_at = entry.timestamp;
      n.cascade_depth = p.at("cascade_depth").get<std::uint32_t>();
      n.mergeable = p.at("mergeable").get<bool>();
      if (p.contains("attribution")) n.attributions.push_back(attribution_from_json(p.at("attribution")));
      if (n.mergeable) dedup_[dedup_key(n.type, n.normalized_label)] = id;
      slots_[id] = Slot{true, static_cast<std::uint32_t>(nodes_.size())};
      nodes_.push_back(std::move(n));
      adjacency_.emplace_back();
      next_id_ = id + 1;
      break;
    }
    case Mutation::update_node: {
      auto& n = node_mut(ItemId{p.at("id").get<std::uint64_t>()});
      if (p.contains("attribution")) {
        auto a = attribution_from_json(p.at("attribution"));
        if (std::find(n.attributions.begin(), n.attributions.end(), a) == n.attributions.end()) {
          n.attributions.push_back(std::move(a));
        }
      }
      if (p.contains("attributes")) {
        for (auto& [name, value] : attributes_from_json(p.at("attributes"))) {
          n.attributes[name] = std::move(value);
        }
      }
      break;
    }
    case Mutation::create_edge: {
      const auto id = p.at("id").get<std::uint64_t>();
      check_new_id(id);
      EdgeRecord e;
      e.id = ItemId{id};
      e.kind = p.at("kind").get<std::string>();
      e.from = ItemId{p.at("from").get<std::uint64_t>()};
      e.to = ItemId{p.at("to").get<std::uint64_t>()};
      e.grade = ConfidenceGrade::parse(p.at("grade").get<std::string>());
      e.attribution = attribution_from_json(p.at("attribution"));
      e.attributes = attributes_from_json(p.at("attributes"));
      e.created_by = entry.actor;
      e.created_at = entry.timestamp;
      e.cascade_depth = p.at("cascade_depth").get<std::uint32_t>();
      const auto from = node_index(e.from);
      const auto to = node_index(e.to);
      if (!from || !to) throw Error(ErrorCode::validation_error, "edge entry with dangling endpoint");
      const auto index = static_cast<std::uint32_t>(edges_.size());
      adjacency_[*from].push_back(index);
      if (*to != *from) adjacency_[*to].push_back(index);
      slots_[id] = Slot{false, index};
      edges_.push_back(std::move(e));
      next_id_ = id + 1;
      break;
    }
    case Mutation::update_edge: {
      auto& e = edge_mut(ItemId{p.at("id").get<std::uint64_t>()});
      for (auto& [name, value] : attributes_from_json(p.at("attributes"))) {
        e.attributes[name] = std::move(value);
      }
      break;
    }
    case Mutation::hide: {
      const ItemId id{p.at("id").get<std::uint64_t>()};
      const auto reason = p.at("reason").get<std::string>();
      if (const auto idx = node_index(id)) {
        auto& n = nodes_[*idx];
        n.hidden = true;
        n.hide_reason = reason;
        const auto key = dedup_key(n.type, n.normalized_label);
        if (auto it = dedup_.find(key); it != dedup_.end() && it->second == id.value) dedup_.erase(it);
      } else {
        auto& e = edge_mut(id);
        e.hidden = true;
        e.hide_reason = reason;
      }
      break;
    }
    case Mutation::review: {
      const ItemId id{p.at("id").get<std::uint64_t>()};
      if (const auto idx = node_index(id)) {
        nodes_[*idx].reviewed = true;
      } else {
        auto& e = edge_mut(id);
        e.reviewed = true;
        if (p.contains("grade")) e.grade = ConfidenceGrade::parse(p.at("grade").get<std::string>());
      }
      break;
    }
    case Mutation::annotate: {
      const ItemId id{p.at("id").get<std::uint64_t>()};
      Annotation a{entry.actor, p.at("comment").get<std::string>(),
                   disposition_from_string(p.at("disposition").get<std::string>()), entry.seq};
      if (const auto idx = node_index(id)) {
        nodes_[*idx].annotations.push_back(std::move(a));
      } else {
        edge_mut(id).annotations.push_back(std::move(a));
      }
      break;
    }
    case Mutation::ontology_edit:
    case Mutation::ingest:
    case Mutation::module_run:
    case Mutation::clamp_grade:
    case Mutation::search_executed:
      break;
  }
  ++applied_;
}

json GraphState::to_json() const {
  json nodes = json::array();
  for (const auto& n : nodes_) nodes.push_back(casegraph::to_json(n));
  json edges = json::array();
  for (const auto& e : edges_) edges.push_back(casegraph::to_json(e));
  return json{{"next_id", next_id_}, {"nodes", nodes}, {"edges", edges}};
}

std::string GraphState::fingerprint() const { return sha256_hex(to_json().dump()); }

GraphState replay(std::span<const ProvenanceEntry> entries, std::optional<std::uint64_t> up_to_seq) {
  if (const auto status = verify_chain(entries); !status.ok) {
    throw Error(ErrorCode::broken_chain, "provenance chain broken at seq " +
                                             std::to_string(status.broken_seq) + ": " + status.reason);
  }
  GraphState state;
  for (const auto& e : entries) {
    if (up_to_seq && e.seq > *up_to_seq) break;
    state.apply(e);
  }
  return state;
}

// -- views ------------------------------------------------------------------

namespace {

struct ViewMask {
  std::vector<char> node;
  std::vector<char> edge;
};

bool interval_hits(const Interval& iv, EpochSeconds t0, EpochSeconds t1) {
  return iv.start <= t1 && iv.end > t0;
}

ViewMask compute_mask(const GraphState& state, const ViewFilter& filter) {
  const auto& nodes = state.nodes();
  const auto& edges = state.edges();
  ViewMask mask{std::vector<char>(nodes.size(), 0), std::vector<char>(edges.size(), 0)};

  const auto present = [&](bool hidden) { return filter.include_hidden || !hidden; };

  std::unordered_map<std::string, bool> type_cache;
  const auto type_selected = [&](const TypePath& t) {
    if (filter.type_selection.empty()) return true;
    auto [it, inserted] = type_cache.try_emplace(t.str(), false);
    if (inserted) {
      it->second = std::any_of(filter.type_selection.begin(), filter.type_selection.end(),
                               [&](const TypePath& sel) { return t.starts_with(sel); });
    }
    return it->second;
  };

  for (std::size_t i = 0; i < nodes.size(); ++i) {
    mask.node[i] = present(nodes[i].hidden) && type_selected(nodes[i].type);
  }

  const auto edge_present = [&](const EdgeRecord& e) {
    if (!present(e.hidden)) return false;
    if (!filter.edge_kinds.empty() &&
        std::find(filter.edge_kinds.begin(), filter.edge_kinds.end(), e.kind) == filter.edge_kinds.end()) {
      return false;
    }
    return true;
  };

  if (filter.cross_match_only) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (!mask.node[i]) continue;
      std::set<std::uint64_t> docs;
      for (const auto& a : nodes[i].attributions) {
        if (!a.document) continue;
        const auto* doc = state.node(*a.document);
        if (doc && present(doc->hidden)) docs.insert(a.document->value);
      }
      mask.node[i] = docs.size() >= 2;
    }
  }

  if (filter.time_range) {
    const auto [t0, t1] = *filter.time_range;
    std::vector<char> datetime_hit(nodes.size(), 0);
    std::vector<char> document_hit(nodes.size(), 0);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& n = nodes[i];
      if (!present(n.hidden)) continue;
      if (n.type.starts_with(types::kDatetime)) {
        if (auto it = n.attributes.find("interval"); it != n.attributes.end()) {
          if (const auto* iv = std::get_if<Interval>(&it->second)) datetime_hit[i] = interval_hits(*iv, t0, t1);
        }
      } else if (n.type.starts_with(types::kDocument)) {
        if (auto it = n.attributes.find("timestamp"); it != n.attributes.end()) {
          if (const auto* ts = std::get_if<Timestamp>(&it->second)) {
            document_hit[i] = ts->value >= t0 && ts->value <= t1;
          }
        }
      }
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (!mask.node[i]) continue;
      bool associated = datetime_hit[i] || document_hit[i];
      if (!associated) {
        for (const auto ei : state.incident(i)) {
          const auto& e = edges[ei];
          if (!edge_present(e)) continue;
          const auto other = *state.node_index(e.from == nodes[i].id ? e.to : e.from);
          if (datetime_hit[other]) {
            associated = true;
            break;
          }
        }
      }
      if (!associated) {
        for (const auto& a : nodes[i].attributions) {
          if (!a.document) continue;
          if (const auto di = state.node_index(*a.document); di && document_hit[*di]) {
            associated = true;
            break;
          }
        }
      }
      mask.node[i] = associated;
    }
  }

  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto& e = edges[i];
    if (!edge_present(e)) continue;
    if (filter.min_grade && !grade_at_least(e.grade, *filter.min_grade)) continue;
    if (!mask.node[*state.node_index(e.from)] || !mask.node[*state.node_index(e.to)]) continue;
    mask.edge[i] = 1;
  }
  return mask;
}

std::vector<AliasCluster> compute_clusters(const GraphState& state, const std::vector<char>& node_in,
                                           const std::vector<char>& edge_in) {
  const auto& nodes = state.nodes();
  const auto& edges = state.edges();
  std::vector<std::size_t> parent(nodes.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  const auto find = [&parent](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<std::size_t> confirming;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto& e = edges[i];
    if (!edge_in[i] || e.kind != relations::kSameAs) continue;
    if (e.created_by.kind != ActorKind::user && !e.reviewed) continue;
    const auto a = *state.node_index(e.from);
    const auto b = *state.node_index(e.to);
    if (!node_in[a] || !node_in[b]) continue;
    parent[find(a)] = find(b);
    confirming.push_back(i);
  }
  std::map<std::size_t, AliasCluster> by_root;
  for (const auto ei : confirming) {
    const auto& e = edges[ei];
    auto& c = by_root[find(*state.node_index(e.from))];
    c.confirming_edges.push_back(e.id);
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (auto it = by_root.find(find(i)); it != by_root.end() && node_in[i]) {
      it->second.members.push_back(nodes[i].id);
    }
  }
  std::vector<AliasCluster> out;
  for (auto& [_, c] : by_root) {
    if (c.members.size() < 2) continue;
    c.grade = ConfidenceGrade{'A', 1};
    for (const auto id : c.confirming_edges) c.grade = grade_min(c.grade, state.edge(id)->grade);
    c.representative = *std::min_element(c.members.begin(), c.members.end(), [&](ItemId a, ItemId b) {
      const auto* na = state.node(a);
      const auto* nb = state.node(b);
      return std::tie(na->created_at, a) < std::tie(nb->created_at, b);
    });
    out.push_back(std::move(c));
  }
  std::sort(out.begin(), out.end(),
            [](const AliasCluster& a, const AliasCluster& b) { return a.representative < b.representative; });
  return out;
}

GraphView assemble(const GraphState& state, const std::vector<char>& node_in,
                   const std::vector<char>& edge_in) {
  GraphView view;
  for (std::size_t i = 0; i < node_in.size(); ++i) {
    if (node_in[i]) view.nodes.push_back(state.nodes()[i].id);
  }
  for (std::size_t i = 0; i < edge_in.size(); ++i) {
    if (edge_in[i]) view.edges.push_back(state.edges()[i].id);
  }
  view.clusters = compute_clusters(state, node_in, edge_in);
  return view;
}

}  // namespace

GraphView compute_view(const GraphState& state, const ViewFilter& filter) {
  if (filter.time_range && filter.time_range->first > filter.time_range->second) {
    throw Error(ErrorCode::invalid_argument, "time range start is after its end");
  }
  const auto mask = compute_mask(state, filter);
  return assemble(state, mask.node, mask.edge);
}

GraphView compute_neighborhood(const GraphState& state, ItemId center, std::uint32_t k,
                               const ViewFilter& filter) {
  const auto center_index = state.node_index(center);
  if (!center_index) throw Error(ErrorCode::unknown_item, "unknown node " + std::to_string(center.value));
  if (filter.time_range && filter.time_range->first > filter.time_range->second) {
    throw Error(ErrorCode::invalid_argument, "time range start is after its end");
  }
  const auto mask = compute_mask(state, filter);
  if (!mask.node[*center_index]) {
    throw Error(ErrorCode::unknown_item,
                "node " + std::to_string(center.value) + " is not visible under the filter");
  }
  const auto& nodes = state.nodes();
  const auto& edges = state.edges();
  std::vector<char> in(nodes.size(), 0);
  std::vector<std::size_t> frontier{*center_index};
  in[*center_index] = 1;
  for (std::uint32_t depth = 0; depth < k && !frontier.empty(); ++depth) {
    std::vector<std::size_t> next;
    for (const auto u : frontier) {
      for (const auto ei : state.incident(u)) {
        if (!mask.edge[ei]) continue;
        const auto& e = edges[ei];
        const auto v = *state.node_index(e.from == nodes[u].id ? e.to : e.from);
        if (!in[v]) {
          in[v] = 1;
          next.push_back(v);
        }
      }
    }
    frontier = std::move(next);
  }
  std::vector<char> edge_in(edges.size(), 0);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edge_in[i] = mask.edge[i] && in[*state.node_index(edges[i].from)] && in[*state.node_index(edges[i].to)];
  }
  return assemble(state, in, edge_in);
}

// -- GraphStore -------------------------------------------------------------

GraphStore::GraphStore(std::shared_ptr<const SchemaRegistry> schema, std::shared_ptr<ProvenanceLog> log)
    : schema_(std::move(schema)), log_(std::move(log)) {
  if (!schema_ || !log_) throw Error(ErrorCode::invalid_argument, "store needs a schema and a log");
}

void GraphStore::rebuild_from_log() {
  std::scoped_lock writer(writer_);
  const auto entries = log_->snapshot();
  auto state = replay(entries);
  std::unique_lock lock(mutex_);
  state_ = std::move(state);
}

void GraphStore::set_listener(std::function<void(const MutationEvent&)> listener) {
  std::scoped_lock writer(writer_);
  listener_ = std::move(listener);
}

void GraphStore::set_commit_fault(std::function<void(const ProvenanceEntry&)> fault) {
  std::scoped_lock writer(writer_);
  commit_fault_ = std::move(fault);
}

ProvenanceEntry GraphStore::commit(const Actor& actor, Mutation mutation, json payload,
                                   std::vector<MutationEvent>& events) {
  auto entry = log_->append(actor, mutation, std::move(payload));
  if (commit_fault_) commit_fault_(entry);
  {
    std::unique_lock lock(mutex_);
    state_.apply(entry);
  }
  const auto& p = entry.payload;
  switch (mutation) {
    case Mutation::create_node:
    case Mutation::create_edge:
    case Mutation::update_node:
    case Mutation::update_edge:
    case Mutation::hide:
    case Mutation::review:
    case Mutation::annotate: {
      const ItemId id{p.at("id").get<std::uint64_t>()};
      std::uint32_t depth = 0;
      if (const auto* n = state_.node(id)) depth = n->cascade_depth;
      if (const auto* e = state_.edge(id)) depth = e->cascade_depth;
      events.push_back({id, mutation, depth});
      break;
    }
    default:
      break;
  }
  return entry;
}

void GraphStore::notify(const std::vector<MutationEvent>& events) {
  std::function<void(const MutationEvent&)> listener;
  {
    std::scoped_lock writer(writer_);
    listener = listener_;
  }
  if (!listener) return;
  for (const auto& e : events) listener(e);
}

ProvenanceEntry GraphStore::record(const Actor& actor, Mutation mutation, json payload) {
  std::vector<MutationEvent> events;
  std::scoped_lock writer(writer_);
  return commit(actor, mutation, std::move(payload), events);
}

void GraphStore::validate_attributes(const TypePath& type, const Attributes& attrs) const {
  if (!schema_->contains(type)) throw Error(ErrorCode::schema_violation, "unregistered type " + type.str());
  const auto declared = schema_->effective_attributes(type);
  for (const auto& [name, value] : attrs) {
    const auto it = declared.find(name);
    if (it == declared.end()) {
      throw Error(ErrorCode::schema_violation, "attribute '" + name + "' is not declared for " + type.str());
    }
    if (it->second != kind_of(value)) {
      throw Error(ErrorCode::schema_violation, "attribute '" + name + "' of " + type.str() + " must be " +
                                                   std::string(to_string(it->second)));
    }
    if (const auto* d = std::get_if<double>(&value); d && !std::isfinite(*d)) {
      throw Error(ErrorCode::schema_violation, "attribute '" + name + "' is not finite");
    }
    if (const auto* g = std::get_if<GeoPoint>(&value); g && (!std::isfinite(g->lat) || !std::isfinite(g->lon))) {
      throw Error(ErrorCode::schema_violation, "attribute '" + name + "' is not finite");
    }
    if (const auto* s = std::get_if<std::string>(&value); s && !text::is_valid_utf8(*s)) {
      throw Error(ErrorCode::schema_violation, "attribute '" + name + "' is not valid UTF-8");
    }
  }
}

void GraphStore::validate_node(const NodeCandidate& candidate) const {
  validate_attributes(candidate.type, candidate.attributes);
  if (candidate.label.empty() || !text::is_valid_utf8(candidate.label)) {
    throw Error(ErrorCode::schema_violation, "node label must be nonempty UTF-8");
  }
}

ItemId GraphStore::create_node_locked(const NodeCandidate& candidate, const Actor& actor,
                                      const std::optional<Attribution>& attribution,
                                      std::uint32_t cascade_depth, bool fresh,
                                      std::vector<MutationEvent>& events) {
  const auto id = state_.next_id();
  json payload{{"id", id.value},
               {"type", candidate.type.str()},
               {"label", candidate.label},
               {"normalized_label", text::normalize(candidate.label)},
               {"attributes", to_json(candidate.attributes)},
               {"cascade_depth", cascade_depth},
               {"mergeable", !fresh}};
  if (attribution) payload["attribution"] = to_json(*attribution);
  commit(actor, Mutation::create_node, std::move(payload), events);
  return id;
}

UpsertResult GraphStore::upsert_node(const NodeCandidate& candidate, const Actor& actor,
                                     const std::optional<Attribution>& attribution,
                                     std::uint32_t cascade_depth) {
  std::vector<MutationEvent> events;
  UpsertResult result;
  {
    std::scoped_lock writer(writer_);
    validate_node(candidate);
    const auto norm = text::normalize(candidate.label);
    if (const auto existing = state_.find_dedup(candidate.type, norm)) {
      json payload{{"id", existing->value}};
      if (attribution) payload["attribution"] = to_json(*attribution);
      commit(actor, Mutation::update_node, std::move(payload), events);
      result = {*existing, false};
    } else {
      result = {create_node_locked(candidate, actor, attribution, cascade_depth, false, events), true};
    }
  }
  notify(events);
  return result;
}

ItemId GraphStore::insert_node(const NodeCandidate& candidate, const Actor& actor,
                               const std::optional<Attribution>& attribution, std::uint32_t cascade_depth) {
  std::vector<MutationEvent> events;
  ItemId id;
  {
    std::scoped_lock writer(writer_);
    validate_node(candidate);
    id = create_node_locked(candidate, actor, attribution, cascade_depth, true, events);
  }
  notify(events);
  return id;
}

namespace {

ItemId upsert_edge_locked(GraphState& state, const SchemaRegistry& schema, const EdgeCandidate& candidate,
                          const Actor& actor, const std::optional<Attribution>& attribution,
                          std::uint32_t cascade_depth,
                          const std::function<void(Mutation, json)>& commit) {
  const auto* from = state.node(candidate.from);
  const auto* to = state.node(candidate.to);
  if (!from || !to) {
    throw Error(ErrorCode::dangling_endpoint, "edge endpoint " +
                                                  std::to_string((from ? candidate.to : candidate.from).value) +
                                                  " does not exist");
  }
  schema.check_edge(candidate.kind, from->type, to->type);
  for (const auto& [name, value] : candidate.attributes) {
    if (const auto* s = std::get_if<std::string>(&value); s && !text::is_valid_utf8(*s)) {
      throw Error(ErrorCode::schema_violation, "edge attribute '" + name + "' is not valid UTF-8");
    }
  }
  const auto requested = candidate.grade.value_or(kUnknownGrade);
  auto stored = requested;
  const auto id = state.next_id();
  if (actor.kind == ActorKind::module && requested.reliability < kAutomationCap) {
    stored.reliability = kAutomationCap;
    commit(Mutation::clamp_grade,
           json{{"id", id.value}, {"requested", requested.str()}, {"stored", stored.str()}});
  }
  commit(Mutation::create_edge, json{{"id", id.value},
                                     {"kind", candidate.kind},
                                     {"from", candidate.from.value},
                                     {"to", candidate.to.value},
                                     {"grade", stored.str()},
                                     {"attribution", to_json(attribution.value_or(Attribution{}))},
                                     {"attributes", to_json(candidate.attributes)},
                                     {"cascade_depth", cascade_depth}});
  return id;
}

}  // namespace

ItemId GraphStore::upsert_edge(const EdgeCandidate& candidate, const Actor& actor,
                               const std::optional<Attribution>& attribution, std::uint32_t cascade_depth) {
  std::vector<MutationEvent> events;
  ItemId id;
  {
    std::scoped_lock writer(writer_);
    id = upsert_edge_locked(state_, *schema_, candidate, actor, attribution, cascade_depth,
                            [&](Mutation m, json p) { commit(actor, m, std::move(p), events); });
  }
  notify(events);
  return id;
}

void GraphStore::hide_locked(ItemId id, const Actor& actor, const std::string& reason, Receipt& receipt,
                             std::vector<MutationEvent>& events) {
  const auto* n = state_.node(id);
  const auto* e = state_.edge(id);
  if (!n && !e) throw Error(ErrorCode::unknown_item, "unknown item " + std::to_string(id.value));
  if ((n && n->hidden) || (e && e->hidden)) {
    throw Error(ErrorCode::already_hidden, "item " + std::to_string(id.value) + " is already hidden");
  }
  receipt.seqs.push_back(commit(actor, Mutation::hide, json{{"id", id.value}, {"reason", reason}}, events).seq);
  if (n) {
    const auto idx = *state_.node_index(id);
    const auto incident = state_.incident(idx);
    for (const auto ei : incident) {
      const auto& edge = state_.edges()[ei];
      if (edge.hidden) continue;
      receipt.seqs.push_back(
          commit(actor, Mutation::hide, json{{"id", edge.id.value}, {"reason", reason}}, events).seq);
    }
  }
}

Receipt GraphStore::hide(ItemId id, const Actor& actor, const std::string& reason) {
  std::vector<MutationEvent> events;
  Receipt receipt;
  {
    std::scoped_lock writer(writer_);
    hide_locked(id, actor, reason, receipt, events);
  }
  notify(events);
  return receipt;
}

Receipt GraphStore::review(ItemId id, const Actor& actor, std::optional<ConfidenceGrade> grade) {
  std::vector<MutationEvent> events;
  Receipt receipt;
  {
    std::scoped_lock writer(writer_);
    if (actor.kind != ActorKind::user) {
      throw Error(ErrorCode::permission_denied, "only users may review items");
    }
    const bool is_node = state_.node(id) != nullptr;
    if (!is_node && !state_.edge(id)) throw Error(ErrorCode::unknown_item, "unknown item " + std::to_string(id.value));
    if (is_node && grade) throw Error(ErrorCode::invalid_argument, "nodes carry no grade; review without one");
    json payload{{"id", id.value}};
    if (grade) payload["grade"] = grade->str();
    receipt.seqs.push_back(commit(actor, Mutation::review, std::move(payload), events).seq);
  }
  notify(events);
  return receipt;
}

Receipt GraphStore::annotate(ItemId id, const Actor& actor, const std::string& comment,
                             Disposition disposition) {
  std::vector<MutationEvent> events;
  Receipt receipt;
  {
    std::scoped_lock writer(writer_);
    const auto* n = state_.node(id);
    const auto* e = state_.edge(id);
    if (!n && !e) throw Error(ErrorCode::unknown_item, "unknown item " + std::to_string(id.value));
    if (!text::is_valid_utf8(comment)) throw Error(ErrorCode::invalid_argument, "comment is not valid UTF-8");
    const bool hidden = n ? n->hidden : e->hidden;
    receipt.seqs.push_back(commit(actor, Mutation::annotate,
                                  json{{"id", id.value},
                                       {"comment", comment},
                                       {"disposition", std::string(to_string(disposition))}},
                                  events)
                               .seq);
    if (disposition == Disposition::disproved && !hidden) {
      hide_locked(id, actor, "disproved: " + comment, receipt, events);
    }
  }
  notify(events);
  return receipt;
}

AliasCluster GraphStore::merge_cluster(const std::vector<ItemId>& members, const Actor& actor,
                                       ConfidenceGrade grade) {
  std::vector<MutationEvent> events;
  AliasCluster cluster;
  {
    std::scoped_lock writer(writer_);
    if (actor.kind != ActorKind::user) throw Error(ErrorCode::permission_denied, "only users may merge clusters");
    std::vector<ItemId> unique = members;
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    if (unique.size() < 2) throw Error(ErrorCode::invalid_argument, "a cluster needs at least two members");
    std::optional<TypePath> layer;
    for (const auto id : unique) {
      const auto* n = state_.node(id);
      if (!n) throw Error(ErrorCode::unknown_item, "unknown node " + std::to_string(id.value));
      if (layer && n->type.first_layer() != *layer) {
        throw Error(ErrorCode::type_mismatch, "cluster members must share their first-layer type");
      }
      layer = n->type.first_layer();
    }
    const auto rep = *std::min_element(unique.begin(), unique.end(), [&](ItemId a, ItemId b) {
      return std::tie(state_.node(a)->created_at, a) < std::tie(state_.node(b)->created_at, b);
    });
    cluster.representative = rep;
    cluster.members = unique;
    cluster.grade = grade;
    for (const auto id : unique) {
      if (id == rep) continue;
      cluster.confirming_edges.push_back(upsert_edge_locked(
          state_, *schema_, EdgeCandidate{std::string(relations::kSameAs), id, rep, grade, {}}, actor,
          std::nullopt, 0, [&](Mutation m, json p) { commit(actor, m, std::move(p), events); }));
    }
  }
  notify(events);
  return cluster;
}

GraphView GraphStore::apply_filter(const ViewFilter& filter) const {
  std::shared_lock lock(mutex_);
  return compute_view(state_, filter);
}

GraphView GraphStore::neighborhood(ItemId center, std::uint32_t k, const ViewFilter& filter) const {
  std::shared_lock lock(mutex_);
  return compute_neighborhood(state_, center, k, filter);
}

std::vector<ProvenanceEntry> GraphStore::trace(ItemId id) const {
  std::vector<std::uint64_t> ids{id.value};
  std::vector<std::uint64_t> runs;
  {
    std::shared_lock lock(mutex_);
    if (!state_.exists(id)) throw Error(ErrorCode::unknown_item, "unknown item " + std::to_string(id.value));
    std::unordered_set<std::uint64_t> seen{id.value};
    std::deque<ItemId> pending;
    const auto take = [&](const Attribution& a) {
      if (a.run) runs.push_back(*a.run);
      if (a.document && seen.insert(a.document->value).second) {
        ids.push_back(a.document->value);
        pending.push_back(*a.document);
      }
    };
    if (const auto* e = state_.edge(id)) take(e->attribution);
    pending.push_back(id);
    while (!pending.empty()) {
      const auto cur = pending.front();
      pending.pop_front();
      if (const auto* n = state_.node(cur)) {
        for (const auto& a : n->attributions) take(a);
      }
    }
  }
  return select_entries(*log_, ids, runs);
}

std::shared_ptr<const GraphState> GraphStore::snapshot() const {
  std::shared_lock lock(mutex_);
  return std::make_shared<const GraphState>(state_);
}

std::optional<NodeRecord> GraphStore::node(ItemId id) const {
  std::shared_lock lock(mutex_);
  if (const auto* n = state_.node(id)) return *n;
  return std::nullopt;
}

std::optional<EdgeRecord> GraphStore::edge(ItemId id) const {
  std::shared_lock lock(mutex_);
  if (const auto* e = state_.edge(id)) return *e;
  return std::nullopt;
}

bool GraphStore::exists(ItemId id) const {
  std::shared_lock lock(mutex_);
  return state_.exists(id);
}

}  // namespace casegraph
