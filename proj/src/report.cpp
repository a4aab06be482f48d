#include "casegraph/report.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "casegraph/error.hpp"

namespace casegraph::report {

using nlohmann::json;

namespace {

std::string escape(std::string_view s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

bool targets(const json& payload, std::uint64_t id) {
  return payload.contains("id") && payload["id"].is_number_integer() && payload["id"].get<std::uint64_t>() == id;
}

}  // namespace

json build(const GraphStore& store, const Selection& selection, const Clock& clock) {
  if (selection.items.empty()) throw Error(ErrorCode::invalid_argument, "report selection is empty");
  const auto state = store.snapshot();
  std::vector<std::uint64_t> missing;
  for (const auto id : selection.items) {
    const auto* n = state->node(id);
    const auto* e = state->edge(id);
    const bool hidden = (n && n->hidden) || (e && e->hidden);
    if ((!n && !e) || (hidden && !selection.include_hidden)) missing.push_back(id.value);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto id : missing) list += (list.empty() ? "" : ", ") + std::to_string(id);
    throw Error(ErrorCode::unknown_item, "unknown or hidden items in report selection: " + list);
  }

  const std::set<ItemId> chosen(selection.items.begin(), selection.items.end());
  std::map<std::uint64_t, ProvenanceEntry> entries;
  json items = json::array();
  for (const auto id : chosen) {
    const auto trace = store.trace(id);
    json seqs = json::array();
    json claims = json::object();
    for (const auto& entry : trace) {
      seqs.push_back(entry.seq);
      entries.emplace(entry.seq, entry);
      if (!targets(entry.payload, id.value)) continue;
      switch (entry.mutation) {
        case Mutation::create_node:
        case Mutation::create_edge: claims["created"] = entry.seq; break;
        case Mutation::hide: claims["hidden"] = entry.seq; break;
        case Mutation::review: claims["reviewed"] = entry.seq; break;
        default: break;
      }
    }
    json item;
    if (const auto* n = state->node(id)) {
      item = {{"kind", "node"}, {"record", to_json(*n)}};
    } else {
      item = {{"kind", "edge"}, {"record", to_json(*state->edge(id))}};
    }
    item["id"] = id.value;
    item["claims"] = claims;
    item["trace"] = seqs;
    items.push_back(std::move(item));
  }

  json documents = json::array();
  for (const auto& [seq, entry] : entries) {
    if (entry.mutation != Mutation::create_node) continue;
    const auto& p = entry.payload;
    if (!TypePath(p.at("type").get<std::string>()).starts_with(types::kDocument)) continue;
    json doc{{"id", p.at("id")}, {"label", p.at("label")}, {"type", p.at("type")}, {"created", seq}};
    if (const auto& attrs = p.at("attributes"); attrs.contains("object")) {
      doc["digest"] = attrs["object"]["value"];
    }
    if (const auto& attrs = p.at("attributes"); attrs.contains("media_type")) {
      doc["media_type"] = attrs["media_type"]["value"];
    }
    documents.push_back(std::move(doc));
  }

  json nodes = json::array();
  json edges = json::array();
  for (const auto id : chosen) {
    if (state->node(id)) nodes.push_back(id.value);
  }
  std::set<std::uint64_t> edge_ids;
  for (const auto id : chosen) {
    if (state->edge(id)) edge_ids.insert(id.value);
    const auto index = state->node_index(id);
    if (!index) continue;
    for (const auto e : state->incident(*index)) {
      const auto& edge = state->edges()[e];
      if (!edge.hidden && chosen.contains(edge.from) && chosen.contains(edge.to)) edge_ids.insert(edge.id.value);
    }
  }
  for (const auto e : edge_ids) edges.push_back(e);

  json selection_ids = json::array();
  for (const auto id : chosen) selection_ids.push_back(id.value);
  json entry_list = json::array();
  for (const auto& [_, e] : entries) entry_list.push_back(e.to_json());

  const auto size = store.log().size();
  return json{{"title", selection.title},
              {"generated_at", clock.now_rfc3339()},
              {"log_head", {{"seq", size == 0 ? 0 : size - 1}, {"hash", store.log().head_hash()}}},
              {"selection", selection_ids},
              {"items", items},
              {"documents", documents},
              {"graph", {{"nodes", nodes}, {"edges", edges}}},
              {"entries", entry_list}};
}

std::vector<std::string> verify(const json& bundle) {
  std::vector<std::string> problems;
  std::map<std::uint64_t, ProvenanceEntry> entries;
  try {
    for (const auto& j : bundle.at("entries")) {
      auto e = ProvenanceEntry::from_json(j);
      if (e.compute_hash() != e.entry_hash) problems.push_back("entry " + std::to_string(e.seq) + ": hash mismatch");
      if (!entries.emplace(e.seq, std::move(e)).second) problems.push_back("duplicate entry seq");
    }
    const auto head_seq = bundle.at("log_head").at("seq").get<std::uint64_t>();
    const auto head_hash = bundle.at("log_head").at("hash").get<std::string>();
    const ProvenanceEntry* prev = nullptr;
    for (const auto& [seq, e] : entries) {
      if (seq > head_seq) problems.push_back("entry " + std::to_string(seq) + " lies beyond the log head");
      if (seq == head_seq && e.entry_hash != head_hash) problems.push_back("log head hash does not match its entry");
      if (prev && prev->seq + 1 == seq && e.prev_hash != prev->entry_hash) {
        problems.push_back("entry " + std::to_string(seq) + ": not chained to entry " + std::to_string(prev->seq));
      }
      if (seq == 0 && e.prev_hash != kGenesisHash) problems.push_back("entry 0 does not start from genesis");
      prev = &e;
    }
    const auto claim = [&](const json& item, const char* name, std::initializer_list<Mutation> kinds) -> bool {
      const auto& claims = item.at("claims");
      if (!claims.contains(name)) return false;
      const auto seq = claims.at(name).get<std::uint64_t>();
      const auto it = entries.find(seq);
      const auto id = item.at("id").get<std::uint64_t>();
      if (it == entries.end() || std::find(kinds.begin(), kinds.end(), it->second.mutation) == kinds.end() ||
          !targets(it->second.payload, id)) {
        problems.push_back("item " + std::to_string(id) + ": claim '" + name + "' does not resolve");
      }
      return true;
    };
    for (const auto& item : bundle.at("items")) {
      const auto id = item.at("id").get<std::uint64_t>();
      if (!claim(item, "created", {Mutation::create_node, Mutation::create_edge})) {
        problems.push_back("item " + std::to_string(id) + ": no creation claim");
      }
      const bool hidden_claim = claim(item, "hidden", {Mutation::hide});
      if (hidden_claim != item.at("record").at("hidden").get<bool>()) {
        problems.push_back("item " + std::to_string(id) + ": hidden flag has no matching claim");
      }
      claim(item, "reviewed", {Mutation::review});
      for (const auto& seq : item.at("trace")) {
        if (!entries.contains(seq.get<std::uint64_t>())) {
          problems.push_back("item " + std::to_string(id) + ": trace entry " + seq.dump() + " missing");
        }
      }
    }
    for (const auto& doc : bundle.at("documents")) {
      const auto seq = doc.at("created").get<std::uint64_t>();
      const auto it = entries.find(seq);
      const auto id = doc.at("id").get<std::uint64_t>();
      if (it == entries.end() || it->second.mutation != Mutation::create_node || !targets(it->second.payload, id)) {
        problems.push_back("document " + std::to_string(id) + ": creation does not resolve");
        continue;
      }
      if (doc.contains("digest")) {
        const auto& attrs = it->second.payload.at("attributes");
        if (!attrs.contains("object") || attrs["object"]["value"] != doc["digest"]) {
          problems.push_back("document " + std::to_string(id) + ": digest does not match its creation entry");
        }
      }
    }
  } catch (const std::exception& e) {
    problems.push_back(std::string("malformed bundle: ") + e.what());
  }
  return problems;
}

std::string render_html(const json& bundle) {
  std::ostringstream out;
  out << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>" << escape(bundle.value("title", "Case report"))
      << "</title>\n<style>body{font-family:sans-serif;margin:2em}table{border-collapse:collapse}"
         "td,th{border:1px solid #999;padding:2px 6px;text-align:left;vertical-align:top}"
         ".hidden{color:#888}</style></head><body>\n";
  out << "<h1>" << escape(bundle.value("title", "Case report")) << "</h1>\n";
  out << "<p>Generated " << escape(bundle.at("generated_at").get<std::string>()) << " from log head seq "
      << bundle.at("log_head").at("seq") << " (<code>" << escape(bundle.at("log_head").at("hash").get<std::string>())
      << "</code>).</p>\n";

  std::map<std::uint64_t, json> by_seq;
  for (const auto& e : bundle.at("entries")) by_seq.emplace(e.at("seq").get<std::uint64_t>(), e);

  out << "<h2>Items</h2>\n<table><tr><th>Id</th><th>Kind</th><th>Label / relation</th><th>Grade</th>"
         "<th>Status</th></tr>\n";
  for (const auto& item : bundle.at("items")) {
    const auto& r = item.at("record");
    const bool hidden = r.at("hidden").get<bool>();
    out << "<tr" << (hidden ? " class=\"hidden\"" : "") << "><td>" << item.at("id") << "</td><td>";
    if (item.at("kind") == "node") {
      out << escape(r.at("type").get<std::string>()) << "</td><td>" << escape(r.at("label").get<std::string>())
          << "</td><td></td>";
    } else {
      out << "edge</td><td>" << r.at("from") << " " << escape(r.at("kind").get<std::string>()) << " " << r.at("to")
          << "</td><td>" << escape(r.at("grade").get<std::string>()) << "</td>";
    }
    out << "<td>" << (hidden ? "hidden: " + escape(r.at("hide_reason").get<std::string>()) : std::string("visible"))
        << (r.at("reviewed").get<bool>() ? ", reviewed" : "") << "</td></tr>\n";
  }
  out << "</table>\n<h2>Documents</h2>\n<table><tr><th>Id</th><th>Type</th><th>Name</th><th>SHA-256</th></tr>\n";
  for (const auto& d : bundle.at("documents")) {
    out << "<tr><td>" << d.at("id") << "</td><td>" << escape(d.at("type").get<std::string>()) << "</td><td>"
        << escape(d.at("label").get<std::string>()) << "</td><td><code>"
        << escape(d.value("digest", std::string("(derived)"))) << "</code></td></tr>\n";
  }
  out << "</table>\n<h2>Traces</h2>\n";
  for (const auto& item : bundle.at("items")) {
    out << "<h3>Item " << item.at("id") << "</h3>\n<table><tr><th>Seq</th><th>Time</th><th>Actor</th>"
           "<th>Mutation</th><th>Payload</th></tr>\n";
    for (const auto& seq : item.at("trace")) {
      const auto& e = by_seq.at(seq.get<std::uint64_t>());
      out << "<tr><td>" << seq << "</td><td>" << escape(e.at("timestamp").get<std::string>()) << "</td><td>"
          << escape(e.at("actor").at("kind").get<std::string>() + ":" + e.at("actor").at("id").get<std::string>())
          << "</td><td>" << escape(e.at("mutation").get<std::string>()) << "</td><td><code>"
          << escape(e.at("payload").dump()) << "</code></td></tr>\n";
    }
    out << "</table>\n";
  }
  out << "</body></html>\n";
  return out.str();
}

}  // namespace casegraph::report
