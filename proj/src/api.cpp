#include "casegraph/api.hpp"

#include <httplib.h>

#include <algorithm>
#include <sstream>

#include "casegraph/digest.hpp"
#include "casegraph/error.hpp"
#include "casegraph/report.hpp"

namespace casegraph::api {

using nlohmann::json;

namespace {

constexpr std::size_t kDefaultPage = 200;
constexpr std::size_t kMaxPage = 1000;

struct HttpError {
  int status;
  std::string code;
  std::string message;
  json details = json::object();
};

Response json_response(int status, const json& body) { return {status, "application/json", body.dump()}; }

Response error_response(const HttpError& e) {
  return json_response(e.status, {{"code", e.code}, {"message", e.message}, {"details", e.details}});
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto next = s.find(sep, pos);
    const auto part = s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos);
    if (!part.empty()) out.emplace_back(part);
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

std::uint64_t parse_id(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != s.size() || s.empty() || s[0] == '-') throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw HttpError{400, "invalid_argument", std::string("malformed ") + what + " '" + s + "'"};
  }
}

bool flag(const std::map<std::string, std::string>& q, const std::string& name) {
  const auto it = q.find(name);
  return it != q.end() && (it->second == "true" || it->second == "1");
}

ViewFilter filter_from_query(const std::map<std::string, std::string>& q) {
  ViewFilter f;
  f.include_hidden = flag(q, "include_hidden");
  f.cross_match_only = flag(q, "cross_match_only");
  if (const auto it = q.find("min_grade"); it != q.end()) f.min_grade = ConfidenceGrade::parse(it->second);
  if (const auto it = q.find("types"); it != q.end()) {
    for (const auto& t : split(it->second, ',')) f.type_selection.emplace_back(t);
  }
  if (const auto it = q.find("edge_kinds"); it != q.end()) f.edge_kinds = split(it->second, ',');
  const auto from = q.find("from");
  const auto to = q.find("to");
  if (from != q.end() || to != q.end()) {
    if (from == q.end() || to == q.end()) throw HttpError{400, "invalid_argument", "time range needs both from and to"};
    f.time_range = std::pair(parse_rfc3339(from->second), parse_rfc3339(to->second));
  }
  return f;
}

ViewFilter filter_from_json(const json& j) {
  ViewFilter f;
  if (j.is_null()) return f;
  f.include_hidden = j.value("include_hidden", false);
  f.cross_match_only = j.value("cross_match_only", false);
  if (j.contains("min_grade") && !j["min_grade"].is_null()) {
    f.min_grade = ConfidenceGrade::parse(j["min_grade"].get<std::string>());
  }
  if (j.contains("types")) {
    for (const auto& t : j["types"]) f.type_selection.emplace_back(t.get<std::string>());
  }
  if (j.contains("edge_kinds")) f.edge_kinds = j["edge_kinds"].get<std::vector<std::string>>();
  if (j.contains("time_range") && !j["time_range"].is_null()) {
    const auto& r = j["time_range"];
    f.time_range = std::pair(parse_rfc3339(r.at(0).get<std::string>()), parse_rfc3339(r.at(1).get<std::string>()));
  }
  return f;
}

json cluster_json(const AliasCluster& c) {
  json members = json::array();
  json edges = json::array();
  for (const auto m : c.members) members.push_back(m.value);
  for (const auto e : c.confirming_edges) edges.push_back(e.value);
  return {{"representative", c.representative.value},
          {"members", members},
          {"confirming_edges", edges},
          {"grade", c.grade.str()}};
}

json receipt_json(const Receipt& r) { return {{"seqs", r.seqs}}; }

}  // namespace

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::unknown_item: return 404;
    case ErrorCode::permission_denied: return 403;
    case ErrorCode::already_hidden:
    case ErrorCode::duplicate_module:
    case ErrorCode::duplicate_path:
    case ErrorCode::no_prior_run: return 409;
    case ErrorCode::dangling_endpoint:
    case ErrorCode::kind_violation:
    case ErrorCode::schema_violation:
    case ErrorCode::type_mismatch:
    case ErrorCode::validation_error:
    case ErrorCode::ontology_error:
    case ErrorCode::document_mismatch: return 422;
    case ErrorCode::storage_failure:
    case ErrorCode::broken_chain:
    case ErrorCode::layout_diverged: return 500;
    default: return 400;
  }
}

struct Service::Impl {
  Engine& engine;
  httplib::Server server;

  explicit Impl(Engine& e) : engine(e) {}

  Principal authenticate(const Request& req) const {
    const auto it = req.headers.find("authorization");
    if (it == req.headers.end() || !it->second.starts_with("Bearer ")) {
      throw HttpError{401, "unauthenticated", "missing bearer token"};
    }
    const auto token = it->second.substr(7);
    const auto p = engine.config().tokens.find(token);
    if (p == engine.config().tokens.end()) throw HttpError{401, "unauthenticated", "unknown token"};
    return p->second;
  }

  static void require(const Principal& p, Capability c) {
    if (!p.can(c)) {
      throw HttpError{403, "permission_denied",
                      "capability '" + std::string(to_string(c)) + "' required",
                      {{"actor", p.actor}, {"capability", std::string(to_string(c))}}};
    }
  }

  static void require_hidden_access(const Principal& p, bool include_hidden) {
    if (include_hidden && !p.can(Capability::review)) {
      throw HttpError{403, "permission_denied", "include_hidden requires the review capability",
                      {{"actor", p.actor}, {"capability", "review"}}};
    }
  }

  static json body_of(const Request& req) {
    if (req.body.empty()) return json::object();
    try {
      return json::parse(req.body);
    } catch (const json::parse_error& e) {
      throw HttpError{400, "parse_error", "request body is not valid JSON", {{"byte", e.byte}}};
    }
  }

  json page(const GraphView& view, const std::map<std::string, std::string>& q) const {
    const std::uint64_t cursor = q.contains("cursor") ? parse_id(q.at("cursor"), "cursor") : 0;
    std::size_t limit = kDefaultPage;
    if (q.contains("limit")) limit = std::clamp<std::size_t>(parse_id(q.at("limit"), "limit"), 1, kMaxPage);
    std::vector<ItemId> ids;
    ids.reserve(view.nodes.size() + view.edges.size());
    std::merge(view.nodes.begin(), view.nodes.end(), view.edges.begin(), view.edges.end(), std::back_inserter(ids));
    auto it = std::upper_bound(ids.begin(), ids.end(), ItemId{cursor});
    json nodes = json::array();
    json edges = json::array();
    std::size_t taken = 0;
    std::uint64_t last = cursor;
    engine.store().read([&](const GraphState& state) {
      for (; it != ids.end() && taken < limit; ++it, ++taken) {
        if (const auto* n = state.node(*it)) {
          nodes.push_back(to_json(*n));
        } else if (const auto* e = state.edge(*it)) {
          edges.push_back(to_json(*e));
        }
        last = it->value;
      }
      return 0;
    });
    json clusters = json::array();
    for (const auto& c : view.clusters) clusters.push_back(cluster_json(c));
    return {{"nodes", nodes},
            {"edges", edges},
            {"clusters", clusters},
            {"total", ids.size()},
            {"next_cursor", it == ids.end() ? json(nullptr) : json(last)}};
  }

  json item_json(ItemId id, bool include_hidden) const {
    if (const auto n = engine.store().node(id); n && (!n->hidden || include_hidden)) return to_json(*n);
    if (const auto e = engine.store().edge(id); e && (!e->hidden || include_hidden)) return to_json(*e);
    throw HttpError{404, "unknown_item", "unknown item " + std::to_string(id.value)};
  }

  void visible_or_404(ItemId id, bool include_hidden) const { (void)item_json(id, include_hidden); }

  Response route(const Request& req) {
    const auto seg = split(req.path, '/');
    const auto& m = req.method;
    if (m == "GET" && seg == std::vector<std::string>{"healthz"}) {
      return json_response(200, {{"status", "ok"},
                                 {"head_hash", engine.log().head_hash()},
                                 {"entries", engine.log().size()}});
    }
    const auto who = authenticate(req);
    const auto actor = Actor::user(who.actor);
    const auto& q = req.query;
    const bool include_hidden = flag(q, "include_hidden");

    if (m == "GET") {
      require(who, Capability::read);
      require_hidden_access(who, include_hidden);
    }

    if (seg.size() == 2 && seg[0] == "graph" && m == "GET") {
      const auto filter = filter_from_query(q);
      if (seg[1] == "view") return json_response(200, page(engine.store().apply_filter(filter), q));
      if (seg[1] == "neighborhood") {
        if (!q.contains("center")) throw HttpError{400, "invalid_argument", "center is required"};
        const auto center = ItemId{parse_id(q.at("center"), "center")};
        const auto k = q.contains("k") ? parse_id(q.at("k"), "k") : 1;
        return json_response(200, page(engine.store().neighborhood(center, static_cast<std::uint32_t>(k), filter), q));
      }
    }

    if (seg.size() == 1 && seg[0] == "ingest" && m == "POST") {
      require(who, Capability::ingest);
      std::string bytes;
      std::string media_type;
      std::string name;
      const auto ct = req.headers.contains("content-type") ? req.headers.at("content-type") : std::string();
      if (ct.starts_with("application/json")) {
        const auto body = body_of(req);
        media_type = body.at("media_type").get<std::string>();
        name = body.value("name", std::string());
        if (body.contains("content_base64")) {
          bytes = base64_decode(body.at("content_base64").get<std::string>());
        } else {
          bytes = body.at("content").get<std::string>();
        }
      } else {
        bytes = req.body;
        media_type = ct;
        if (q.contains("name")) name = q.at("name");
      }
      const auto job = engine.orchestrator().ingest(bytes, media_type, actor, name);
      return json_response(201, job.to_json());
    }

    if (seg.size() == 2 && seg[0] == "jobs" && m == "GET") {
      const auto job = engine.orchestrator().job(parse_id(seg[1], "job id"));
      if (!job) throw HttpError{404, "unknown_item", "unknown job " + seg[1]};
      return json_response(200, job->to_json());
    }

    if (seg.size() == 1 && seg[0] == "modules" && m == "GET") {
      json out = json::array();
      for (const auto& d : engine.orchestrator().modules()) {
        json listeners = json::array();
        for (const auto& l : d.listeners) {
          json kinds = json::array();
          for (const auto k : l.mutations) kinds.push_back(std::string(to_string(k)));
          listeners.push_back({{"type", l.type.str()}, {"mutations", kinds}});
        }
        json actions = json::array();
        for (const auto& a : d.actions) actions.push_back({{"id", a.id}, {"label", a.label}, {"target", a.target.str()}});
        json previews = json::array();
        for (const auto& p : d.previews) previews.push_back({{"target", p.target.str()}, {"renderer", p.renderer}});
        out.push_back({{"id", d.id},
                       {"ingest_types", d.ingest_types},
                       {"listeners", listeners},
                       {"actions", actions},
                       {"previews", previews}});
      }
      return json_response(200, out);
    }

    if (seg.size() == 1 && seg[0] == "search" && m == "POST") {
      require(who, Capability::read);
      const auto body = body_of(req);
      search::SearchQuery query;
      query.text = body.at("text").get<std::string>();
      if (body.contains("modes")) {
        query.modes.clear();
        for (const auto& mode : body["modes"]) query.modes.insert(search::parse_mode(mode.get<std::string>()));
      }
      query.fuzzy_max_edits = body.value("fuzzy_max_edits", query.fuzzy_max_edits);
      query.ontology_max_depth = body.value("ontology_max_depth", query.ontology_max_depth);
      if (body.contains("scope")) query.scope = search::parse_scope(body["scope"].get<std::string>());
      if (body.contains("filter")) query.filter = filter_from_json(body["filter"]);
      require_hidden_access(who, query.filter.include_hidden);
      json hits = json::array();
      for (const auto& h : engine.search().search(query, actor)) hits.push_back(h.to_json());
      return json_response(200, {{"hits", hits}, {"ontology_version", engine.ontology().current()->version()}});
    }

    if (seg.size() == 1 && seg[0] == "nodes" && m == "POST") {
      require(who, Capability::annotate);
      const auto body = body_of(req);
      NodeCandidate c{TypePath(body.at("type").get<std::string>()), body.at("label").get<std::string>(),
                      body.contains("attributes") ? attributes_from_json(body["attributes"]) : Attributes{}};
      const auto r = engine.store().upsert_node(c, actor);
      return json_response(r.created ? 201 : 200, {{"id", r.id.value}, {"created", r.created}});
    }

    if (seg.size() == 1 && seg[0] == "edges" && m == "POST") {
      require(who, Capability::annotate);
      const auto body = body_of(req);
      EdgeCandidate c{body.at("kind").get<std::string>(),
                      ItemId{body.at("from").get<std::uint64_t>()},
                      ItemId{body.at("to").get<std::uint64_t>()},
                      body.contains("grade") ? std::optional(ConfidenceGrade::parse(body["grade"].get<std::string>()))
                                             : std::nullopt,
                      body.contains("attributes") ? attributes_from_json(body["attributes"]) : Attributes{}};
      return json_response(201, {{"id", engine.store().upsert_edge(c, actor).value}});
    }

    if (seg.size() == 1 && seg[0] == "clusters" && m == "POST") {
      require(who, Capability::review);
      const auto body = body_of(req);
      std::vector<ItemId> members;
      for (const auto& v : body.at("members")) members.push_back(ItemId{v.get<std::uint64_t>()});
      const auto grade = ConfidenceGrade::parse(body.value("grade", std::string("B2")));
      return json_response(201, cluster_json(engine.store().merge_cluster(members, actor, grade)));
    }

    if (seg.size() >= 2 && seg[0] == "items") {
      const ItemId id{parse_id(seg[1], "item id")};
      if (seg.size() == 2 && m == "GET") return json_response(200, item_json(id, include_hidden));
      if (seg.size() == 3 && m == "GET") {
        visible_or_404(id, include_hidden);
        if (seg[2] == "trace") {
          json out = json::array();
          for (const auto& e : engine.store().trace(id)) out.push_back(e.to_json());
          return json_response(200, out);
        }
        if (seg[2] == "actions") {
          json out = json::array();
          for (const auto& a : engine.orchestrator().list_context_actions(id, include_hidden)) {
            out.push_back({{"module", a.module}, {"action", a.action}, {"label", a.label}});
          }
          return json_response(200, out);
        }
        if (seg[2] == "previews") {
          json out = json::array();
          for (const auto& p : engine.orchestrator().list_previews(id)) {
            out.push_back({{"module", p.module}, {"renderer", p.renderer}});
          }
          return json_response(200, out);
        }
      }
      if (seg.size() == 3 && m == "POST") {
        const auto body = body_of(req);
        if (seg[2] == "hide") {
          require(who, Capability::annotate);
          return json_response(200, receipt_json(engine.store().hide(id, actor, body.value("reason", std::string()))));
        }
        if (seg[2] == "review") {
          require(who, Capability::review);
          std::optional<ConfidenceGrade> grade;
          if (body.contains("grade") && !body["grade"].is_null()) {
            grade = ConfidenceGrade::parse(body["grade"].get<std::string>());
          }
          return json_response(200, receipt_json(engine.store().review(id, actor, grade)));
        }
        if (seg[2] == "annotate") {
          require(who, Capability::annotate);
          const auto disposition = disposition_from_string(body.value("disposition", std::string("none")));
          return json_response(
              200, receipt_json(engine.store().annotate(id, actor, body.at("comment").get<std::string>(), disposition)));
        }
      }
    }

    if (seg.size() == 2 && seg[0] == "documents" && m == "GET") {
      const ItemId id{parse_id(seg[1], "document id")};
      auto doc = item_json(id, include_hidden);
      if (!doc.contains("type") || !TypePath(doc["type"].get<std::string>()).starts_with(types::kDocument)) {
        throw HttpError{404, "unknown_item", "item " + seg[1] + " is not a document"};
      }
      json mentions = json::array();
      engine.store().read([&](const GraphState& state) {
        const auto index = state.node_index(id);
        for (const auto e : state.incident(*index)) {
          const auto& edge = state.edges()[e];
          if (edge.kind != relations::kMentionedIn || edge.to != id) continue;
          const auto* node = state.node(edge.from);
          if (!include_hidden && (edge.hidden || node->hidden)) continue;
          mentions.push_back({{"edge", edge.id.value},
                              {"node", node->id.value},
                              {"label", node->label},
                              {"type", node->type.str()},
                              {"attributes", to_json(edge.attributes)},
                              {"grade", edge.grade.str()}});
        }
        return 0;
      });
      return json_response(200, {{"document", doc}, {"mentions", mentions}});
    }

    if (seg.size() == 3 && seg[0] == "actions" && m == "POST") {
      require(who, Capability::annotate);
      const auto body = body_of(req);
      const ItemId item{body.at("item").get<std::uint64_t>()};
      visible_or_404(item, false);
      return json_response(200, engine.orchestrator().invoke_action(
                                    seg[1], seg[2], item, body.value("parameters", json::object()), actor));
    }

    if (seg.size() == 1 && seg[0] == "ontology") {
      if (m == "GET") return json_response(200, engine.ontology().current()->to_json());
      if (m == "POST") {
        require(who, Capability::annotate);
        const auto next = engine.ontology().edit(search::OntologyEdit::from_json(body_of(req)), actor);
        return json_response(200, {{"version", next->version()}});
      }
    }

    if (seg.size() == 1 && seg[0] == "layout" && m == "POST") {
      require(who, Capability::read);
      const auto body = body_of(req);
      const auto filter = filter_from_json(body.value("filter", json()));
      require_hidden_access(who, filter.include_hidden);
      auto params = engine.config().layout;
      if (body.contains("params")) {
        auto merged = params.to_json();
        merged.update(body["params"]);
        params = layout::Params::from_json(merged);
      }
      const auto view = body.contains("center")
                            ? engine.store().neighborhood(ItemId{body["center"].get<std::uint64_t>()},
                                                          body.value("k", 2u), filter)
                            : engine.store().apply_filter(filter);
      if (view.nodes.empty()) return json_response(200, {{"positions", json::array()}, {"params", params.to_json()}});
      const auto positions = engine.store().read(
          [&](const GraphState& state) { return layout::layout_view(state, view, params); });
      return json_response(200, {{"positions", positions.to_json()}, {"params", params.to_json()}});
    }

    if (seg.size() == 1 && seg[0] == "report" && m == "GET") {
      report::Selection sel;
      sel.title = q.contains("title") ? q.at("title") : "Case report";
      sel.include_hidden = include_hidden;
      if (q.contains("ids")) {
        for (const auto& s : split(q.at("ids"), ',')) sel.items.push_back(ItemId{parse_id(s, "item id")});
      }
      const auto bundle = report::build(engine.store(), sel, engine.clock());
      if (q.contains("format") && q.at("format") == "html") return {200, "text/html; charset=utf-8", report::render_html(bundle)};
      return json_response(200, bundle);
    }

    throw HttpError{404, "not_found", "no route for " + m + " " + req.path};
  }
};

Service::Service(Engine& engine) : engine_(engine), impl_(std::make_shared<Impl>(engine)) {}

Response Service::handle(const Request& request) {
  try {
    return impl_->route(request);
  } catch (const HttpError& e) {
    return error_response(e);
  } catch (const Error& e) {
    json details = json::object();
    if (const auto* v = dynamic_cast<const ner::ValidationFailure*>(&e)) {
      json issues = json::array();
      for (const auto& i : v->issues()) issues.push_back({{"line", i.line}, {"message", i.message}});
      details["issues"] = issues;
    }
    return error_response({http_status(e.code()), std::string(to_string(e.code())), e.what(), details});
  } catch (const json::exception& e) {
    return error_response({400, "invalid_argument", std::string("malformed request: ") + e.what()});
  }
}

void Service::serve(const std::string& host, int port) {
  const auto handler = [this](const httplib::Request& hreq, httplib::Response& hres) {
    Request req;
    req.method = hreq.method;
    req.path = hreq.path;
    for (const auto& [k, v] : hreq.params) req.query[k] = v;
    for (const auto& [k, v] : hreq.headers) {
      std::string key = k;
      std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
      req.headers[key] = v;
    }
    req.body = hreq.body;
    const auto res = handle(req);
    hres.status = res.status;
    hres.set_content(res.body, res.content_type);
  };
  impl_->server.Get(".*", handler);
  impl_->server.Post(".*", handler);
  // SO_REUSEADDR only; the httplib default also sets SO_REUSEPORT, which would let a second server share the port
  impl_->server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
  if (!impl_->server.bind_to_port(host, port)) {
    throw Error(ErrorCode::invalid_argument, "cannot bind " + host + ":" + std::to_string(port) + " (port in use?)");
  }
  impl_->server.listen_after_bind();
}

void Service::stop() { impl_->server.stop(); }

}  // namespace casegraph::api
