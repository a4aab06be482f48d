#pragma once

// Shared fixtures and independent oracles. Nothing here calls the code under
// test for the answer it is meant to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "casegraph/graph_store.hpp"
#include "casegraph/layout.hpp"
#include "casegraph/ner.hpp"
#include "casegraph/schema.hpp"

namespace testing {

using namespace casegraph;

inline constexpr EpochSeconds kFixedTime = 1700000000;  // 2023-11-14T22:13:20Z

struct MemStore {
  std::shared_ptr<const SchemaRegistry> schema = std::make_shared<const SchemaRegistry>(default_registry());
  std::shared_ptr<ProvenanceLog> log = std::make_shared<ProvenanceLog>(Clock::fixed(kFixedTime));
  GraphStore store{schema, log};
};

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "casegraph-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline ConfidenceGrade grade_of(int index) {  // 0..35 -> A1..F6
  return {static_cast<char>('A' + index / 6), 1 + index % 6};
}

// -- edit distance: textbook full-matrix Levenshtein -------------------------

inline std::size_t levenshtein(const std::u32string& a, const std::u32string& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
  }
  return d[a.size()][b.size()];
}

// -- direct n-body summation (long double accumulation) ----------------------

inline std::vector<layout::Vec2> direct_forces(const std::vector<layout::Vec2>& p, double strength) {
  std::vector<layout::Vec2> out(p.size());
  const long double min2 = static_cast<long double>(layout::kMinDistance) * layout::kMinDistance;
  for (std::size_t i = 0; i < p.size(); ++i) {
    long double fx = 0, fy = 0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (i == j) continue;
      const long double dx = static_cast<long double>(p[j].x) - p[i].x;
      const long double dy = static_cast<long double>(p[j].y) - p[i].y;
      const long double d2 = std::max(dx * dx + dy * dy, min2);
      fx += strength * dx / d2;
      fy += strength * dy / d2;
    }
    out[i] = {static_cast<double>(fx), static_cast<double>(fy)};
  }
  return out;
}

// -- random graph with a mirror model for the neighborhood oracle ------------

struct ModelNode {
  ItemId id;
  TypePath type;
  bool hidden = false;
  std::optional<Interval> interval;
};

struct ModelEdge {
  ItemId id;
  std::string kind;
  std::size_t a = 0, b = 0;
  ConfidenceGrade grade;
  bool hidden = false;
};

struct RandomGraph {
  std::unique_ptr<MemStore> mem = std::make_unique<MemStore>();
  std::vector<ModelNode> nodes;
  std::vector<ModelEdge> edges;
};

inline RandomGraph random_graph(std::mt19937_64& rng, std::size_t n, std::size_t m, double hide_rate = 0.1) {
  static const std::vector<TypePath> kTypes{types::kPerson, types::kOrganization, TypePath("Thing/Location/City"),
                                            types::kDatetime, TypePath("Thing/Event/Meeting")};
  static const std::vector<std::string> kKinds{"related_to", "same_as"};
  RandomGraph g;
  auto& store = g.mem->store;
  const auto user = Actor::user("analyst");
  const auto module = Actor::module("ner");
  std::uniform_int_distribution<std::size_t> pick_type(0, kTypes.size() - 1);
  std::uniform_int_distribution<std::int64_t> pick_time(0, 1000);
  std::bernoulli_distribution coin(0.5);
  std::bernoulli_distribution hide(hide_rate);

  for (std::size_t i = 0; i < n; ++i) {
    ModelNode node;
    node.type = kTypes[pick_type(rng)];
    NodeCandidate c{node.type, "n" + std::to_string(i), {}};
    if (node.type == types::kDatetime) {
      const auto s = pick_time(rng);
      node.interval = Interval{s, s + 1 + pick_time(rng) % 50};
      c.attributes["interval"] = *node.interval;
    }
    node.id = store.upsert_node(c, coin(rng) ? user : module).id;
    g.nodes.push_back(node);
  }
  if (n == 0) return g;
  std::uniform_int_distribution<std::size_t> pick_node(0, n - 1);
  std::uniform_int_distribution<int> pick_grade(0, 35);
  for (std::size_t i = 0; i < m; ++i) {
    ModelEdge e;
    e.a = pick_node(rng);
    e.b = pick_node(rng);
    e.kind = kKinds[coin(rng)];
    const auto requested = grade_of(pick_grade(rng));
    const bool by_module = coin(rng);
    e.grade = requested;
    if (by_module && e.grade.reliability < 'C') e.grade.reliability = 'C';
    e.id = store.upsert_edge({e.kind, g.nodes[e.a].id, g.nodes[e.b].id, requested, {}}, by_module ? module : user);
    g.edges.push_back(e);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!hide(rng)) continue;
    store.hide(g.nodes[i].id, user, "noise");
    g.nodes[i].hidden = true;
    for (auto& e : g.edges) {
      if (e.a == i || e.b == i) e.hidden = true;
    }
  }
  for (auto& e : g.edges) {
    if (e.hidden || !hide(rng)) continue;
    store.hide(e.id, user, "noise");
    e.hidden = true;
  }
  return g;
}

inline ViewFilter random_filter(std::mt19937_64& rng) {
  ViewFilter f;
  std::bernoulli_distribution often(0.5);
  std::bernoulli_distribution rarely(0.25);
  f.include_hidden = rarely(rng);
  if (often(rng)) f.min_grade = grade_of(static_cast<int>(rng() % 36));
  if (rarely(rng)) {
    f.type_selection = {types::kEntity};
    if (often(rng)) f.type_selection.push_back(types::kDatetime);
  }
  if (rarely(rng)) f.edge_kinds = {"related_to"};
  if (rarely(rng)) {
    const EpochSeconds t0 = static_cast<EpochSeconds>(rng() % 800);
    f.time_range = std::pair(t0, t0 + static_cast<EpochSeconds>(rng() % 300));
  }
  return f;
}

struct OracleView {
  std::set<std::uint64_t> nodes;
  std::set<std::uint64_t> edges;
};

inline bool grade_meets(const ConfidenceGrade& g, const ConfidenceGrade& t) {
  return g.reliability <= t.reliability && g.credibility <= t.credibility;
}

// Visibility from the filter rules applied to the mirror model, then a
// plain queue BFS.
inline OracleView bfs_oracle(const RandomGraph& g, std::size_t center, std::uint32_t k, const ViewFilter& f) {
  const auto n = g.nodes.size();
  const auto present = [&](bool hidden) { return f.include_hidden || !hidden; };
  const auto kind_ok = [&](const ModelEdge& e) {
    return f.edge_kinds.empty() || std::count(f.edge_kinds.begin(), f.edge_kinds.end(), e.kind) > 0;
  };
  std::vector<bool> node_ok(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& node = g.nodes[i];
    bool selected = f.type_selection.empty();
    for (const auto& t : f.type_selection) {
      const auto& s = node.type.str();
      if (s == t.str() || (s.size() > t.str().size() && s.compare(0, t.str().size(), t.str()) == 0 &&
                           s[t.str().size()] == '/')) {
        selected = true;
      }
    }
    node_ok[i] = present(node.hidden) && selected;
  }
  if (f.time_range) {
    const auto [t0, t1] = *f.time_range;
    std::vector<bool> hit(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& iv = g.nodes[i].interval;
      hit[i] = present(g.nodes[i].hidden) && iv && iv->start <= t1 && iv->end > t0;
    }
    std::vector<bool> near(n);
    for (const auto& e : g.edges) {
      if (!present(e.hidden) || !kind_ok(e)) continue;
      if (hit[e.b]) near[e.a] = true;
      if (hit[e.a]) near[e.b] = true;
    }
    for (std::size_t i = 0; i < n; ++i) node_ok[i] = node_ok[i] && (hit[i] || near[i]);
  }
  std::vector<bool> edge_ok(g.edges.size());
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const auto& e = g.edges[i];
    edge_ok[i] = present(e.hidden) && kind_ok(e) && (!f.min_grade || grade_meets(e.grade, *f.min_grade)) &&
                 node_ok[e.a] && node_ok[e.b];
    if (edge_ok[i]) {
      adj[e.a].push_back(e.b);
      adj[e.b].push_back(e.a);
    }
  }
  OracleView out;
  if (!node_ok[center]) return out;
  std::vector<int> dist(n, -1);
  std::queue<std::size_t> q;
  dist[center] = 0;
  q.push(center);
  while (!q.empty()) {
    const auto u = q.front();
    q.pop();
    if (dist[u] == static_cast<int>(k)) continue;
    for (const auto v : adj[u]) {
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        q.push(v);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (dist[i] >= 0) out.nodes.insert(g.nodes[i].id.value);
  }
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const auto& e = g.edges[i];
    if (edge_ok[i] && dist[e.a] >= 0 && dist[e.b] >= 0) out.edges.insert(e.id.value);
  }
  return out;
}

inline std::set<std::uint64_t> id_set(const std::vector<ItemId>& ids) {
  std::set<std::uint64_t> out;
  for (const auto id : ids) out.insert(id.value);
  return out;
}

// -- ontology expansion by exhaustive simple-path enumeration ----------------

struct BruteExpansion {
  std::size_t depth = 0;
  std::vector<std::string> path;
};

inline std::map<std::string, BruteExpansion> expand_bruteforce(
    const std::map<std::string, std::set<std::string>>& adjacency, const std::string& start, std::size_t max_depth) {
  std::map<std::string, BruteExpansion> best;
  std::vector<std::string> path;
  std::set<std::string> on_path{start};
  const std::function<void(const std::string&)> dfs = [&](const std::string& at) {
    auto [it, inserted] = best.try_emplace(at, BruteExpansion{path.size(), path});
    if (!inserted && (path.size() < it->second.depth || (path.size() == it->second.depth && path < it->second.path))) {
      it->second = {path.size(), path};
    }
    if (path.size() == max_depth) return;
    const auto adj = adjacency.find(at);
    if (adj == adjacency.end()) return;
    for (const auto& next : adj->second) {
      if (on_path.contains(next)) continue;
      on_path.insert(next);
      path.push_back(next);
      dfs(next);
      path.pop_back();
      on_path.erase(next);
    }
  };
  dfs(start);
  return best;
}

// -- least-squares slope of log(y) on log(x) ----------------------------------

inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace testing

namespace testing {

// Random mixed operation sequence against a store. Operations that the store
// rejects are part of the mix; the count of accepted ones is returned.
inline std::size_t apply_random_ops(GraphStore& store, std::mt19937_64& rng, std::size_t count) {
  static const std::vector<TypePath> kTypes{types::kPerson, types::kOrganization, TypePath("Thing/Location/City"),
                                            types::kTextDocument, TypePath("Thing/Event/PhoneCall")};
  static const std::vector<std::string> kLabels{"Anna", "anna", "Bob", "Berlin", "ACME  Corp", "acme corp", "Ödön",
                                                "Call 1", "Memo"};
  static const std::vector<std::string> kKinds{"related_to", "same_as", "mentioned_in", "located_at", "member_of"};
  const std::vector<Actor> actors{Actor::user("alice"), Actor::user("bob"), Actor::module("ner"),
                                  Actor::module("speech_to_text")};
  std::vector<ItemId> nodes;
  std::vector<ItemId> items;
  store.read([&](const GraphState& s) {
    for (const auto& n : s.nodes()) nodes.push_back(n.id);
    for (const auto& n : s.nodes()) items.push_back(n.id);
    for (const auto& e : s.edges()) items.push_back(e.id);
    return 0;
  });
  const auto pick = [&](const auto& v) { return v[rng() % v.size()]; };
  std::size_t accepted = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const auto actor = pick(actors);
    const auto op = rng() % 100;
    try {
      if (op < 30 || nodes.size() < 2) {
        NodeCandidate c{pick(kTypes), pick(kLabels), {}};
        std::optional<Attribution> attribution;
        if (rng() % 2 && !nodes.empty()) attribution = Attribution{pick(nodes), actor.id, rng() % 5};
        const auto id = (op % 7 == 0) ? store.insert_node(c, actor, attribution)
                                      : store.upsert_node(c, actor, attribution).id;
        nodes.push_back(id);
        items.push_back(id);
      } else if (op < 60) {
        EdgeCandidate c{pick(kKinds), pick(nodes), pick(nodes), grade_of(static_cast<int>(rng() % 36)), {}};
        if (rng() % 5 == 0) c.grade.reset();
        items.push_back(store.upsert_edge(c, actor));
      } else if (op < 72) {
        store.hide(pick(items), actor, "reason " + std::to_string(i));
      } else if (op < 84) {
        const auto id = pick(items);
        std::optional<ConfidenceGrade> g;
        if (!store.node(id)) g = grade_of(static_cast<int>(rng() % 36));
        store.review(id, actor, g);
      } else if (op < 96) {
        store.annotate(pick(items), actor, "note " + std::to_string(i), static_cast<Disposition>(rng() % 3));
      } else {
        const auto cluster = store.merge_cluster({pick(nodes), pick(nodes), pick(nodes)}, actor,
                                                 grade_of(static_cast<int>(rng() % 36)));
        for (const auto e : cluster.confirming_edges) items.push_back(e);
      }
      ++accepted;
    } catch (const Error&) {
    }
  }
  return accepted;
}

// -- NER toy corpus: 50 documents of length 100 with hand-counted outcomes ----
//
// PERSON    gold [0,4) everywhere; d40..d44 predicted as ORGANIZATION, d45..d49 missed.
// LOCATION  gold [10,16) in even docs; d%4==0 exact, d%4==2 predicted [10,15);
//           spurious [20,25) in d1, d3, d5.
// DATETIME  gold [30,40) in d0..d9, all found (d0 predicted twice).
// ORGANIZATION gold [50,57) in d10..d19, none found.

struct ToyExpectation {
  std::size_t tp, fp, fn;
};

inline const std::map<std::string, ToyExpectation> kToyPerLabel{
    {"PERSON", {40, 0, 10}},
    {"LOCATION", {13, 15, 12}},
    {"DATETIME", {10, 0, 0}},
    {"ORGANIZATION", {0, 5, 10}},
};
inline constexpr ToyExpectation kToyMicro{63, 20, 32};

inline std::string toy_span(int d, int start, int end, const char* label) {
  return R"({"doc":"d)" + std::to_string(d) + R"(","start":)" + std::to_string(start) + R"(,"end":)" +
         std::to_string(end) + R"(,"label":")" + label + "\"}\n";
}

inline std::string ner_toy_gold() {
  std::string out;
  for (int d = 0; d < 50; ++d) {
    out += R"({"doc":"d)" + std::to_string(d) + R"(","length":100})" + "\n";
    out += toy_span(d, 0, 4, "PERSON");
    if (d % 2 == 0) out += toy_span(d, 10, 16, "LOCATION");
    if (d < 10) out += toy_span(d, 30, 40, "DATETIME");
    if (d >= 10 && d < 20) out += toy_span(d, 50, 57, "ORGANIZATION");
  }
  return out;
}

inline std::string ner_toy_predictions() {
  std::string out;
  for (int d = 0; d < 50; ++d) {
    if (d < 40) out += toy_span(d, 0, 4, "PERSON");
    else if (d < 45) out += toy_span(d, 0, 4, "ORGANIZATION");
    if (d % 4 == 0) out += toy_span(d, 10, 16, "LOCATION");
    if (d % 4 == 2) out += toy_span(d, 10, 15, "LOCATION");
    if (d == 1 || d == 3 || d == 5) out += toy_span(d, 20, 25, "LOCATION");
    if (d < 10) out += toy_span(d, 30, 40, "DATETIME");
    if (d == 0) out += toy_span(d, 30, 40, "DATETIME");
  }
  return out;
}

// Random span sets over a few documents, for identity checks.
inline std::vector<ner::Span> random_spans(std::mt19937_64& rng, std::size_t count) {
  std::vector<ner::Span> out;
  for (std::size_t i = 0; i < count; ++i) {
    const auto start = rng() % 200;
    out.push_back({"doc" + std::to_string(rng() % 5), start, start + 1 + rng() % 20,
                   ner::kAllLabels[rng() % ner::kAllLabels.size()]});
  }
  return out;
}

}  // namespace testing
