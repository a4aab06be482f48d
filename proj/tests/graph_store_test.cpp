#include <doctest.h>

#include "casegraph/error.hpp"
#include "casegraph/graph_store.hpp"
#include "support.hpp"

using namespace casegraph;
using testing::MemStore;

namespace {

const Actor kAlice = Actor::user("alice");
const Actor kNer = Actor::module("ner");

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::invalid_argument;
}

ItemId person(GraphStore& s, const std::string& label, const Actor& actor = kAlice) {
  return s.upsert_node({types::kPerson, label, {}}, actor).id;
}

std::size_t count_mutations(const ProvenanceLog& log, Mutation m) {
  std::size_t n = 0;
  log.for_each([&](const ProvenanceEntry& e) { n += e.mutation == m; });
  return n;
}

}  // namespace

TEST_SUITE("graph_store") {
  TEST_CASE("upsert_node dedups on type and normalized label") {
    MemStore m;
    const auto a = m.store.upsert_node({types::kPerson, "Anna Adams", {}}, Actor::module("ner"));
    const auto b = m.store.upsert_node({types::kPerson, "Anna Adams", {}}, Actor::module("speech_to_text"));
    CHECK(a.created);
    CHECK_FALSE(b.created);
    CHECK(a.id == b.id);
    const auto c = m.store.upsert_node({types::kPerson, "anna  ADAMS", {}}, kAlice);
    CHECK(c.id == a.id);
    const auto d = m.store.upsert_node({types::kLocation, "Anna Adams", {}}, kAlice);
    CHECK(d.created);
    CHECK(d.id != a.id);
  }

  TEST_CASE("NFC normalization merges composed and decomposed forms") {
    MemStore m;
    const auto a = person(m.store, "Jos\xC3\xA9");   // precomposed e-acute
    const auto b = person(m.store, "JOSE\xCC\x81");  // E + combining acute
    CHECK(a == b);
  }

  TEST_CASE("hidden nodes do not absorb new upserts") {
    MemStore m;
    const auto a = person(m.store, "Anna");
    m.store.hide(a, kAlice, "wrong");
    const auto b = m.store.upsert_node({types::kPerson, "Anna", {}}, kAlice);
    CHECK(b.created);
    CHECK(b.id != a);
  }

  TEST_CASE("schema violations are rejected before logging") {
    MemStore m;
    const auto before = m.log->size();
    CHECK(code_of([&] { m.store.upsert_node({TypePath("Thing/Nope"), "x", {}}, kAlice); }) ==
          ErrorCode::schema_violation);
    CHECK(code_of([&] { m.store.upsert_node({types::kPerson, "x", {{"plate", std::string("B-1")}}}, kAlice); }) ==
          ErrorCode::schema_violation);
    CHECK(code_of([&] {
            m.store.upsert_node({types::kPerson, "x", {{"nationality", std::int64_t{3}}}}, kAlice);
          }) == ErrorCode::schema_violation);
    CHECK(m.log->size() == before);
  }

  TEST_CASE("edge grades: module cap, user grades, default F6") {
    MemStore m;
    const auto a = person(m.store, "A");
    const auto b = person(m.store, "B");
    const auto by_module = m.store.upsert_edge({"same_as", a, b, ConfidenceGrade::parse("A1"), {}}, kNer);
    CHECK(m.store.edge(by_module)->grade.str() == "C1");
    CHECK(count_mutations(*m.log, Mutation::clamp_grade) == 1);
    const auto by_user = m.store.upsert_edge({"same_as", a, b, ConfidenceGrade::parse("B2"), {}}, kAlice);
    CHECK(m.store.edge(by_user)->grade.str() == "B2");
    const auto unknown = m.store.upsert_edge({"related_to", a, b, std::nullopt, {}}, kAlice);
    CHECK(m.store.edge(unknown)->grade == kUnknownGrade);
    CHECK(code_of([&] { m.store.upsert_edge({"related_to", a, ItemId{999}, std::nullopt, {}}, kAlice); }) ==
          ErrorCode::dangling_endpoint);
    CHECK(code_of([&] { m.store.upsert_edge({"mentioned_in", a, b, std::nullopt, {}}, kAlice); }) ==
          ErrorCode::kind_violation);
  }

  TEST_CASE("automation cap holds for every requested grade") {
    MemStore m;
    const auto a = person(m.store, "A");
    const auto b = person(m.store, "B");
    for (int g = 0; g < 36; ++g) {
      const auto requested = testing::grade_of(g);
      const auto id = m.store.upsert_edge({"related_to", a, b, requested, {}}, kNer);
      const auto stored = m.store.edge(id)->grade;
      CHECK(stored.reliability >= 'C');
      CHECK(stored.credibility == requested.credibility);
      if (requested.reliability >= 'C') CHECK(stored == requested);
    }
    CHECK(count_mutations(*m.log, Mutation::clamp_grade) == 12);
  }

  TEST_CASE("review may raise above C and lower grades; modules cannot review") {
    MemStore m;
    const auto a = person(m.store, "A");
    const auto b = person(m.store, "B");
    const auto e = m.store.upsert_edge({"related_to", a, b, ConfidenceGrade::parse("C3"), {}}, kNer);
    m.store.review(e, kAlice, ConfidenceGrade::parse("B2"));
    CHECK(m.store.edge(e)->grade.str() == "B2");
    CHECK(m.store.edge(e)->reviewed);
    m.store.review(e, kAlice, ConfidenceGrade::parse("F6"));
    CHECK(m.store.edge(e)->grade.str() == "F6");
    CHECK(code_of([&] { m.store.review(e, kNer, ConfidenceGrade::parse("A1")); }) == ErrorCode::permission_denied);
    CHECK(code_of([&] { m.store.review(ItemId{77}, kAlice, std::nullopt); }) == ErrorCode::unknown_item);
  }

  TEST_CASE("hide is non-destructive and cascades to incident edges") {
    MemStore m;
    const auto doc = m.store.upsert_node({types::kTranscript, "Transcript", {}}, kNer).id;
    const auto anna = person(m.store, "Anna", kNer);
    const auto e = m.store.upsert_edge({"mentioned_in", anna, doc, ConfidenceGrade::parse("C3"), {}}, kNer);
    const auto receipt = m.store.hide(doc, kAlice, "superseded");
    CHECK(receipt.seqs.size() == 2);
    CHECK(m.store.edge(e)->hidden);
    CHECK(m.store.edge(e)->hide_reason == "superseded");
    CHECK(m.store.apply_filter({}).nodes == std::vector<ItemId>{anna});
    ViewFilter all;
    all.include_hidden = true;
    const auto view = m.store.apply_filter(all);
    CHECK(view.nodes.size() == 2);
    CHECK(view.edges == std::vector<ItemId>{e});
    CHECK(code_of([&] { m.store.hide(doc, kAlice, "again"); }) == ErrorCode::already_hidden);
    CHECK(code_of([&] { m.store.hide(ItemId{999}, kAlice, "x"); }) == ErrorCode::unknown_item);
  }

  TEST_CASE("annotate: disproved hides, comments stay") {
    MemStore m;
    const auto img = m.store.upsert_node({types::kImageDocument, "photo", {}}, kAlice).id;
    m.store.annotate(img, kAlice, "not her", Disposition::disproved);
    const auto n = m.store.node(img);
    CHECK(n->hidden);
    REQUIRE(n->annotations.size() == 1);
    CHECK(n->annotations[0].comment == "not her");
    const auto other = person(m.store, "Bob");
    m.store.annotate(other, Actor::user("carol"), "check alibi", Disposition::none);
    CHECK_FALSE(m.store.node(other)->hidden);
    CHECK(code_of([&] { m.store.annotate(ItemId{999}, kAlice, "x", Disposition::none); }) == ErrorCode::unknown_item);
  }

  TEST_CASE("neighborhood examples") {
    MemStore m;
    const auto a = person(m.store, "a");
    const auto b = person(m.store, "b");
    const auto c = person(m.store, "c");
    const auto d = person(m.store, "d");
    m.store.upsert_edge({"related_to", a, b, std::nullopt, {}}, kAlice);
    m.store.upsert_edge({"related_to", b, c, std::nullopt, {}}, kAlice);
    m.store.upsert_edge({"related_to", c, d, std::nullopt, {}}, kAlice);
    const auto k0 = m.store.neighborhood(a, 0, {});
    CHECK(k0.nodes == std::vector<ItemId>{a});
    CHECK(k0.edges.empty());
    CHECK(m.store.neighborhood(a, 2, {}).nodes == std::vector<ItemId>{a, b, c});
    CHECK(m.store.neighborhood(a, 2, {}).edges.size() == 2);
    m.store.hide(b, kAlice, "x");
    CHECK(m.store.neighborhood(a, 4, {}).nodes == std::vector<ItemId>{a});
    CHECK(code_of([&] { (void)m.store.neighborhood(b, 1, {}); }) == ErrorCode::unknown_item);
    CHECK(code_of([&] { (void)m.store.neighborhood(ItemId{999}, 1, {}); }) == ErrorCode::unknown_item);
  }

  TEST_CASE("neighborhood equals the BFS oracle on random graphs") {
    std::mt19937_64 rng(3);
    for (int round = 0; round < 15; ++round) {
      const auto n = 20 + rng() % 180;
      auto g = testing::random_graph(rng, n, n * 2);
      for (int q = 0; q < 8; ++q) {
        const auto center = rng() % n;
        const auto k = static_cast<std::uint32_t>(rng() % 5);
        const auto filter = testing::random_filter(rng);
        const auto expect = testing::bfs_oracle(g, center, k, filter);
        if (expect.nodes.empty()) {
          CHECK_THROWS_AS((void)g.mem->store.neighborhood(g.nodes[center].id, k, filter), Error);
          continue;
        }
        const auto got = g.mem->store.neighborhood(g.nodes[center].id, k, filter);
        CHECK(testing::id_set(got.nodes) == expect.nodes);
        CHECK(testing::id_set(got.edges) == expect.edges);
      }
    }
  }

  TEST_CASE("views are closed over edge endpoints and monotone in min_grade") {
    std::mt19937_64 rng(5);
    auto g = testing::random_graph(rng, 150, 400, 0.15);
    auto& store = g.mem->store;
    const auto state = store.snapshot();
    for (int q = 0; q < 30; ++q) {
      auto filter = testing::random_filter(rng);
      const auto view = store.apply_filter(filter);
      const auto nodes = testing::id_set(view.nodes);
      for (const auto e : view.edges) {
        CHECK(nodes.contains(state->edge(e)->from.value));
        CHECK(nodes.contains(state->edge(e)->to.value));
      }
      std::size_t previous = SIZE_MAX;
      for (int g6 = 35; g6 >= 0; g6 -= 7) {  // thresholds getting stricter
        filter.min_grade = testing::grade_of(g6);
        const auto stricter = store.apply_filter(filter);
        CHECK(stricter.edges.size() <= previous);
        previous = stricter.edges.size();
      }
    }
  }

  TEST_CASE("min_grade C3 drops F6 edges") {
    MemStore m;
    const auto a = person(m.store, "a");
    const auto b = person(m.store, "b");
    const auto weak = m.store.upsert_edge({"related_to", a, b, std::nullopt, {}}, kAlice);
    const auto strong = m.store.upsert_edge({"related_to", a, b, ConfidenceGrade::parse("B2"), {}}, kAlice);
    ViewFilter f;
    f.min_grade = ConfidenceGrade::parse("C3");
    CHECK(m.store.apply_filter(f).edges == std::vector<ItemId>{strong});
    CHECK(m.store.apply_filter({}).edges == std::vector<ItemId>{weak, strong});
  }

  TEST_CASE("cross_match_only needs two distinct visible source documents") {
    MemStore m;
    const auto d1 = m.store.upsert_node({types::kTextDocument, "d1", {}}, kAlice).id;
    const auto d2 = m.store.upsert_node({types::kTextDocument, "d2", {}}, kAlice).id;
    const auto once = m.store.upsert_node({types::kPerson, "Once", {}}, kNer, Attribution{d1, "ner", 1}).id;
    const auto twice = m.store.upsert_node({types::kPerson, "Twice", {}}, kNer, Attribution{d1, "ner", 1}).id;
    m.store.upsert_node({types::kPerson, "Twice", {}}, kNer, Attribution{d2, "ner", 2});
    m.store.upsert_node({types::kPerson, "Once", {}}, kNer, Attribution{d1, "ner", 3});
    ViewFilter f;
    f.cross_match_only = true;
    CHECK(m.store.apply_filter(f).nodes == std::vector<ItemId>{twice});
    (void)once;
    m.store.hide(d2, kAlice, "withdrawn");
    CHECK(m.store.apply_filter(f).nodes.empty());
  }

  TEST_CASE("time association: datetime, one hop, or a timestamped source document") {
    MemStore m;
    const auto when = m.store.upsert_node({types::kDatetime, "12.03.2022", {{"interval", Interval{100, 200}}}}, kAlice).id;
    const auto meeting = m.store.upsert_node({TypePath("Thing/Event/Meeting"), "meeting", {}}, kAlice).id;
    m.store.upsert_edge({"occurred_at", meeting, when, std::nullopt, {}}, kAlice);
    const auto doc = m.store.upsert_node({types::kTextDocument, "memo", {{"timestamp", Timestamp{500}}}}, kAlice).id;
    const auto attributed = m.store.upsert_node({types::kPerson, "Ann", {}}, kNer, Attribution{doc, "ner", 1}).id;
    const auto loose = person(m.store, "Loose");
    ViewFilter f;
    f.time_range = std::pair<EpochSeconds, EpochSeconds>(150, 160);
    CHECK(testing::id_set(m.store.apply_filter(f).nodes) == std::set<std::uint64_t>{when.value, meeting.value});
    f.time_range = std::pair<EpochSeconds, EpochSeconds>(450, 550);
    CHECK(testing::id_set(m.store.apply_filter(f).nodes) == std::set<std::uint64_t>{doc.value, attributed.value});
    f.time_range = std::pair<EpochSeconds, EpochSeconds>(200, 400);  // interval end is exclusive
    CHECK(m.store.apply_filter(f).nodes.empty());
    f.time_range = std::pair<EpochSeconds, EpochSeconds>(10, 5);
    CHECK(code_of([&] { (void)m.store.apply_filter(f); }) == ErrorCode::invalid_argument);
    CHECK(m.store.apply_filter({}).nodes.size() == 5);
    (void)loose;
  }

  TEST_CASE("alias clusters") {
    MemStore m;
    const auto a = person(m.store, "A");
    const auto a2 = person(m.store, "A-prime");
    const auto loc = m.store.upsert_node({types::kLocation, "Berlin", {}}, kAlice).id;
    const auto cluster = m.store.merge_cluster({a2, a}, kAlice, ConfidenceGrade::parse("B2"));
    CHECK(cluster.representative == a);
    CHECK(cluster.members.size() == 2);
    CHECK(cluster.confirming_edges.size() == 1);
    const auto view = m.store.apply_filter({});
    REQUIRE(view.clusters.size() == 1);
    CHECK(view.clusters[0].grade.str() == "B2");
    ViewFilter strict;
    strict.min_grade = ConfidenceGrade::parse("A1");
    CHECK(m.store.apply_filter(strict).clusters.empty());
    CHECK(code_of([&] { m.store.merge_cluster({a, loc}, kAlice, ConfidenceGrade::parse("B2")); }) ==
          ErrorCode::type_mismatch);
    CHECK(code_of([&] { m.store.merge_cluster({a}, kAlice, ConfidenceGrade::parse("B2")); }) ==
          ErrorCode::invalid_argument);
    CHECK(code_of([&] { m.store.merge_cluster({a, a2}, kNer, ConfidenceGrade::parse("B2")); }) ==
          ErrorCode::permission_denied);
  }

  TEST_CASE("unreviewed module same_as edges do not form clusters") {
    MemStore m;
    const auto a = person(m.store, "A");
    const auto b = person(m.store, "B");
    const auto e = m.store.upsert_edge({"same_as", a, b, ConfidenceGrade::parse("C2"), {}}, kNer);
    CHECK(m.store.apply_filter({}).clusters.empty());
    m.store.review(e, kAlice, std::nullopt);
    CHECK(m.store.apply_filter({}).clusters.size() == 1);
  }

  TEST_CASE("replay reproduces the live state for random operation sequences") {
    std::mt19937_64 rng(17);
    for (int round = 0; round < 25; ++round) {
      MemStore m;
      testing::apply_random_ops(m.store, rng, 60 + rng() % 60);
      const auto live = m.store.snapshot();
      const auto replayed = replay(m.log->snapshot());
      CHECK(replayed.to_json() == live->to_json());
      CHECK(replayed.fingerprint() == live->fingerprint());
      CHECK(verify_chain(m.log->snapshot()).ok);
    }
  }

  TEST_CASE("no dangling edges and item count never shrinks") {
    std::mt19937_64 rng(23);
    MemStore m;
    std::size_t previous = 0;
    for (int round = 0; round < 20; ++round) {
      testing::apply_random_ops(m.store, rng, 30);
      const auto s = m.store.snapshot();
      for (const auto& e : s->edges()) {
        CHECK(s->node(e.from) != nullptr);
        CHECK(s->node(e.to) != nullptr);
      }
      const auto total = s->nodes().size() + s->edges().size();
      CHECK(total >= previous);
      previous = total;
      for (const auto& e : s->edges()) {
        if (e.created_by.kind == ActorKind::module && !e.reviewed) CHECK(e.grade.reliability >= 'C');
      }
    }
  }

  TEST_CASE("replay up to a seq yields the historical state") {
    MemStore m;
    const auto a = person(m.store, "A");
    const auto mid = m.log->size() - 1;
    m.store.hide(a, kAlice, "x");
    CHECK_FALSE(replay(m.log->snapshot(), mid).node(a)->hidden);
    CHECK(replay(m.log->snapshot()).node(a)->hidden);
  }

  TEST_CASE("replay keeps the clamped grade") {
    MemStore m;
    const auto a = person(m.store, "A");
    const auto b = person(m.store, "B");
    const auto e = m.store.upsert_edge({"related_to", a, b, ConfidenceGrade::parse("A2"), {}}, kNer);
    CHECK(replay(m.log->snapshot()).edge(e)->grade.str() == "C2");
  }

  TEST_CASE("a failed commit leaves no visible mutation; restart replays the durable entry") {
    MemStore m;
    person(m.store, "A");
    const auto before = m.store.snapshot()->to_json();
    m.store.set_commit_fault([](const ProvenanceEntry&) { throw Error(ErrorCode::storage_failure, "crash"); });
    CHECK_THROWS_AS(person(m.store, "B"), Error);
    CHECK(m.store.snapshot()->to_json() == before);
    m.store.set_commit_fault(nullptr);
    GraphStore restarted(m.schema, m.log);
    restarted.rebuild_from_log();
    CHECK(restarted.snapshot()->nodes().size() == 2);
    CHECK(restarted.snapshot()->to_json() == replay(m.log->snapshot()).to_json());
  }

  TEST_CASE("trace covers the item, its documents and runs") {
    MemStore m;
    m.log->append(kAlice, Mutation::ingest, nlohmann::json{{"document", 1}, {"job", 1}});
    const auto doc = m.store.insert_node({types::kTextDocument, "memo", {}}, kAlice);
    m.store.record(kNer, Mutation::module_run, nlohmann::json{{"run", 4}, {"status", "started"}});
    const auto anna = m.store.upsert_node({types::kPerson, "Anna", {}}, kNer, Attribution{doc, "ner", 4}).id;
    m.store.hide(anna, kAlice, "duplicate");
    std::vector<std::string> kinds;
    for (const auto& e : m.store.trace(anna)) kinds.emplace_back(to_string(e.mutation));
    CHECK(kinds == std::vector<std::string>{"ingest", "create_node", "module_run", "create_node", "hide"});
    CHECK(code_of([&] { (void)m.store.trace(ItemId{999}); }) == ErrorCode::unknown_item);
  }
}
