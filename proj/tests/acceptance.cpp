// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Oracles come from support.hpp; nothing here reuses the code under test to
// produce an expected value.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

#include "casegraph/error.hpp"
#include "casegraph/layout.hpp"
#include "casegraph/modules/builtin.hpp"
#include "casegraph/ner.hpp"
#include "casegraph/orchestration.hpp"
#include "casegraph/search.hpp"
#include "casegraph/text.hpp"
#include "support.hpp"

using namespace casegraph;
using nlohmann::json;
using Clock_ = std::chrono::steady_clock;

namespace {

double seconds_since(Clock_::time_point t0) {
  return std::chrono::duration<double>(Clock_::now() - t0).count();
}

// A criterion appends failures to `problems` and notes to `notes`.
struct Outcome {
  std::vector<std::string> problems;
  std::ostringstream notes;

  void expect(bool ok, const std::string& what) {
    if (!ok && problems.size() < 5) problems.push_back(what);
    if (!ok) ++failures;
  }
  std::size_t failures = 0;
};

int run_criterion(const std::string& name, const std::function<void(Outcome&)>& body) {
  Outcome out;
  const auto t0 = Clock_::now();
  try {
    body(out);
  } catch (const std::exception& e) {
    out.expect(false, std::string("uncaught exception: ") + e.what());
  }
  const double took = seconds_since(t0);
  std::cout << (out.failures == 0 ? "PASS " : "FAIL ") << name << " (" << std::fixed;
  std::cout.precision(2);
  std::cout << took << " s) " << out.notes.str() << '\n';
  for (const auto& p : out.problems) std::cout << "    " << p << '\n';
  if (out.failures > out.problems.size()) std::cout << "    ... " << out.failures << " failures in total\n";
  std::cout.flush();
  return out.failures == 0 ? 0 : 1;
}

// -- event sourcing ------------------------------------------------------------

void event_sourcing_identity(Outcome& out) {
  std::mt19937_64 rng(1001);
  const auto t0 = Clock_::now();
  std::size_t accepted = 0;
  for (int round = 0; round < 1000; ++round) {
    testing::MemStore m;
    accepted += testing::apply_random_ops(m.store, rng, 20 + rng() % 100);
    const auto live = m.store.snapshot();
    const auto replayed = replay(m.log->snapshot());
    out.expect(replayed.to_json() == live->to_json(), "replay differs from live state in round " + std::to_string(round));
    out.expect(replayed.fingerprint() == live->fingerprint(), "fingerprint differs in round " + std::to_string(round));
  }
  const double took = seconds_since(t0);
  out.expect(took < 60, "took " + std::to_string(took) + " s, limit 60 s");
  out.notes << "1000 sequences, " << accepted << " accepted operations";
}

void chain_integrity(Outcome& out) {
  std::mt19937_64 rng(1002);
  testing::MemStore m;
  testing::apply_random_ops(m.store, rng, 300);
  const auto entries = m.log->snapshot();
  std::vector<std::string> clean;
  for (const auto& e : entries) clean.push_back(e.to_line());
  out.expect(verify_chain(entries).ok, "clean chain does not verify");
  std::size_t detected = 0;
  for (int trial = 0; trial < 500; ++trial) {
    auto lines = clean;
    const auto seq = rng() % lines.size();
    const auto bit = rng() % (lines[seq].size() * 8);
    lines[seq][bit / 8] = static_cast<char>(lines[seq][bit / 8] ^ (1 << (bit % 8)));
    std::string text = log_header_line() + "\n";
    for (const auto& l : lines) text += l + "\n";
    const auto s = verify_log_text(text);
    const bool ok = !s.ok && s.broken_seq == seq;
    detected += ok;
    out.expect(ok, "flip of bit " + std::to_string(bit) + " in seq " + std::to_string(seq) + " reported as " +
                       (s.ok ? std::string("intact") : "seq " + std::to_string(s.broken_seq)));
  }
  out.notes << detected << "/500 flips detected at the right seq over " << entries.size() << " entries";
}

// -- grades ---------------------------------------------------------------------

void automation_cap(Outcome& out) {
  testing::MemStore m;
  const auto user = Actor::user("analyst");
  const auto module = Actor::module("ner");
  const auto a = m.store.upsert_node({types::kPerson, "A", {}}, user).id;
  const auto b = m.store.upsert_node({types::kPerson, "B", {}}, user).id;
  std::size_t clamped = 0;
  for (int g = 0; g < 36; ++g) {
    const auto requested = testing::grade_of(g);
    const auto id = m.store.upsert_edge({"related_to", a, b, requested, {}}, module);
    const auto stored = m.store.edge(id)->grade;
    out.expect(stored.reliability >= 'C', "module request " + requested.str() + " stored as " + stored.str());
    clamped += stored != requested;
    // user review lifts the same edge past the cap
    m.store.review(id, user, ConfidenceGrade::parse("A1"));
    out.expect(m.store.edge(id)->grade.str() == "A1", "review to A1 not applied for " + requested.str());
  }
  out.expect(clamped == 12, "expected the 12 A and B requests to be clamped, got " + std::to_string(clamped));
  out.notes << "36 requested grades, " << clamped << " clamped to C, review reaches A1";
}

// -- neighborhoods ---------------------------------------------------------------

void neighborhood_correctness(Outcome& out) {
  std::mt19937_64 rng(1004);
  std::size_t queries = 0, empty = 0;
  for (int round = 0; round < 100; ++round) {
    const std::size_t n = 1 + rng() % 1000;
    auto g = testing::random_graph(rng, n, n + rng() % (2 * n + 1), 0.1);
    for (std::uint32_t k = 0; k <= 4; ++k) {
      const auto center = rng() % n;
      const auto filter = round % 4 == 0 ? ViewFilter{} : testing::random_filter(rng);
      const auto expect = testing::bfs_oracle(g, center, k, filter);
      ++queries;
      const std::string where = "graph " + std::to_string(round) + " k=" + std::to_string(k);
      if (expect.nodes.empty()) {
        ++empty;
        bool threw = false;
        try {
          (void)g.mem->store.neighborhood(g.nodes[center].id, k, filter);
        } catch (const Error&) {
          threw = true;
        }
        out.expect(threw, where + ": center filtered out but no error");
        continue;
      }
      const auto got = g.mem->store.neighborhood(g.nodes[center].id, k, filter);
      out.expect(testing::id_set(got.nodes) == expect.nodes, where + ": node sets differ");
      out.expect(testing::id_set(got.edges) == expect.edges, where + ": edge sets differ");
    }
  }
  out.notes << queries << " queries on 100 graphs (" << empty << " with the center filtered out)";
}

// -- cascade -------------------------------------------------------------------

constexpr std::string_view kCall =
    "S1: Anna called Bob\n"
    "S2: I was in Berlin\n"
    "S3: Meet on 12.03.2022\n"
    "S4: Bob agreed\n";

struct CascadeRig {
  explicit CascadeRig(EpochSeconds at)
      : log(std::make_shared<ProvenanceLog>(Clock::fixed(at))),
        store(std::make_shared<const SchemaRegistry>(default_registry()), log),
        objects(dir.path() / "objects"),
        orchestrator(store, objects, OrchestratorConfig{8, 1}) {
    modules::register_builtin_modules(orchestrator, ner::sample_gazetteer());
  }
  testing::TempDir dir;
  std::shared_ptr<ProvenanceLog> log;
  GraphStore store;
  ObjectStore objects;
  Orchestrator orchestrator;
};

std::vector<const NodeRecord*> visible_of(const GraphState& s, const TypePath& type) {
  std::vector<const NodeRecord*> out;
  for (const auto& n : s.nodes()) {
    if (!n.hidden && n.type == type) out.push_back(&n);
  }
  return out;
}

std::vector<json> without_time(const std::vector<ProvenanceEntry>& entries) {
  std::vector<json> out;
  for (const auto& e : entries) {
    auto j = e.to_json();
    j.erase("timestamp");
    j.erase("entry_hash");
    j.erase("prev_hash");
    out.push_back(std::move(j));
  }
  return out;
}

void cascade_fixture(Outcome& out) {
  const auto alice = Actor::user("alice");
  const auto run = [&](EpochSeconds at, bool check) {
    CascadeRig rig(at);
    const auto job = rig.orchestrator.ingest(kCall, "audio/x-mock", alice, "call.wav");
    const auto before = rig.store.snapshot();
    const auto speakers = visible_of(*before, types::kSpeaker);
    const auto transcripts = visible_of(*before, types::kTranscript);
    std::vector<ItemId> old_entities;
    for (const auto& type : {types::kPerson, types::kLocation, types::kDatetime}) {
      for (const auto* n : visible_of(*before, type)) old_entities.push_back(n->id);
    }
    const auto r = rig.orchestrator.rerun_with_parameters(job.document, "speaker_recognition",
                                                          json{{"deselect", {"S2", "S3"}}}, alice);
    const auto after = rig.store.snapshot();
    if (check) {
      out.expect(job.status == JobStatus::done, "ingest job not done");
      out.expect(speakers.size() == 4, "expected 4 speakers, got " + std::to_string(speakers.size()));
      out.expect(transcripts.size() == 1, "expected one transcript before the rerun");
      out.expect(old_entities.size() >= 3, "cascade did not reach NER");
      out.expect(r.superseded_runs.size() == 3, "expected speaker, transcript and NER runs superseded");
      if (!transcripts.empty()) {
        const auto* old_t = after->node(transcripts[0]->id);
        out.expect(old_t->hidden && old_t->hide_reason == "superseded", "old transcript not hidden as superseded");
        out.expect(!rig.store.trace(old_t->id).empty(), "old transcript not traceable");
      }
      for (const auto id : old_entities) {
        const auto* n = after->node(id);
        out.expect(n->hidden && n->hide_reason == "superseded", "old entity " + n->label + " not superseded");
      }
      const auto new_transcripts = visible_of(*after, types::kTranscript);
      out.expect(new_transcripts.size() == 1, "expected one visible transcript after the rerun");
      if (!new_transcripts.empty()) {
        out.expect(std::get<std::string>(new_transcripts[0]->attributes.at("content")) == "Anna called Bob\nBob agreed\n",
                   "new transcript keeps deselected speakers");
        out.expect(!rig.store.trace(new_transcripts[0]->id).empty(), "new transcript not traceable");
      }
      const auto people = visible_of(*after, types::kPerson);
      out.expect(people.size() == 2, "expected Anna and Bob as new entities");
      for (const auto* p : people) {
        out.expect(std::find(old_entities.begin(), old_entities.end(), p->id) == old_entities.end(),
                   "entity " + p->label + " is not a new generation");
      }
      out.expect(visible_of(*after, types::kLocation).empty(), "Berlin survives the deselection of S2");
      out.notes << r.superseded_runs.size() << " runs superseded, " << old_entities.size()
                << " old entities hidden, " << people.size() << " new persons";
    }
    return without_time(rig.log->snapshot());
  };
  const auto a = run(testing::kFixedTime, true);
  const auto b = run(testing::kFixedTime + 86400, false);
  out.expect(a == b, "provenance logs differ between two single-worker runs");
  out.notes << ", logs identical modulo timestamps (" << a.size() << " entries)";
}

// -- search ---------------------------------------------------------------------

std::string random_word(std::mt19937_64& rng, std::size_t min_len, std::size_t max_len) {
  static const std::string alphabet = "abcde";
  const auto len = min_len + rng() % (max_len - min_len + 1);
  std::string w;
  for (std::size_t i = 0; i < len; ++i) w += alphabet[rng() % alphabet.size()];
  return w;
}

std::string mutate(std::mt19937_64& rng, std::string w, std::size_t edits) {
  static const std::string alphabet = "abcdef";
  for (std::size_t e = 0; e < edits; ++e) {
    const auto pos = w.empty() ? 0 : rng() % w.size();
    switch (w.empty() ? 0 : rng() % 3) {
      case 0: w.insert(w.begin() + static_cast<std::ptrdiff_t>(pos), alphabet[rng() % alphabet.size()]); break;
      case 1: w.erase(pos, 1); break;
      default: w[pos] = alphabet[rng() % alphabet.size()];
    }
  }
  return w;
}

void ontological_search(Outcome& out) {
  using namespace search;
  const auto alice = Actor::user("alice");
  testing::MemStore m;
  const auto accommodation = m.store.upsert_node({types::kLocation, "Accommodation", {}}, alice).id;
  const std::vector<std::pair<std::string, ItemId>> expected{
      {"hut", m.store.upsert_node({types::kLocation, "hut", {}}, alice).id},
      {"hotel", m.store.upsert_node({types::kLocation, "Hotel", {}}, alice).id},
      {"cottage", m.store.upsert_node({types::kLocation, "Cottage", {}}, alice).id}};
  const auto unrelated = m.store.upsert_node({types::kLocation, "Berlin", {}}, alice).id;
  const auto state = m.store.snapshot();
  TextIndex index;
  index.sync(*state);
  SearchQuery q;
  q.text = "accommodation";
  q.modes = {Mode::exact, Mode::ontological};
  q.ontology_max_depth = 1;
  q.scope = Scope::labels;
  SearchConfig config;
  const auto hits = run_query(*state, index, sample_ontology(), q, config);
  std::size_t exact_rank = hits.size();
  std::map<ItemId, std::size_t> rank;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    rank.emplace(hits[i].target.item, i);
    if (hits[i].mode == Mode::exact && hits[i].target.item == accommodation) exact_rank = i;
  }
  out.expect(exact_rank == 0, "exact hit is not ranked first");
  for (const auto& [term, id] : expected) {
    const auto it = rank.find(id);
    out.expect(it != rank.end(), term + " not returned");
    if (it == rank.end()) continue;
    const auto& h = hits[it->second];
    out.expect(h.mode == Mode::ontological, term + " not an ontological hit");
    out.expect(h.score == std::pow(config.decay, 1), term + " scored " + std::to_string(h.score));
    out.expect(it->second > exact_rank, term + " ranked above the exact hit");
  }
  out.expect(!rank.contains(unrelated), "unrelated label returned");

  // fuzzy against the textbook edit distance: 10,000 (query, label) pairs
  std::mt19937_64 rng(1006);
  testing::MemStore words;
  std::vector<std::pair<std::u32string, ItemId>> labels;
  while (labels.size() < 200) {
    const auto w = random_word(rng, 1, 8);
    const auto r = words.store.upsert_node({TypePath("Thing/Entity/Misc"), w, {}}, alice);
    if (r.created) labels.emplace_back(text::decode_utf8(w), r.id);
  }
  const auto wstate = words.store.snapshot();
  TextIndex windex;
  windex.sync(*wstate);
  const auto empty_onto = OntologyGraph::from_json({{"concepts", json::array()}});
  std::size_t pairs = 0, violations = 0;
  for (int round = 0; round < 50; ++round) {
    SearchQuery fq;
    fq.text = mutate(rng, random_word(rng, 1, 8), rng() % 3);
    if (fq.text.empty()) fq.text = "a";
    fq.modes = {Mode::fuzzy};
    fq.scope = Scope::labels;
    fq.fuzzy_max_edits = rng() % 4;
    std::map<ItemId, const SearchHit*> by_item;
    const auto fhits = run_query(*wstate, windex, empty_onto, fq, config);
    for (const auto& h : fhits) by_item[h.target.item] = &h;
    const auto q32 = text::decode_utf8(fq.text);
    for (const auto& [w, id] : labels) {
      ++pairs;
      const auto d = testing::levenshtein(q32, w);
      const auto longest = std::max(q32.size(), w.size());
      const bool want = d <= fq.fuzzy_max_edits && d < longest;
      bool ok = by_item.contains(id) == want;
      if (ok && want) {
        const auto* h = by_item.at(id);
        const double score = d == 0 ? 1.0 : 1.0 - static_cast<double>(d) / static_cast<double>(longest);
        ok = std::abs(h->score - score) <= 1e-12 && (h->mode == Mode::exact) == (d == 0);
      }
      violations += !ok;
      out.expect(ok, "query '" + fq.text + "' vs label " + std::to_string(id.value) + ": distance " + std::to_string(d));
    }
  }
  // and the bounded distance itself
  for (int i = 0; i < 10000; ++i) {
    const auto a = random_word(rng, 0, 10);
    const auto b = mutate(rng, a, rng() % 5);
    const auto a32 = text::decode_utf8(a), b32 = text::decode_utf8(b);
    const auto ref = testing::levenshtein(a32, b32);
    const std::size_t bound = rng() % 5;
    const auto got = text::edit_distance_bounded(a32, b32, bound);
    const bool ok = ref <= bound ? got == ref : got > bound;
    violations += !ok;
    out.expect(ok, "edit distance of '" + a + "' and '" + b + "'");
  }
  out.notes << "hut/hotel/cottage at " << config.decay << ", " << pairs << " search pairs and 10000 distance pairs, "
            << violations << " violations";
}

// -- NER ------------------------------------------------------------------------

void ner_harness(Outcome& out) {
  const auto gold = ner::import_annotations(testing::ner_toy_gold());
  out.expect(gold.documents.size() == 50, "toy gold set is not 50 documents");
  const auto report = ner::evaluate(ner::read_spans(testing::ner_toy_predictions()), gold);
  for (const auto& [name, want] : testing::kToyPerLabel) {
    const auto label = ner::parse_label(name);
    const auto it = report.per_label.find(*label);
    out.expect(it != report.per_label.end(), name + " missing from the report");
    if (it == report.per_label.end()) continue;
    const auto& c = it->second;
    out.expect(c.tp == want.tp && c.fp == want.fp && c.fn == want.fn,
               name + " counts " + std::to_string(c.tp) + "/" + std::to_string(c.fp) + "/" + std::to_string(c.fn));
    const double p = want.tp + want.fp ? static_cast<double>(want.tp) / static_cast<double>(want.tp + want.fp) : 0;
    const double r = want.tp + want.fn ? static_cast<double>(want.tp) / static_cast<double>(want.tp + want.fn) : 0;
    const double f = p + r > 0 ? 2 * p * r / (p + r) : 0;
    out.expect(std::abs(c.precision() - p) < 1e-12 && std::abs(c.recall() - r) < 1e-12 && std::abs(c.f1() - f) < 1e-12,
               name + " P/R/F1 differ from the hand count");
  }
  const auto& micro = report.micro;
  out.expect(micro.tp == testing::kToyMicro.tp && micro.fp == testing::kToyMicro.fp && micro.fn == testing::kToyMicro.fn,
             "micro counts differ");

  std::mt19937_64 rng(1007);
  for (int round = 0; round < 500; ++round) {
    const auto x = testing::random_spans(rng, 1 + rng() % 80);
    ner::GoldAnnotationSet g;
    for (const auto& s : x) {
      g.documents.try_emplace(s.doc, std::nullopt);
      g.spans.insert(s);
    }
    const auto r = ner::evaluate(x, g);
    bool perfect = r.micro.f1() == 1.0 && r.micro.precision() == 1.0 && r.micro.recall() == 1.0;
    for (const auto& [_, c] : r.per_label) perfect = perfect && c.f1() == 1.0;
    out.expect(perfect, "evaluate(X, X) below 1.0 in round " + std::to_string(round));
  }
  out.notes << "micro " << micro.tp << "/" << micro.fp << "/" << micro.fn << ", 500 fuzzed identity sets";
}

// -- layout ---------------------------------------------------------------------

double mean_relative_error(const std::vector<layout::Vec2>& got, const std::vector<layout::Vec2>& want) {
  double sum = 0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    sum += std::hypot(got[i].x - want[i].x, got[i].y - want[i].y) / std::max(std::hypot(want[i].x, want[i].y), 1e-300);
  }
  return sum / static_cast<double>(got.size());
}

double max_relative_error(const std::vector<layout::Vec2>& got, const std::vector<layout::Vec2>& want) {
  double worst = 0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    worst = std::max(worst, std::hypot(got[i].x - want[i].x, got[i].y - want[i].y) /
                                std::max(std::hypot(want[i].x, want[i].y), 1e-300));
  }
  return worst;
}

std::vector<ItemId> sequential_ids(std::size_t n) {
  std::vector<ItemId> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = ItemId{i + 1};
  return out;
}

std::vector<layout::Edge> random_edges(std::mt19937_64& rng, std::size_t n, std::size_t m) {
  std::vector<layout::Edge> out(m);
  for (auto& e : out) e = {static_cast<std::uint32_t>(rng() % n), static_cast<std::uint32_t>(rng() % n)};
  return out;
}

double time_step(const layout::State& initial, const std::vector<layout::Edge>& edges, const layout::Params& params,
                 layout::Kernel kernel, int repeats) {
  double best = 1e300;
  for (int i = 0; i < repeats; ++i) {
    auto s = initial;
    const auto t0 = Clock_::now();
    layout::step(s, edges, params, {kernel, false});
    best = std::min(best, seconds_since(t0));
  }
  return best;
}

void barnes_hut(Outcome& out) {
  const auto t0 = Clock_::now();
  std::mt19937_64 rng(1008);
  const layout::Params params;
  const auto points = layout::initialize(sequential_ids(1000), 11).position;
  const auto oracle = testing::direct_forces(points, params.charge);
  const double exact_err = max_relative_error(layout::charge_forces_barnes_hut(points, params.charge, 0.0, false), oracle);
  const double approx_err = mean_relative_error(layout::charge_forces_barnes_hut(points, params.charge, 0.5, false), oracle);
  out.expect(exact_err <= 1e-9, "theta 0 max relative error " + std::to_string(exact_err));
  out.expect(approx_err <= 0.05, "theta 0.5 mean relative error " + std::to_string(approx_err));

  std::vector<double> sizes, bh, direct;
  for (const std::size_t n : {2000, 4000, 8000, 16000}) {
    const auto state = layout::initialize(sequential_ids(n), 5);
    const auto edges = random_edges(rng, n, 2 * n);
    sizes.push_back(static_cast<double>(n));
    bh.push_back(time_step(state, edges, params, layout::Kernel::barnes_hut, 3));
    direct.push_back(time_step(state, edges, params, layout::Kernel::direct, n <= 4000 ? 3 : 1));
  }
  const double bh_slope = testing::loglog_slope(sizes, bh);
  const double direct_slope = testing::loglog_slope(sizes, direct);
  out.expect(bh_slope < 1.5, "Barnes-Hut slope " + std::to_string(bh_slope));
  out.expect(direct_slope > 1.7 && direct_slope < 2.3, "direct slope " + std::to_string(direct_slope) + " is not about 2");
  const double took = seconds_since(t0);
  out.expect(took < 300, "took " + std::to_string(took) + " s, limit 300 s");
  out.notes << "theta 0 max err " << exact_err << ", theta 0.5 mean err " << approx_err << ", slopes BH "
            << bh_slope << " vs direct " << direct_slope << " (step at 16k: " << bh.back() << " s vs "
            << direct.back() << " s)";
}

// -- scale ----------------------------------------------------------------------

void scale_anchor(Outcome& out) {
  constexpr std::size_t kNodes = 30000, kEdges = 100000;
  std::mt19937_64 rng(1009);
  testing::TempDir dir;
  std::shared_ptr<ProvenanceLog> log = ProvenanceLog::open_file(dir.path() / "provenance.ndjson", Clock::fixed(testing::kFixedTime));
  GraphStore store(std::make_shared<const SchemaRegistry>(default_registry()), log);
  const auto user = Actor::user("analyst");
  const auto module = Actor::module("ner");
  static const std::vector<TypePath> kTypes{types::kPerson, types::kOrganization, types::kLocation,
                                            TypePath("Thing/Event/Meeting")};

  auto t0 = Clock_::now();
  std::vector<ItemId> nodes;
  nodes.reserve(kNodes);
  for (std::size_t i = 0; i < kNodes; ++i) {
    nodes.push_back(store.insert_node({kTypes[i % kTypes.size()], "entity " + std::to_string(i), {}}, i % 2 ? user : module));
  }
  std::set<std::pair<std::size_t, std::size_t>> pairs;
  while (pairs.size() < kEdges) {
    const auto a = rng() % kNodes, b = rng() % kNodes;
    if (a != b) pairs.emplace(std::min(a, b), std::max(a, b));
  }
  for (const auto& [a, b] : pairs) {
    store.upsert_edge({"related_to", nodes[a], nodes[b], testing::grade_of(static_cast<int>(rng() % 36)), {}},
                      rng() % 2 ? user : module);
  }
  const double ingest = seconds_since(t0);
  const auto state = store.snapshot();
  out.expect(state->nodes().size() == kNodes && state->edges().size() == kEdges, "graph size differs");

  double worst = 0;
  std::size_t reached = 0;
  for (int q = 0; q < 20; ++q) {
    const auto center = nodes[rng() % kNodes];
    t0 = Clock_::now();
    const auto view = store.neighborhood(center, 3, {});
    worst = std::max(worst, seconds_since(t0));
    reached = std::max(reached, view.nodes.size());
  }
  out.expect(worst < 0.25, "slowest k=3 neighborhood took " + std::to_string(worst) + " s");

  const auto full = store.apply_filter({});
  std::unordered_map<std::uint64_t, std::uint32_t> index;
  for (std::size_t i = 0; i < full.nodes.size(); ++i) index.emplace(full.nodes[i].value, static_cast<std::uint32_t>(i));
  std::vector<layout::Edge> edges;
  for (const auto e : full.edges) {
    const auto* rec = state->edge(e);
    edges.push_back({index.at(rec->from.value), index.at(rec->to.value)});
  }
  auto layout_state = layout::initialize(full.nodes, 7);
  const layout::Params params;
  double step_worst = 0;
  for (int i = 0; i < 3; ++i) {
    t0 = Clock_::now();
    layout::step(layout_state, edges, params);
    step_worst = std::max(step_worst, seconds_since(t0));
  }
  out.expect(step_worst < 2.0, "layout step took " + std::to_string(step_worst) + " s");
  out.notes << "ingest " << ingest << " s (" << log->size() << " log entries), worst k=3 neighborhood " << worst * 1000
            << " ms reaching up to " << reached << " nodes, worst layout step " << step_worst << " s";
}

// -- build shape ----------------------------------------------------------------

void no_ui(Outcome& out) {
  std::vector<std::string> targets;
  std::istringstream in(CASEGRAPH_BUILD_TARGETS);
  for (std::string t; std::getline(in, t, ';');) {
    if (!t.empty()) targets.push_back(t);
  }
  out.expect(!targets.empty(), "no build targets recorded");
  for (const auto& t : targets) {
    std::string lower = t;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    out.expect(lower != "ui" && lower.find("web") == std::string::npos && lower.find("_ui") == std::string::npos &&
                   lower.find("ui_") == std::string::npos,
               "UI-like target " + t);
  }
  out.expect(!std::filesystem::exists(std::filesystem::path(CASEGRAPH_SOURCE_DIR) / "ui"), "a ui/ source tree exists");
  std::string joined;
  for (const auto& t : targets) joined += (joined.empty() ? "" : ", ") + t;
  out.notes << "targets: " << joined;
}

}  // namespace

int main() {
  int failed = 0;
  failed += run_criterion("event-sourcing identity: replay equals the live store for 1000 sequences", event_sourcing_identity);
  failed += run_criterion("chain integrity: 500 single-bit flips detected at the right seq", chain_integrity);
  failed += run_criterion("automation cap: 36 module grades stay at or below C, review exceeds it", automation_cap);
  failed += run_criterion("neighborhood correctness: 100 random graphs against the BFS oracle, k 0..4", neighborhood_correctness);
  failed += run_criterion("cascade fixture: audio to NER, speaker rerun supersedes, deterministic", cascade_fixture);
  failed += run_criterion("ontological search and fuzzy edit-distance agreement", ontological_search);
  failed += run_criterion("NER eval harness: 50-document toy set and evaluate(X, X)", ner_harness);
  failed += run_criterion("Barnes-Hut accuracy and sub-quadratic scaling", barnes_hut);
  failed += run_criterion("scale anchor: 30k nodes / 100k edges, k=3 under 250 ms, layout step under 2 s", scale_anchor);
  failed += run_criterion("no UI component built", no_ui);
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << '\n';
  return failed == 0 ? 0 : 1;
}
