#include "casegraph/search.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <unordered_set>

#include "casegraph/error.hpp"

namespace casegraph::search {

using nlohmann::json;

// -- ontology -------------------------------------------------------------------

std::string_view to_string(LinkKind k) {
  switch (k) {
    case LinkKind::synonym: return "synonym";
    case LinkKind::hyponym: return "hyponym";
    case LinkKind::hypernym: return "hypernym";
  }
  return "synonym";
}

LinkKind parse_link_kind(std::string_view s) {
  if (s == "synonym") return LinkKind::synonym;
  if (s == "hyponym") return LinkKind::hyponym;
  if (s == "hypernym") return LinkKind::hypernym;
  throw Error(ErrorCode::ontology_error, "unknown link relation '" + std::string(s) + "'");
}

namespace {

std::string term_of(const json& j) {
  if (!j.is_string()) throw Error(ErrorCode::ontology_error, "ontology terms must be strings");
  auto t = text::normalize(j.get<std::string>());
  if (t.empty()) throw Error(ErrorCode::ontology_error, "empty ontology term");
  return t;
}

OntologyLink link_of(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ontology_error, "ontology links must be objects");
  return {term_of(j.at("from")), parse_link_kind(j.at("rel").get<std::string>()), term_of(j.at("to"))};
}

json link_json(const OntologyLink& l) { return {{"from", l.from}, {"rel", std::string(to_string(l.rel))}, {"to", l.to}}; }

constexpr std::string_view kOps[] = {"add_concept", "remove_concept", "add_link", "remove_link"};

}  // namespace

json OntologyEdit::to_json() const {
  json j{{"op", std::string(kOps[static_cast<int>(op)])}};
  if (op == Op::add_concept || op == Op::remove_concept) {
    j["concept"] = concept_term;
  } else {
    j["link"] = link_json(link);
  }
  return j;
}

OntologyEdit OntologyEdit::from_json(const json& j) {
  OntologyEdit e;
  const auto op = j.at("op").get<std::string>();
  const auto it = std::find(std::begin(kOps), std::end(kOps), op);
  if (it == std::end(kOps)) throw Error(ErrorCode::ontology_error, "unknown ontology edit '" + op + "'");
  e.op = static_cast<Op>(it - std::begin(kOps));
  if (e.op == Op::add_concept || e.op == Op::remove_concept) {
    e.concept_term = term_of(j.at("concept"));
  } else {
    e.link = link_of(j.at("link"));
  }
  return e;
}

OntologyGraph OntologyGraph::from_json(const json& j) {
  OntologyGraph g;
  g.version_ = j.value("version", std::uint64_t{1});
  for (const auto& c : j.at("concepts")) g.concepts_.insert(term_of(c));
  if (j.contains("links")) {
    for (const auto& l : j.at("links")) g.add_link(link_of(l));
  }
  g.rebuild_adjacency();
  return g;
}

json OntologyGraph::to_json() const {
  json links = json::array();
  for (const auto& l : links_) {
    // synonyms are stored both ways; write each pair once
    if (l.rel == LinkKind::synonym && l.to < l.from) continue;
    links.push_back(link_json(l));
  }
  return {{"version", version_}, {"concepts", concepts_}, {"links", links}};
}

void OntologyGraph::add_link(const OntologyLink& link) {
  if (!concepts_.contains(link.from) || !concepts_.contains(link.to)) {
    throw Error(ErrorCode::ontology_error, "link " + link.from + " -> " + link.to + " names an unknown concept");
  }
  if (link.from == link.to) throw Error(ErrorCode::ontology_error, "self-link on " + link.from);
  if (!links_.insert(link).second) {
    throw Error(ErrorCode::ontology_error, "duplicate link " + link.from + " -> " + link.to);
  }
  if (link.rel == LinkKind::synonym) links_.insert({link.to, LinkKind::synonym, link.from});
}

void OntologyGraph::rebuild_adjacency() {
  adjacency_.clear();
  for (const auto& l : links_) {
    adjacency_[l.from].insert(l.to);
    adjacency_[l.to].insert(l.from);
  }
}

OntologyGraph OntologyGraph::apply(const OntologyEdit& edit) const {
  OntologyGraph next = *this;
  next.version_ = version_ + 1;
  switch (edit.op) {
    case OntologyEdit::Op::add_concept: {
      const auto term = text::normalize(edit.concept_term);
      if (term.empty()) throw Error(ErrorCode::ontology_error, "empty ontology term");
      if (!next.concepts_.insert(term).second) throw Error(ErrorCode::ontology_error, "concept exists: " + term);
      break;
    }
    case OntologyEdit::Op::remove_concept: {
      const auto term = text::normalize(edit.concept_term);
      if (!concepts_.contains(term)) throw Error(ErrorCode::ontology_error, "unknown concept " + term);
      if (adjacency_.contains(term)) {
        throw Error(ErrorCode::ontology_error, "concept " + term + " still has links; remove them first");
      }
      next.concepts_.erase(term);
      break;
    }
    case OntologyEdit::Op::add_link:
      next.add_link({text::normalize(edit.link.from), edit.link.rel, text::normalize(edit.link.to)});
      break;
    case OntologyEdit::Op::remove_link: {
      const OntologyLink l{text::normalize(edit.link.from), edit.link.rel, text::normalize(edit.link.to)};
      if (!next.links_.erase(l)) throw Error(ErrorCode::ontology_error, "unknown link " + l.from + " -> " + l.to);
      if (l.rel == LinkKind::synonym) next.links_.erase({l.to, LinkKind::synonym, l.from});
      break;
    }
  }
  next.rebuild_adjacency();
  return next;
}

std::vector<std::string> OntologyGraph::neighbors(const std::string& term) const {
  const auto it = adjacency_.find(term);
  if (it == adjacency_.end()) return {};
  return {it->second.begin(), it->second.end()};
}

OntologyGraph sample_ontology() {
  return OntologyGraph::from_json(json::parse(R"({
    "version": 1,
    "concepts": ["accommodation", "lodging", "hut", "hotel", "cottage", "motel", "hostel", "cabin",
                 "vehicle", "car", "truck", "van", "motorbike",
                 "weapon", "gun", "firearm", "knife", "rifle",
                 "drug", "cocaine", "heroin", "cannabis",
                 "money", "cash", "payment", "transfer",
                 "meeting", "appointment", "phone", "mobile phone"],
    "links": [
      {"from": "accommodation", "rel": "hyponym", "to": "hut"},
      {"from": "accommodation", "rel": "hyponym", "to": "hotel"},
      {"from": "accommodation", "rel": "hyponym", "to": "cottage"},
      {"from": "accommodation", "rel": "synonym", "to": "lodging"},
      {"from": "hotel", "rel": "hyponym", "to": "motel"},
      {"from": "hotel", "rel": "hyponym", "to": "hostel"},
      {"from": "hut", "rel": "synonym", "to": "cabin"},
      {"from": "vehicle", "rel": "hyponym", "to": "car"},
      {"from": "vehicle", "rel": "hyponym", "to": "truck"},
      {"from": "vehicle", "rel": "hyponym", "to": "van"},
      {"from": "vehicle", "rel": "hyponym", "to": "motorbike"},
      {"from": "weapon", "rel": "hyponym", "to": "gun"},
      {"from": "weapon", "rel": "hyponym", "to": "knife"},
      {"from": "gun", "rel": "synonym", "to": "firearm"},
      {"from": "gun", "rel": "hyponym", "to": "rifle"},
      {"from": "drug", "rel": "hyponym", "to": "cocaine"},
      {"from": "drug", "rel": "hyponym", "to": "heroin"},
      {"from": "drug", "rel": "hyponym", "to": "cannabis"},
      {"from": "money", "rel": "synonym", "to": "cash"},
      {"from": "payment", "rel": "hypernym", "to": "money"},
      {"from": "transfer", "rel": "hypernym", "to": "payment"},
      {"from": "meeting", "rel": "synonym", "to": "appointment"},
      {"from": "phone", "rel": "synonym", "to": "mobile phone"}
    ]})"));
}

std::vector<Expansion> expand(std::string_view term, const OntologyGraph& ontology, std::size_t max_depth) {
  const auto start = text::normalize(term);
  std::vector<Expansion> out{{start, 0, {}}};
  std::map<std::string, std::size_t> seen{{start, 0}};
  // FIFO order with sorted neighbours reaches every term first through its
  // lexicographically smallest shortest path.
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].depth == max_depth) continue;
    for (const auto& n : ontology.neighbors(out[i].term)) {
      if (seen.contains(n)) continue;
      seen.emplace(n, out.size());
      auto path = out[i].path;
      path.push_back(n);
      out.push_back({n, out[i].depth + 1, std::move(path)});
    }
  }
  return out;
}

Ontology::Ontology(OntologyGraph base, GraphStore* store)
    : base_(std::move(base)), store_(store), current_(std::make_shared<const OntologyGraph>(base_)) {}

std::shared_ptr<const OntologyGraph> Ontology::current() const {
  std::scoped_lock lock(mutex_);
  return current_;
}

std::shared_ptr<const OntologyGraph> Ontology::edit(const OntologyEdit& edit, const Actor& actor) {
  std::scoped_lock lock(mutex_);
  auto next = std::make_shared<const OntologyGraph>(current_->apply(edit));
  if (store_) store_->record(actor, Mutation::ontology_edit, {{"edit", edit.to_json()}, {"version", next->version()}});
  current_ = next;
  return next;
}

void Ontology::restore_from_log(const ProvenanceLog& log) {
  auto g = base_;
  log.for_each([&](const ProvenanceEntry& e) {
    if (e.mutation == Mutation::ontology_edit) g = g.apply(OntologyEdit::from_json(e.payload.at("edit")));
  });
  std::scoped_lock lock(mutex_);
  current_ = std::make_shared<const OntologyGraph>(std::move(g));
}

// -- text index --------------------------------------------------------------------

void TextIndex::sync(const GraphState& state) {
  const auto& nodes = state.nodes();
  for (; cursor_ < nodes.size(); ++cursor_) {
    const auto& n = nodes[cursor_];
    if (!n.type.starts_with(types::kDocument)) continue;
    const auto it = n.attributes.find("content");
    if (it == n.attributes.end()) continue;
    const auto* content = std::get_if<std::string>(&it->second);
    if (!content) continue;
    auto tokens = text::tokenize(*content);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      vocabulary_[tokens[i].norm].push_back({n.id, static_cast<std::uint32_t>(i)});
    }
    documents_.emplace(n.id, std::move(tokens));
  }
}

const std::vector<text::Token>* TextIndex::tokens(ItemId document) const {
  const auto it = documents_.find(document);
  return it == documents_.end() ? nullptr : &it->second;
}

// -- scoring -----------------------------------------------------------------------

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::exact: return "exact";
    case Mode::substring: return "substring";
    case Mode::fuzzy: return "fuzzy";
    case Mode::ontological: return "ontological";
  }
  return "exact";
}

Mode parse_mode(std::string_view s) {
  if (s == "exact") return Mode::exact;
  if (s == "substring") return Mode::substring;
  if (s == "fuzzy") return Mode::fuzzy;
  if (s == "ontological" || s == "onto") return Mode::ontological;
  throw Error(ErrorCode::invalid_argument, "unknown search mode '" + std::string(s) + "'");
}

std::string_view to_string(Scope s) {
  switch (s) {
    case Scope::labels: return "labels";
    case Scope::text: return "text";
    case Scope::both: return "both";
  }
  return "both";
}

Scope parse_scope(std::string_view s) {
  if (s == "labels") return Scope::labels;
  if (s == "text") return Scope::text;
  if (s == "both") return Scope::both;
  throw Error(ErrorCode::invalid_argument, "unknown search scope '" + std::string(s) + "'");
}

double exact_score() { return 1.0; }

double substring_score(std::size_t query_length, std::size_t label_length) {
  if (query_length == 0 || label_length < query_length) {
    throw Error(ErrorCode::invalid_argument, "substring evidence needs 0 < query length <= label length");
  }
  return static_cast<double>(query_length) / static_cast<double>(label_length);
}

double fuzzy_score(std::size_t edits, std::size_t query_length, std::size_t match_length) {
  const auto longest = std::max(query_length, match_length);
  if (longest == 0 || edits > longest) throw Error(ErrorCode::invalid_argument, "fuzzy evidence out of range");
  return 1.0 - static_cast<double>(edits) / static_cast<double>(longest);
}

double ontological_score(std::size_t depth, double decay) {
  if (!(decay > 0.0 && decay < 1.0)) throw Error(ErrorCode::invalid_argument, "decay must lie in (0, 1)");
  return std::pow(decay, static_cast<double>(depth));
}

json SearchHit::to_json() const {
  json t{{"item", target.item.value}};
  if (target.start) {
    t["start"] = *target.start;
    t["end"] = *target.end;
  }
  return {{"target", t},
          {"matched", matched},
          {"mode", std::string(search::to_string(mode))},
          {"score", score},
          {"explanation", explanation}};
}

void validate(const SearchQuery& query, const SearchConfig& config) {
  if (query.modes.empty()) throw Error(ErrorCode::invalid_argument, "at least one search mode is required");
  if (query.fuzzy_max_edits > config.max_edits_limit) {
    throw Error(ErrorCode::invalid_argument, "fuzzy_max_edits above the configured limit of " +
                                                 std::to_string(config.max_edits_limit));
  }
  if (query.ontology_max_depth > config.max_depth_limit) {
    throw Error(ErrorCode::invalid_argument, "ontology_max_depth above the configured limit of " +
                                                 std::to_string(config.max_depth_limit));
  }
  if (!(config.decay > 0.0 && config.decay < 1.0)) throw Error(ErrorCode::invalid_argument, "decay must lie in (0, 1)");
}

// -- evaluation -------------------------------------------------------------------

namespace {

class Collector {
 public:
  void add(SearchHit hit) {
    auto [it, inserted] = best_.try_emplace(hit.target, hit);
    if (inserted) return;
    auto& cur = it->second;
    if (hit.score > cur.score || (hit.score == cur.score && hit.mode < cur.mode)) cur = std::move(hit);
  }

  std::vector<SearchHit> ranked() && {
    std::vector<SearchHit> out;
    out.reserve(best_.size());
    for (auto& [_, h] : best_) out.push_back(std::move(h));
    std::sort(out.begin(), out.end(), [](const SearchHit& a, const SearchHit& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.mode != b.mode) return a.mode < b.mode;
      return a.target < b.target;
    });
    return out;
  }

 private:
  std::map<Target, SearchHit> best_;
};

std::vector<std::string> norms(const std::vector<text::Token>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.norm);
  return out;
}

bool contains_sequence(const std::vector<std::string>& haystack, const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > haystack.size()) return false;
  return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) != haystack.end();
}

struct Expanded {
  Expansion expansion;
  std::vector<std::string> tokens;
};

}  // namespace

std::vector<SearchHit> run_query(const GraphState& state, const TextIndex& index, const OntologyGraph& ontology,
                                 const SearchQuery& query, const SearchConfig& config) {
  validate(query, config);
  const auto q = text::normalize(query.text);
  if (q.empty()) return {};
  const auto q32 = text::decode_utf8(q);
  const auto qtokens = norms(text::tokenize(q));
  const bool exact = query.modes.contains(Mode::exact);
  const bool substring = query.modes.contains(Mode::substring);
  const bool fuzzy = query.modes.contains(Mode::fuzzy);
  const bool onto = query.modes.contains(Mode::ontological);
  const auto k = query.fuzzy_max_edits;

  std::vector<Expanded> expansions;
  if (onto) {
    for (auto& e : expand(q, ontology, query.ontology_max_depth)) {
      if (e.depth == 0) continue;
      auto tokens = norms(text::tokenize(e.term));
      expansions.push_back({std::move(e), std::move(tokens)});
    }
  }
  const auto onto_explanation = [&](const Expansion& e) {
    std::vector<std::string> path{q};
    path.insert(path.end(), e.path.begin(), e.path.end());
    return path;
  };

  const auto view = compute_view(state, query.filter);
  const std::unordered_set<ItemId, ItemIdHash> visible(view.nodes.begin(), view.nodes.end());
  Collector hits;

  if (query.scope != Scope::text) {
    for (const auto id : view.nodes) {
      const auto& n = *state.node(id);
      const auto& label = n.normalized_label;
      const Target target{id, std::nullopt, std::nullopt};
      // A zero-edit or whole-label match is reported as exact whichever
      // literal mode found it.
      if ((exact || substring || fuzzy) && label == q) {
        hits.add({target, n.label, Mode::exact, exact_score(), {}});
        continue;
      }
      std::u32string label32;
      if (substring || fuzzy) label32 = text::decode_utf8(label);
      if (substring && label.find(q) != std::string::npos) {
        hits.add({target, n.label, Mode::substring, substring_score(q32.size(), label32.size()), {}});
      }
      if (fuzzy && k > 0) {
        const auto diff = label32.size() > q32.size() ? label32.size() - q32.size() : q32.size() - label32.size();
        if (diff <= k) {
          const auto d = text::edit_distance_bounded(q32, label32, k);
          if (d >= 1 && d <= k && d < std::max(q32.size(), label32.size())) {
            hits.add({target, n.label, Mode::fuzzy, fuzzy_score(d, q32.size(), label32.size()), {}});
          }
        }
      }
      if (!expansions.empty()) {
        const auto label_tokens = norms(text::tokenize(label));
        for (const auto& e : expansions) {
          if (label == e.expansion.term || contains_sequence(label_tokens, e.tokens)) {
            hits.add({target, n.label, Mode::ontological, ontological_score(e.expansion.depth, config.decay),
                      onto_explanation(e.expansion)});
          }
        }
      }
    }
  }

  if (query.scope != Scope::labels) {
    const auto& vocab = index.vocabulary();
    const auto phrase_hits = [&](const std::vector<std::string>& phrase, auto&& make) {
      if (phrase.empty()) return;
      const auto it = vocab.find(phrase.front());
      if (it == vocab.end()) return;
      for (const auto& p : it->second) {
        if (!visible.contains(p.document)) continue;
        const auto& toks = *index.tokens(p.document);
        if (p.token + phrase.size() > toks.size()) continue;
        bool match = true;
        for (std::size_t j = 1; j < phrase.size() && match; ++j) match = toks[p.token + j].norm == phrase[j];
        if (!match) continue;
        const Target target{p.document, toks[p.token].start, toks[p.token + phrase.size() - 1].end};
        hits.add(make(target));
      }
    };
    const auto surface = [&](const Target& t) {
      const auto* n = state.node(t.item);
      const auto& content = std::get<std::string>(n->attributes.at("content"));
      const auto u = text::decode_utf8(content);
      return text::encode_utf8(std::u32string_view(u).substr(*t.start, *t.end - *t.start));
    };

    if (exact || ((substring || fuzzy) && qtokens.size() == 1)) {
      phrase_hits(qtokens, [&](const Target& t) { return SearchHit{t, surface(t), Mode::exact, exact_score(), {}}; });
    }
    if (qtokens.size() == 1 && (substring || fuzzy)) {
      const auto& qt = qtokens.front();
      const auto qt32 = text::decode_utf8(qt);
      for (const auto& [word, postings] : vocab) {
        if (word == qt) continue;
        const auto w32 = text::decode_utf8(word);
        std::optional<SearchHit> proto;
        if (substring && word.find(qt) != std::string::npos) {
          proto = SearchHit{{}, {}, Mode::substring, substring_score(qt32.size(), w32.size()), {}};
        }
        if (fuzzy && k > 0) {
          const auto diff = w32.size() > qt32.size() ? w32.size() - qt32.size() : qt32.size() - w32.size();
          if (diff <= k) {
            const auto d = text::edit_distance_bounded(qt32, w32, k);
            if (d >= 1 && d <= k && d < std::max(qt32.size(), w32.size())) {
              const auto s = fuzzy_score(d, qt32.size(), w32.size());
              if (!proto || s > proto->score) proto = SearchHit{{}, {}, Mode::fuzzy, s, {}};
            }
          }
        }
        if (!proto) continue;
        for (const auto& p : postings) {
          if (!visible.contains(p.document)) continue;
          const auto& tok = (*index.tokens(p.document))[p.token];
          auto hit = *proto;
          hit.target = {p.document, tok.start, tok.end};
          hit.matched = surface(hit.target);
          hits.add(std::move(hit));
        }
      }
    }
    for (const auto& e : expansions) {
      phrase_hits(e.tokens, [&](const Target& t) {
        return SearchHit{t, surface(t), Mode::ontological, ontological_score(e.expansion.depth, config.decay),
                         onto_explanation(e.expansion)};
      });
    }
  }
  return std::move(hits).ranked();
}

SearchEngine::SearchEngine(GraphStore& store, Ontology& ontology, SearchConfig config)
    : store_(store), ontology_(ontology), config_(config) {}

std::vector<SearchHit> SearchEngine::search(const SearchQuery& query, const Actor& actor) {
  validate(query, config_);
  const auto ontology = ontology_.current();
  std::vector<SearchHit> hits;
  {
    std::scoped_lock lock(index_mutex_);
    hits = store_.read([&](const GraphState& state) {
      index_.sync(state);
      return run_query(state, index_, *ontology, query, config_);
    });
  }
  json modes = json::array();
  for (const auto m : query.modes) modes.push_back(std::string(to_string(m)));
  store_.record(actor, Mutation::search_executed,
                {{"query", query.text},
                 {"modes", modes},
                 {"scope", std::string(to_string(query.scope))},
                 {"fuzzy_max_edits", query.fuzzy_max_edits},
                 {"ontology_max_depth", query.ontology_max_depth},
                 {"ontology_version", ontology->version()},
                 {"include_hidden", query.filter.include_hidden},
                 {"hits", hits.size()}});
  return hits;
}

}  // namespace casegraph::search
