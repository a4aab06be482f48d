#pragma once

// Combined search over node labels and document text: exact, substring,
// fuzzy (Levenshtein) and ontological matching, the latter expanding the
// query through a versioned concept graph.

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "casegraph/graph_store.hpp"
#include "casegraph/text.hpp"

namespace casegraph::search {

// -- ontology -------------------------------------------------------------------

enum class LinkKind { synonym, hyponym, hypernym };
std::string_view to_string(LinkKind k);
LinkKind parse_link_kind(std::string_view s);

struct OntologyLink {
  std::string from;
  LinkKind rel = LinkKind::synonym;
  std::string to;
  friend auto operator<=>(const OntologyLink&, const OntologyLink&) = default;
};

struct OntologyEdit {
  enum class Op { add_concept, remove_concept, add_link, remove_link };
  Op op = Op::add_concept;
  std::string concept_term;  // add/remove concept
  OntologyLink link;         // add/remove link

  nlohmann::json to_json() const;
  static OntologyEdit from_json(const nlohmann::json& j);
};

// Immutable once built; edits produce a new graph with version + 1.
class OntologyGraph {
 public:
  // {"concepts": [...], "links": [{"from", "rel", "to"}]}; terms are normalized.
  static OntologyGraph from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  // Throws Error(ontology_error) when the edit would break an invariant.
  OntologyGraph apply(const OntologyEdit& edit) const;

  std::uint64_t version() const noexcept { return version_; }
  const std::set<std::string>& concepts() const noexcept { return concepts_; }
  const std::set<OntologyLink>& links() const noexcept { return links_; }
  bool contains(const std::string& term) const { return concepts_.contains(term); }
  // Concepts one link away in either direction, sorted.
  std::vector<std::string> neighbors(const std::string& term) const;

 private:
  void add_link(const OntologyLink& link);
  void rebuild_adjacency();

  std::uint64_t version_ = 0;
  std::set<std::string> concepts_;
  std::set<OntologyLink> links_;
  std::map<std::string, std::set<std::string>> adjacency_;
};

// The shipped sample: lodging terms (accommodation and its hyponyms) plus a
// handful of investigation vocabulary.
OntologyGraph sample_ontology();

struct Expansion {
  std::string term;
  std::size_t depth = 0;
  std::vector<std::string> path;  // concepts after the query, ending in `term`
};

// Breadth-first closure up to max_depth, each term at its minimal depth.
// Ties between equal-length paths go to the lexicographically smallest one.
std::vector<Expansion> expand(std::string_view term, const OntologyGraph& ontology, std::size_t max_depth);

// Holds the current version; searches pin a snapshot. Edits are logged as
// ontology_edit entries when a store is attached.
class Ontology {
 public:
  explicit Ontology(OntologyGraph base, GraphStore* store = nullptr);

  std::shared_ptr<const OntologyGraph> current() const;
  std::shared_ptr<const OntologyGraph> edit(const OntologyEdit& edit, const Actor& actor);
  // Re-applies every ontology_edit entry of the log onto the base graph.
  void restore_from_log(const ProvenanceLog& log);

 private:
  OntologyGraph base_;
  GraphStore* store_;
  mutable std::mutex mutex_;
  std::shared_ptr<const OntologyGraph> current_;
};

// -- text index ------------------------------------------------------------------

struct Posting {
  ItemId document;
  std::uint32_t token = 0;
};

// Token index over the "content" attribute of document nodes. Derived state:
// `sync` indexes whatever documents were created since the last call.
class TextIndex {
 public:
  void sync(const GraphState& state);
  std::size_t indexed_nodes() const noexcept { return cursor_; }

  const std::map<std::string, std::vector<Posting>>& vocabulary() const noexcept { return vocabulary_; }
  const std::vector<text::Token>* tokens(ItemId document) const;

 private:
  std::size_t cursor_ = 0;  // position in the state's node vector
  std::map<std::string, std::vector<Posting>> vocabulary_;
  std::map<ItemId, std::vector<text::Token>> documents_;
};

// -- queries ---------------------------------------------------------------------

enum class Mode { exact, substring, fuzzy, ontological };  // also the rank priority
std::string_view to_string(Mode m);
Mode parse_mode(std::string_view s);  // accepts "onto" for ontological

enum class Scope { labels, text, both };
std::string_view to_string(Scope s);
Scope parse_scope(std::string_view s);

struct SearchConfig {
  double decay = 0.5;
  std::size_t max_edits_limit = 4;
  std::size_t max_depth_limit = 6;
};

struct SearchQuery {
  std::string text;
  std::set<Mode> modes{Mode::exact};
  std::size_t fuzzy_max_edits = 1;
  std::size_t ontology_max_depth = 1;
  Scope scope = Scope::both;
  ViewFilter filter;
};

struct Target {
  ItemId item;
  std::optional<std::size_t> start;  // document span, scalar offsets
  std::optional<std::size_t> end;
  friend auto operator<=>(const Target&, const Target&) = default;
};

struct SearchHit {
  Target target;
  std::string matched;
  Mode mode = Mode::exact;
  double score = 0;
  std::vector<std::string> explanation;  // query, then the concept path

  nlohmann::json to_json() const;
};

double exact_score();
double substring_score(std::size_t query_length, std::size_t label_length);
double fuzzy_score(std::size_t edits, std::size_t query_length, std::size_t match_length);
double ontological_score(std::size_t depth, double decay);

// Throws Error(invalid_argument) for empty modes or limits above the config.
void validate(const SearchQuery& query, const SearchConfig& config);

// Pure evaluation against a state; `index` must be synced to `state`.
std::vector<SearchHit> run_query(const GraphState& state, const TextIndex& index, const OntologyGraph& ontology,
                                 const SearchQuery& query, const SearchConfig& config);

class SearchEngine {
 public:
  SearchEngine(GraphStore& store, Ontology& ontology, SearchConfig config = {});

  // Runs the query against the current store and ontology versions and logs
  // a search_executed entry.
  std::vector<SearchHit> search(const SearchQuery& query, const Actor& actor);
  const SearchConfig& config() const noexcept { return config_; }

 private:
  GraphStore& store_;
  Ontology& ontology_;
  SearchConfig config_;
  std::mutex index_mutex_;
  TextIndex index_;
};

}  // namespace casegraph::search
