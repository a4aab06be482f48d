#pragma once

// Deterministic named-entity recognition: gazetteer lookup plus rule patterns
// for dates, quantities and bare numbers, the mapping of mentions into the
// graph, and the span-level evaluation harness.

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "casegraph/error.hpp"
#include "casegraph/graph_store.hpp"
#include "casegraph/module_contract.hpp"

namespace casegraph::ner {

enum class Label {
  PERSON,
  ORGANIZATION,
  LOCATION,
  MISC,
  EVENT,
  PRODUCT,
  DATETIME,
  LANGUAGE,
  LAW,
  QUANTITY,
  NUMBERS,
};

inline constexpr std::array<Label, 11> kAllLabels{
    Label::PERSON, Label::ORGANIZATION, Label::LOCATION, Label::MISC,     Label::EVENT,  Label::PRODUCT,
    Label::DATETIME, Label::LANGUAGE,   Label::LAW,      Label::QUANTITY, Label::NUMBERS};

std::string_view to_string(Label label);
std::optional<Label> parse_label(std::string_view name);
TypePath type_for(Label label);

struct Mention {
  std::size_t start = 0;  // scalar offsets, half-open
  std::size_t end = 0;
  std::string surface;
  Label label = Label::MISC;
  std::optional<ItemId> document;
  std::optional<ItemId> node;

  friend bool operator==(const Mention&, const Mention&) = default;
};

struct PatternToggles {
  bool datetime = true;
  bool quantity = true;
  bool numbers = true;
};

class Gazetteer {
 public:
  // Throws Error(invalid_argument) for surfaces without any word character.
  void add(Label label, std::string_view surface);

  // {"PERSON": ["Anna", ...], ..., "patterns": {"DATETIME": true, ...}}
  static Gazetteer from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  // Labels for a normalized token sequence joined by single spaces.
  const std::set<Label>* lookup(const std::string& key) const;
  std::size_t max_tokens() const noexcept { return max_tokens_; }
  std::size_t size() const noexcept { return entries_.size(); }

  PatternToggles patterns;

 private:
  std::map<std::string, std::set<Label>> entries_;
  std::map<std::string, std::string> surfaces_;  // key -> first surface as given
  std::size_t max_tokens_ = 0;
};

// Small investigation-flavoured gazetteer used when none is configured.
Gazetteer sample_gazetteer();

// Sorted by start, non-overlapping; longest candidate wins, then leftmost,
// then gazetteer before DATETIME before QUANTITY before NUMBERS.
std::vector<Mention> extract(std::string_view text, const Gazetteer& gazetteer);

// Day-granular for dates, minute-granular for date plus time; nullopt for
// times without a date and anything unparseable.
struct ParsedDatetime {
  Interval interval;
  std::string granularity;
};
std::optional<ParsedDatetime> parse_datetime(std::string_view surface);

// Candidate nodes (deduplicated within the document) and one mentioned_in
// edge per mention, expressed against the module run contract.
RunOutput mention_candidates(ItemId document, const std::vector<Mention>& mentions);

// Commits the mentions straight into the store; returns them with `node` and
// `document` filled in.
std::vector<Mention> link_mentions(GraphStore& store, ItemId document, const std::vector<Mention>& mentions,
                                   const Actor& actor, const std::optional<Attribution>& attribution = std::nullopt);

// -- evaluation --------------------------------------------------------------

struct Span {
  std::string doc;
  std::size_t start = 0;
  std::size_t end = 0;
  Label label = Label::MISC;

  friend auto operator<=>(const Span&, const Span&) = default;
};

struct GoldAnnotationSet {
  std::map<std::string, std::optional<std::size_t>> documents;  // doc -> length when declared
  std::set<Span> spans;

  std::size_t size() const noexcept { return spans.size(); }
};

struct Counts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  double precision() const;
  double recall() const;
  double f1() const;
};

struct EvalReport {
  std::map<Label, Counts> per_label;  // labels occurring in gold or predictions
  Counts micro;

  // "Type P R F1" rows, two-digit scores without the leading zero (".91").
  std::string table() const;
  nlohmann::json to_json() const;
};

// Exact span-and-label matching. Throws Error(document_mismatch) when a
// prediction names a document the gold set does not know.
EvalReport evaluate(const std::vector<Span>& predicted, const GoldAnnotationSet& gold);

struct Issue {
  std::size_t line = 0;
  std::string message;
};

class ValidationFailure : public Error {
 public:
  explicit ValidationFailure(std::vector<Issue> issues);
  const std::vector<Issue>& issues() const noexcept { return issues_; }

 private:
  std::vector<Issue> issues_;
};

// Newline-delimited JSON. Span records {doc, start, end, label}; optional
// document records {doc, text} or {doc, length} declare bounds. Malformed JSON
// throws Error(parse_error) naming the line; invalid records are collected
// and thrown together as ValidationFailure.
GoldAnnotationSet import_annotations(std::string_view contents);
// Reads span records without bounds declarations or duplicate checks.
std::vector<Span> read_spans(std::string_view contents);

std::string format_score(double v);

}  // namespace casegraph::ner
