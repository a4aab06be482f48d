#include "casegraph/ner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <regex>
#include <sstream>
#include <tuple>

#include "casegraph/text.hpp"

namespace casegraph::ner {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 11> kLabelNames{"PERSON", "ORGANIZATION", "LOCATION", "MISC",
                                                       "EVENT",  "PRODUCT",      "DATETIME", "LANGUAGE",
                                                       "LAW",    "QUANTITY",     "NUMBERS"};

std::string join_key(const std::vector<text::Token>& tokens, std::size_t from, std::size_t count) {
  std::string key;
  for (std::size_t i = from; i < from + count; ++i) {
    if (i != from) key += ' ';
    key += tokens[i].norm;
  }
  return key;
}

// One byte per scalar so regex offsets are scalar offsets. Non-ASCII word
// characters become \x01 (never matched by the ASCII classes), the euro sign
// \x02, anything else non-ASCII a neutral separator.
std::string ascii_shadow(std::u32string_view u) {
  std::string s;
  s.reserve(u.size());
  for (const char32_t c : u) {
    if (c < 0x80) {
      s += static_cast<char>(c);
    } else if (c == U'€') {
      s += '\x02';
    } else if (text::is_word_char(c)) {
      s += '\x01';
    } else if (text::is_space(c)) {
      s += ' ';
    } else {
      s += '\x03';
    }
  }
  return s;
}

#define CG_NOT_WORD "(?![A-Za-z0-9\\x01])"
#define CG_MONTHS "(?:january|february|march|april|may|june|july|august|september|october|november|december)"

struct Rule {
  Label label;
  int priority;
  std::regex re;
};

const std::vector<Rule>& rules() {
  static const std::vector<Rule> all = [] {
    const auto ecma = std::regex::ECMAScript | std::regex::optimize;
    const auto icase = ecma | std::regex::icase;
    std::vector<Rule> r;
    const std::string time = "(?:(?:,? |T)\\d{1,2}:\\d{2}(?::\\d{2})?)?";
    r.push_back({Label::DATETIME, 1, std::regex("\\d{1,2}\\.\\d{1,2}\\.\\d{4}" + time + CG_NOT_WORD, ecma)});
    r.push_back({Label::DATETIME, 1, std::regex("\\d{4}-\\d{2}-\\d{2}" + time + CG_NOT_WORD, ecma)});
    r.push_back({Label::DATETIME, 1, std::regex("\\d{1,2}/\\d{1,2}/\\d{4}" CG_NOT_WORD, ecma)});
    r.push_back({Label::DATETIME, 1, std::regex("\\d{1,2}:\\d{2}(?::\\d{2})?" CG_NOT_WORD, ecma)});
    r.push_back({Label::DATETIME, 1, std::regex("\\d{1,2}\\.? " CG_MONTHS " \\d{4}" CG_NOT_WORD, icase)});
    r.push_back({Label::DATETIME, 1, std::regex(CG_MONTHS " \\d{1,2},? \\d{4}" CG_NOT_WORD, icase)});
    r.push_back({Label::QUANTITY, 2,
                 std::regex("\\d+(?:[.,]\\d+)? ?(?:kilometers?|kilometres?|kilograms?|grams?|meters?|metres?|"
                            "liters?|litres?|tons?|hours?|minutes?|seconds?|days?|weeks?|months?|years?|"
                            "percent|euros?|eur|usd|dollars?|kg|km|cm|mm|ml|g|m|l|t)" CG_NOT_WORD,
                            icase)});
    r.push_back({Label::QUANTITY, 2, std::regex("\\d+(?:[.,]\\d+)? ?(?:%|\\x02|\\$)", ecma)});
    r.push_back({Label::QUANTITY, 2, std::regex("(?:\\x02|\\$) ?\\d+(?:[.,]\\d+)?" CG_NOT_WORD, ecma)});
    r.push_back({Label::NUMBERS, 3, std::regex("\\d+(?:[.,]\\d+)*" CG_NOT_WORD, ecma)});
    return r;
  }();
  return all;
}

#undef CG_NOT_WORD
#undef CG_MONTHS

bool rule_enabled(const PatternToggles& t, Label label) {
  switch (label) {
    case Label::DATETIME: return t.datetime;
    case Label::QUANTITY: return t.quantity;
    case Label::NUMBERS: return t.numbers;
    default: return false;
  }
}

struct Candidate {
  std::size_t start;
  std::size_t end;
  int priority;
  Label label;
};

std::optional<std::int64_t> days_since_epoch(int y, unsigned m, unsigned d) {
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{m}, day{d}};
  if (!ymd.ok()) return std::nullopt;
  return sys_days{ymd}.time_since_epoch().count();
}

int month_index(std::string name) {
  static constexpr std::array<std::string_view, 12> months{"january", "february", "march",     "april",
                                                           "may",     "june",     "july",      "august",
                                                           "september", "october", "november", "december"};
  std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
  for (std::size_t i = 0; i < months.size(); ++i) {
    if (months[i] == name) return static_cast<int>(i) + 1;
  }
  return 0;
}

}  // namespace

std::string_view to_string(Label label) { return kLabelNames[static_cast<std::size_t>(label)]; }

std::optional<Label> parse_label(std::string_view name) {
  for (std::size_t i = 0; i < kLabelNames.size(); ++i) {
    if (kLabelNames[i] == name) return kAllLabels[i];
  }
  return std::nullopt;
}

TypePath type_for(Label label) {
  switch (label) {
    case Label::PERSON: return types::kPerson;
    case Label::ORGANIZATION: return types::kOrganization;
    case Label::LOCATION: return types::kLocation;
    case Label::DATETIME: return types::kDatetime;
    case Label::EVENT: return types::kEvent;
    case Label::MISC: return TypePath("Thing/Entity/Misc");
    case Label::PRODUCT: return TypePath("Thing/Entity/Product");
    case Label::LANGUAGE: return TypePath("Thing/Entity/Language");
    case Label::LAW: return TypePath("Thing/Entity/Law");
    case Label::QUANTITY: return TypePath("Thing/Entity/Quantity");
    case Label::NUMBERS: return TypePath("Thing/Entity/Numbers");
  }
  return types::kEntity;
}

// -- gazetteer ----------------------------------------------------------------

void Gazetteer::add(Label label, std::string_view surface) {
  const auto tokens = text::tokenize(surface);
  if (tokens.empty()) {
    throw Error(ErrorCode::invalid_argument, "gazetteer surface has no word characters: '" + std::string(surface) + "'");
  }
  const auto key = join_key(tokens, 0, tokens.size());
  entries_[key].insert(label);
  surfaces_.try_emplace(key, std::string(surface));
  max_tokens_ = std::max(max_tokens_, tokens.size());
}

Gazetteer Gazetteer::from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::parse_error, "gazetteer must be a JSON object");
  Gazetteer g;
  for (const auto& [key, value] : j.items()) {
    if (key == "patterns") {
      for (const auto& [name, on] : value.items()) {
        if (!on.is_boolean()) throw Error(ErrorCode::parse_error, "pattern toggle " + name + " must be boolean");
        if (name == "DATETIME") {
          g.patterns.datetime = on.get<bool>();
        } else if (name == "QUANTITY") {
          g.patterns.quantity = on.get<bool>();
        } else if (name == "NUMBERS") {
          g.patterns.numbers = on.get<bool>();
        } else {
          throw Error(ErrorCode::parse_error, "unknown pattern " + name);
        }
      }
      continue;
    }
    const auto label = parse_label(key);
    if (!label) throw Error(ErrorCode::parse_error, "unknown label " + key);
    if (!value.is_array()) throw Error(ErrorCode::parse_error, "surfaces for " + key + " must be an array");
    for (const auto& s : value) {
      if (!s.is_string()) throw Error(ErrorCode::parse_error, "surface forms must be strings");
      g.add(*label, s.get<std::string>());
    }
  }
  return g;
}

json Gazetteer::to_json() const {
  json out = json::object();
  for (const auto& [key, labels] : entries_) {
    for (const auto label : labels) out[std::string(ner::to_string(label))].push_back(surfaces_.at(key));
  }
  out["patterns"] = {{"DATETIME", patterns.datetime}, {"QUANTITY", patterns.quantity}, {"NUMBERS", patterns.numbers}};
  return out;
}

const std::set<Label>* Gazetteer::lookup(const std::string& key) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

Gazetteer sample_gazetteer() {
  return Gazetteer::from_json(json::parse(R"({
    "PERSON": ["Anna", "Bob", "Alisa", "Maria Schmidt", "John Miller", "Peter Wagner", "Olga Petrenko"],
    "ORGANIZATION": ["Europol", "Interpol", "Acme Logistics", "Red Harbor Group", "Federal Police"],
    "LOCATION": ["Berlin", "Hamburg", "Munich", "Vienna", "New York", "Odessa", "Kyiv", "Rotterdam"],
    "MISC": ["Bitcoin", "Ferrari"],
    "EVENT": ["Oktoberfest", "World Cup", "Champions League final"],
    "PRODUCT": ["iPhone", "Telegram", "WhatsApp", "Signal"],
    "LANGUAGE": ["German", "English", "Russian", "Ukrainian"],
    "LAW": ["GDPR", "Criminal Code"],
    "patterns": {"DATETIME": true, "QUANTITY": true, "NUMBERS": true}
  })"));
}

// -- extraction ---------------------------------------------------------------

std::vector<Mention> extract(std::string_view utf8, const Gazetteer& gazetteer) {
  const auto u = text::decode_utf8(utf8);
  std::vector<Candidate> candidates;

  const auto tokens = text::tokenize(std::u32string_view(u));
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto longest = std::min(gazetteer.max_tokens(), tokens.size() - i);
    for (std::size_t n = longest; n >= 1; --n) {
      if (const auto* labels = gazetteer.lookup(join_key(tokens, i, n))) {
        for (const auto label : *labels) candidates.push_back({tokens[i].start, tokens[i + n - 1].end, 0, label});
      }
    }
  }

  const auto& patterns = gazetteer.patterns;
  if (patterns.datetime || patterns.quantity || patterns.numbers) {
    const auto shadow = ascii_shadow(u);
    for (std::size_t i = 0; i < u.size(); ++i) {
      if (i > 0 && text::is_word_char(u[i - 1])) continue;
      if (!(text::is_word_char(u[i]) || u[i] == U'$' || u[i] == U'€')) continue;
      for (const auto& rule : rules()) {
        if (!rule_enabled(patterns, rule.label)) continue;
        std::smatch m;
        if (std::regex_search(shadow.cbegin() + static_cast<std::ptrdiff_t>(i), shadow.cend(), m, rule.re,
                              std::regex_constants::match_continuous)) {
          candidates.push_back({i, i + static_cast<std::size_t>(m.length(0)), rule.priority, rule.label});
        }
      }
    }
  }

  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return std::tuple(b.end - b.start, a.start, a.priority, a.label) <
           std::tuple(a.end - a.start, b.start, b.priority, b.label);
  });
  std::vector<bool> taken(u.size(), false);
  std::vector<Mention> out;
  for (const auto& c : candidates) {
    if (std::any_of(taken.begin() + static_cast<std::ptrdiff_t>(c.start),
                    taken.begin() + static_cast<std::ptrdiff_t>(c.end), [](bool t) { return t; })) {
      continue;
    }
    std::fill(taken.begin() + static_cast<std::ptrdiff_t>(c.start), taken.begin() + static_cast<std::ptrdiff_t>(c.end),
              true);
    Mention m;
    m.start = c.start;
    m.end = c.end;
    m.label = c.label;
    m.surface = text::encode_utf8(std::u32string_view(u).substr(c.start, c.end - c.start));
    out.push_back(std::move(m));
  }
  std::sort(out.begin(), out.end(), [](const Mention& a, const Mention& b) { return a.start < b.start; });
  return out;
}

std::optional<ParsedDatetime> parse_datetime(std::string_view surface) {
  static const std::regex dotted(R"((\d{1,2})\.(\d{1,2})\.(\d{4})(?:,? (\d{1,2}):(\d{2})(?::(\d{2}))?)?)");
  static const std::regex iso(R"((\d{4})-(\d{2})-(\d{2})(?:[T ](\d{1,2}):(\d{2})(?::(\d{2}))?)?)");
  static const std::regex slashed(R"((\d{1,2})/(\d{1,2})/(\d{4}))");
  static const std::regex day_month(R"((\d{1,2})\.? ([A-Za-z]+) (\d{4}))");
  static const std::regex month_day(R"(([A-Za-z]+) (\d{1,2}),? (\d{4}))");

  const std::string s(surface);
  std::smatch m;
  int y = 0;
  int mo = 0;
  int d = 0;
  std::optional<std::pair<int, int>> hm;
  const auto num = [&](std::size_t i) { return std::stoi(m[i].str()); };
  if (std::regex_match(s, m, dotted)) {
    d = num(1), mo = num(2), y = num(3);
    if (m[4].matched) hm = std::pair(num(4), num(5));
  } else if (std::regex_match(s, m, iso)) {
    y = num(1), mo = num(2), d = num(3);
    if (m[4].matched) hm = std::pair(num(4), num(5));
  } else if (std::regex_match(s, m, slashed)) {
    d = num(1), mo = num(2), y = num(3);
  } else if (std::regex_match(s, m, day_month)) {
    d = num(1), mo = month_index(m[2].str()), y = num(3);
  } else if (std::regex_match(s, m, month_day)) {
    mo = month_index(m[1].str()), d = num(2), y = num(3);
  } else {
    return std::nullopt;
  }
  if (mo < 1 || d < 1) return std::nullopt;
  const auto days = days_since_epoch(y, static_cast<unsigned>(mo), static_cast<unsigned>(d));
  if (!days) return std::nullopt;
  const EpochSeconds midnight = *days * 86400;
  if (!hm) return ParsedDatetime{{midnight, midnight + 86400}, "day"};
  if (hm->first > 23 || hm->second > 59) return std::nullopt;
  const EpochSeconds at = midnight + hm->first * 3600 + hm->second * 60;
  return ParsedDatetime{{at, at + 60}, "minute"};
}

// -- linking ------------------------------------------------------------------

namespace {

NodeCandidate node_for(const Mention& m) {
  NodeCandidate c{type_for(m.label), m.surface, {}};
  if (m.label == Label::DATETIME) {
    if (const auto parsed = parse_datetime(m.surface)) {
      c.attributes.emplace("interval", parsed->interval);
      c.attributes.emplace("granularity", parsed->granularity);
    }
  }
  return c;
}

Attributes edge_attributes(const Mention& m) {
  return {{"start", static_cast<std::int64_t>(m.start)},
          {"end", static_cast<std::int64_t>(m.end)},
          {"label", std::string(to_string(m.label))}};
}

const ConfidenceGrade kMentionGrade{'C', 3};

}  // namespace

RunOutput mention_candidates(ItemId document, const std::vector<Mention>& mentions) {
  RunOutput out;
  std::map<std::pair<std::string, std::string>, std::size_t> local;
  for (const auto& m : mentions) {
    auto node = node_for(m);
    const auto key = std::pair(node.type.str(), text::normalize(node.label));
    auto [it, inserted] = local.try_emplace(key, out.nodes.size());
    if (inserted) out.nodes.push_back({std::move(node), false});
    out.edges.push_back({std::string(relations::kMentionedIn), EndpointRef::candidate(it->second),
                         EndpointRef::item(document), kMentionGrade, edge_attributes(m)});
  }
  return out;
}

std::vector<Mention> link_mentions(GraphStore& store, ItemId document, const std::vector<Mention>& mentions,
                                   const Actor& actor, const std::optional<Attribution>& attribution) {
  const auto doc = store.node(document);
  if (!doc) throw Error(ErrorCode::unknown_item, "unknown document " + std::to_string(document.value));
  if (!doc->type.starts_with(types::kDocument)) {
    throw Error(ErrorCode::type_mismatch, "item " + std::to_string(document.value) + " is not a document");
  }
  std::vector<Mention> linked;
  for (auto m : mentions) {
    const auto node = store.upsert_node(node_for(m), actor, attribution, doc->cascade_depth + 1).id;
    store.upsert_edge(EdgeCandidate{std::string(relations::kMentionedIn), node, document, kMentionGrade,
                                    edge_attributes(m)},
                      actor, attribution, doc->cascade_depth + 1);
    m.document = document;
    m.node = node;
    linked.push_back(std::move(m));
  }
  return linked;
}

// -- evaluation ----------------------------------------------------------------

double Counts::precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp); }
double Counts::recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn); }
double Counts::f1() const {
  const double p = precision();
  const double r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

std::string format_score(double v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s(buf);
  if (s.starts_with("0.")) s.erase(0, 1);
  return s;
}

std::string EvalReport::table() const {
  std::ostringstream out;
  char line[96];
  std::snprintf(line, sizeof line, "%-14s %5s %5s %5s %6s %6s %6s\n", "Type", "P", "R", "F1", "TP", "FP", "FN");
  out << line;
  const auto row = [&](std::string_view name, const Counts& c) {
    std::snprintf(line, sizeof line, "%-14.*s %5s %5s %5s %6zu %6zu %6zu\n", static_cast<int>(name.size()),
                  name.data(), format_score(c.precision()).c_str(), format_score(c.recall()).c_str(),
                  format_score(c.f1()).c_str(), c.tp, c.fp, c.fn);
    out << line;
  };
  for (const auto& [label, counts] : per_label) row(to_string(label), counts);
  row("micro", micro);
  return out.str();
}

json EvalReport::to_json() const {
  const auto counts = [](const Counts& c) {
    return json{{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn},
                {"precision", c.precision()}, {"recall", c.recall()}, {"f1", c.f1()}};
  };
  json labels = json::object();
  for (const auto& [label, c] : per_label) labels[std::string(to_string(label))] = counts(c);
  return json{{"labels", labels}, {"micro", counts(micro)}};
}

EvalReport evaluate(const std::vector<Span>& predicted, const GoldAnnotationSet& gold) {
  std::set<std::string> known;
  for (const auto& [doc, _] : gold.documents) known.insert(doc);
  for (const auto& s : gold.spans) known.insert(s.doc);
  const std::set<Span> pred(predicted.begin(), predicted.end());
  for (const auto& p : pred) {
    if (!known.contains(p.doc)) {
      throw Error(ErrorCode::document_mismatch, "predicted document '" + p.doc + "' is not in the gold set");
    }
  }
  EvalReport report;
  for (const auto& p : pred) {
    auto& c = report.per_label[p.label];
    if (gold.spans.contains(p)) {
      ++c.tp;
    } else {
      ++c.fp;
    }
  }
  for (const auto& g : gold.spans) {
    if (!pred.contains(g)) ++report.per_label[g.label].fn;
  }
  for (const auto& [_, c] : report.per_label) {
    report.micro.tp += c.tp;
    report.micro.fp += c.fp;
    report.micro.fn += c.fn;
  }
  return report;
}

// -- annotation files -----------------------------------------------------------

ValidationFailure::ValidationFailure(std::vector<Issue> issues)
    : Error(ErrorCode::validation_error,
            [&] {
              std::string msg = std::to_string(issues.size()) + " invalid record(s)";
              for (const auto& i : issues) msg += "; line " + std::to_string(i.line) + ": " + i.message;
              return msg;
            }()),
      issues_(std::move(issues)) {}

namespace {

struct RawRecord {
  std::size_t line;
  json value;
};

std::vector<RawRecord> parse_lines(std::string_view contents) {
  std::vector<RawRecord> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= contents.size()) {
    const auto nl = contents.find('\n', pos);
    auto line = contents.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    pos = nl == std::string_view::npos ? contents.size() + 1 : nl + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    try {
      out.push_back({line_no, json::parse(line)});
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::parse_error, "line " + std::to_string(line_no) + ", byte " + std::to_string(e.byte) +
                                              ": malformed JSON");
    }
  }
  return out;
}

std::optional<Span> span_from(const RawRecord& r, std::vector<Issue>& issues) {
  const auto& v = r.value;
  const auto fail = [&](std::string msg) {
    issues.push_back({r.line, std::move(msg)});
    return std::nullopt;
  };
  if (!v.contains("doc") || !v["doc"].is_string()) return fail("missing string field 'doc'");
  if (!v.contains("start") || !v["start"].is_number_integer() || !v.contains("end") ||
      !v["end"].is_number_integer()) {
    return fail("'start' and 'end' must be integers");
  }
  if (!v.contains("label") || !v["label"].is_string()) return fail("missing string field 'label'");
  const auto start = v["start"].get<std::int64_t>();
  const auto end = v["end"].get<std::int64_t>();
  if (start < 0 || end <= start) return fail("span [" + std::to_string(start) + ", " + std::to_string(end) + ") is empty or negative");
  const auto label = parse_label(v["label"].get<std::string>());
  if (!label) return fail("unknown label '" + v["label"].get<std::string>() + "'");
  return Span{v["doc"].get<std::string>(), static_cast<std::size_t>(start), static_cast<std::size_t>(end), *label};
}

bool is_document_record(const json& v) {
  return v.is_object() && !v.contains("start") && (v.contains("text") || v.contains("length"));
}

}  // namespace

GoldAnnotationSet import_annotations(std::string_view contents) {
  const auto records = parse_lines(contents);
  std::vector<Issue> issues;
  GoldAnnotationSet set;

  for (const auto& r : records) {
    if (!is_document_record(r.value)) continue;
    const auto& v = r.value;
    if (!v.contains("doc") || !v["doc"].is_string()) {
      issues.push_back({r.line, "missing string field 'doc'"});
      continue;
    }
    std::size_t length = 0;
    if (v.contains("text")) {
      if (!v["text"].is_string() || !text::is_valid_utf8(v["text"].get<std::string>())) {
        issues.push_back({r.line, "'text' must be a UTF-8 string"});
        continue;
      }
      length = text::scalar_length(v["text"].get<std::string>());
    } else if (v["length"].is_number_unsigned()) {
      length = v["length"].get<std::size_t>();
    } else {
      issues.push_back({r.line, "'length' must be a non-negative integer"});
      continue;
    }
    const auto doc = v["doc"].get<std::string>();
    const auto [it, inserted] = set.documents.try_emplace(doc, length);
    if (!inserted && it->second != length) issues.push_back({r.line, "conflicting length for document '" + doc + "'"});
  }

  for (const auto& r : records) {
    if (is_document_record(r.value)) continue;
    if (!r.value.is_object()) {
      issues.push_back({r.line, "record must be a JSON object"});
      continue;
    }
    const auto span = span_from(r, issues);
    if (!span) continue;
    if (const auto it = set.documents.find(span->doc); it != set.documents.end() && it->second &&
                                                        span->end > *it->second) {
      issues.push_back({r.line, "span end " + std::to_string(span->end) + " beyond document length " +
                                    std::to_string(*it->second)});
      continue;
    }
    if (!set.spans.insert(*span).second) {
      issues.push_back({r.line, "duplicate span"});
      continue;
    }
    set.documents.try_emplace(span->doc, std::nullopt);
  }
  if (!issues.empty()) throw ValidationFailure(std::move(issues));
  return set;
}

std::vector<Span> read_spans(std::string_view contents) {
  std::vector<Issue> issues;
  std::vector<Span> out;
  for (const auto& r : parse_lines(contents)) {
    if (is_document_record(r.value)) continue;
    if (!r.value.is_object()) {
      issues.push_back({r.line, "record must be a JSON object"});
      continue;
    }
    if (auto s = span_from(r, issues)) out.push_back(std::move(*s));
  }
  if (!issues.empty()) throw ValidationFailure(std::move(issues));
  return out;
}

}  // namespace casegraph::ner
