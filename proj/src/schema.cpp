#include "casegraph/schema.hpp"

#include <algorithm>
#include <mutex>

#include "casegraph/error.hpp"

namespace casegraph {

using nlohmann::json;

TypePath::TypePath(std::string_view path) : full_(path) {
  if (full_.empty()) throw Error(ErrorCode::invalid_argument, "empty type path");
  std::size_t start = 0;
  bool first = true;
  while (true) {
    const auto slash = full_.find('/', start);
    const auto seg = std::string_view(full_).substr(
        start, slash == std::string::npos ? std::string::npos : slash - start);
    if (seg.empty()) {
      throw Error(ErrorCode::invalid_argument, "empty segment in type path '" + full_ + "'");
    }
    if (first && seg != kRoot) {
      throw Error(ErrorCode::invalid_argument, "type path must start at Thing: '" + full_ + "'");
    }
    first = false;
    if (slash == std::string::npos) break;
    start = slash + 1;
  }
}

std::vector<std::string> TypePath::segments() const {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto slash = full_.find('/', start);
    out.push_back(full_.substr(start, slash == std::string::npos ? std::string::npos
                                                                 : slash - start));
    if (slash == std::string::npos) break;
    start = slash + 1;
  }
  return out;
}

std::size_t TypePath::depth() const {
  return static_cast<std::size_t>(std::count(full_.begin(), full_.end(), '/'));
}

std::optional<TypePath> TypePath::parent() const {
  const auto slash = full_.rfind('/');
  if (slash == std::string::npos) return std::nullopt;
  return TypePath(std::string_view(full_).substr(0, slash));
}

TypePath TypePath::child(std::string_view segment) const {
  return TypePath(full_ + "/" + std::string(segment));
}

TypePath TypePath::first_layer() const {
  const auto first = full_.find('/');
  if (first == std::string::npos) return *this;
  const auto second = full_.find('/', first + 1);
  if (second == std::string::npos) return *this;
  return TypePath(std::string_view(full_).substr(0, second));
}

bool TypePath::starts_with(const TypePath& ancestor) const {
  const auto& a = ancestor.full_;
  if (full_.size() < a.size() || full_.compare(0, a.size(), a) != 0) return false;
  return full_.size() == a.size() || full_[a.size()] == '/';
}

std::string_view to_string(AttrKind kind) {
  switch (kind) {
    case AttrKind::text: return "text";
    case AttrKind::integer: return "integer";
    case AttrKind::real: return "real";
    case AttrKind::timestamp: return "timestamp";
    case AttrKind::interval: return "interval";
    case AttrKind::geo_point: return "geo-point";
    case AttrKind::binary_reference: return "binary-reference";
  }
  return "text";
}

AttrKind attr_kind_from_string(std::string_view name) {
  for (auto k : {AttrKind::text, AttrKind::integer, AttrKind::real, AttrKind::timestamp,
                 AttrKind::interval, AttrKind::geo_point, AttrKind::binary_reference}) {
    if (to_string(k) == name) return k;
  }
  throw Error(ErrorCode::parse_error, "unknown attribute kind '" + std::string(name) + "'");
}

// -- grades ----------------------------------------------------------------

bool ConfidenceGrade::valid(char reliability, int credibility) {
  return reliability >= 'A' && reliability <= 'F' && credibility >= 1 && credibility <= 6;
}

ConfidenceGrade ConfidenceGrade::parse(std::string_view text) {
  if (text.size() != 2 || !valid(text[0], text[1] - '0')) {
    throw Error(ErrorCode::invalid_argument, "invalid confidence grade '" + std::string(text) + "'");
  }
  return {text[0], text[1] - '0'};
}

std::string ConfidenceGrade::str() const {
  return std::string{reliability, static_cast<char>('0' + credibility)};
}

bool grade_at_least(const ConfidenceGrade& grade, const ConfidenceGrade& threshold) {
  // Letters and digits both improve toward the start of their range.
  return grade.reliability <= threshold.reliability && grade.credibility <= threshold.credibility;
}

ConfidenceGrade grade_min(const ConfidenceGrade& a, const ConfidenceGrade& b) {
  return {std::max(a.reliability, b.reliability), std::max(a.credibility, b.credibility)};
}

json to_json(const Actor& actor) {
  return json{{"kind", actor.kind == ActorKind::user ? "user" : "module"}, {"id", actor.id}};
}

Actor actor_from_json(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind != "user" && kind != "module") {
    throw Error(ErrorCode::parse_error, "unknown actor kind '" + kind + "'");
  }
  return {kind == "user" ? ActorKind::user : ActorKind::module, j.at("id").get<std::string>()};
}

// -- registry --------------------------------------------------------------

SchemaRegistry::SchemaRegistry() {
  types_.emplace(std::string(TypePath::kRoot), TypeInfo{TypePath{}, {}, {}});
}

SchemaRegistry::SchemaRegistry(const SchemaRegistry& other) {
  std::shared_lock lock(other.mutex_);
  types_ = other.types_;
  relationships_ = other.relationships_;
}

SchemaRegistry& SchemaRegistry::operator=(const SchemaRegistry& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mutex_);
  std::shared_lock other_lock(other.mutex_);
  types_ = other.types_;
  relationships_ = other.relationships_;
  return *this;
}

RegistrationReceipt SchemaRegistry::register_type(const TypePath& path,
                                                  const AttributeDecls& attributes) {
  std::scoped_lock lock(mutex_);
  if (types_.contains(path.str())) {
    throw Error(ErrorCode::duplicate_path, "type already registered: " + path.str());
  }
  const auto parent = path.parent();
  if (!parent || !types_.contains(parent->str())) {
    throw Error(ErrorCode::unknown_parent, "parent of " + path.str() + " is not registered");
  }
  TypeInfo info{path, attributes, types_.at(parent->str()).effective};
  for (const auto& [name, kind] : attributes) {
    if (info.effective.contains(name)) {
      throw Error(ErrorCode::attribute_collision,
                  "attribute '" + name + "' of " + path.str() + " collides with an inherited one");
    }
    info.effective.emplace(name, kind);
  }
  RegistrationReceipt receipt{path, info.effective};
  types_.emplace(path.str(), std::move(info));
  return receipt;
}

void SchemaRegistry::register_relationship(RelationshipKind kind) {
  std::scoped_lock lock(mutex_);
  if (kind.name.empty()) throw Error(ErrorCode::invalid_argument, "empty relationship name");
  if (relationships_.contains(kind.name)) {
    throw Error(ErrorCode::duplicate_path, "relationship already registered: " + kind.name);
  }
  if (!types_.contains(kind.from.str()) || !types_.contains(kind.to.str())) {
    throw Error(ErrorCode::unregistered_type, "relationship " + kind.name +
                                                  " references an unregistered endpoint type");
  }
  relationships_.emplace(kind.name, std::move(kind));
}

bool SchemaRegistry::contains(const TypePath& path) const {
  std::shared_lock lock(mutex_);
  return types_.contains(path.str());
}

bool SchemaRegistry::is_subtype(const TypePath& a, const TypePath& b) const {
  std::shared_lock lock(mutex_);
  for (const auto* p : {&a, &b}) {
    if (!types_.contains(p->str())) {
      throw Error(ErrorCode::unregistered_type, "unregistered type: " + p->str());
    }
  }
  return a.starts_with(b);
}

AttributeDecls SchemaRegistry::effective_attributes(const TypePath& path) const {
  std::shared_lock lock(mutex_);
  const auto it = types_.find(path.str());
  if (it == types_.end()) throw Error(ErrorCode::unregistered_type, "unregistered type: " + path.str());
  return it->second.effective;
}

std::optional<RelationshipKind> SchemaRegistry::relationship(std::string_view name) const {
  std::shared_lock lock(mutex_);
  const auto it = relationships_.find(std::string(name));
  if (it == relationships_.end()) return std::nullopt;
  return it->second;
}

void SchemaRegistry::check_edge(std::string_view kind, const TypePath& from,
                                const TypePath& to) const {
  const auto rel = relationship(kind);
  if (!rel) throw Error(ErrorCode::kind_violation, "unknown relationship kind '" + std::string(kind) + "'");
  if (!from.starts_with(rel->from) || !to.starts_with(rel->to)) {
    throw Error(ErrorCode::kind_violation, rel->name + " does not connect " + from.str() + " to " +
                                               to.str());
  }
}

std::vector<TypePath> SchemaRegistry::types() const {
  std::shared_lock lock(mutex_);
  std::vector<TypePath> out;
  out.reserve(types_.size());
  for (const auto& [_, info] : types_) out.push_back(info.path);
  return out;
}

std::vector<RelationshipKind> SchemaRegistry::relationships() const {
  std::shared_lock lock(mutex_);
  std::vector<RelationshipKind> out;
  for (const auto& [_, rel] : relationships_) out.push_back(rel);
  return out;
}

std::size_t SchemaRegistry::type_count() const {
  std::shared_lock lock(mutex_);
  return types_.size();
}

std::size_t SchemaRegistry::relationship_count() const {
  std::shared_lock lock(mutex_);
  return relationships_.size();
}

SchemaRegistry SchemaRegistry::from_json(const json& doc) {
  if (!doc.is_array()) throw Error(ErrorCode::parse_error, "schema file must be a JSON array");
  SchemaRegistry registry;
  std::vector<RelationshipKind> pending;
  for (const auto& entry : doc) {
    if (entry.contains("path")) {
      TypePath path(entry.at("path").get<std::string>());
      AttributeDecls attrs;
      if (entry.contains("attributes")) {
        for (const auto& [name, kind] : entry.at("attributes").items()) {
          attrs.emplace(name, attr_kind_from_string(kind.get<std::string>()));
        }
      }
      if (path.depth() > 0) registry.register_type(path, attrs);
    }
    if (entry.contains("relationship_kinds")) {
      for (const auto& rel : entry.at("relationship_kinds")) {
        pending.push_back({rel.at("name").get<std::string>(), TypePath(rel.at("from").get<std::string>()),
                           TypePath(rel.at("to").get<std::string>())});
      }
    }
  }
  for (auto& rel : pending) registry.register_relationship(std::move(rel));
  return registry;
}

json SchemaRegistry::to_json() const {
  std::shared_lock lock(mutex_);
  json out = json::array();
  // std::map order puts parents before children.
  for (const auto& [key, info] : types_) {
    json attrs = json::object();
    for (const auto& [name, kind] : info.declared) attrs[name] = std::string(casegraph::to_string(kind));
    out.push_back({{"path", key}, {"attributes", attrs}});
  }
  json rels = json::array();
  for (const auto& [_, rel] : relationships_) {
    rels.push_back({{"name", rel.name}, {"from", rel.from.str()}, {"to", rel.to.str()}});
  }
  out.push_back({{"relationship_kinds", rels}});
  return out;
}

SchemaRegistry default_registry() {
  using K = AttrKind;
  SchemaRegistry r;
  const auto add = [&r](std::string_view path, AttributeDecls attrs = {}) {
    r.register_type(TypePath(path), attrs);
  };

  add("Thing/Entity", {{"description", K::text}});
  add("Thing/Event", {{"time", K::interval}});
  add("Thing/Datetime", {{"interval", K::interval}, {"granularity", K::text}});
  add("Thing/Location", {{"position", K::geo_point}});
  add("Thing/Document", {{"object", K::binary_reference},
                         {"media_type", K::text},
                         {"name", K::text},
                         {"timestamp", K::timestamp},
                         {"content", K::text}});

  add("Thing/Entity/Person", {{"birth_date", K::timestamp}, {"nationality", K::text}});
  add("Thing/Entity/Organization");
  add("Thing/Entity/Organization/Company", {{"registration_number", K::text}});
  add("Thing/Entity/Organization/Authority");
  add("Thing/Entity/Organization/CriminalGroup");
  add("Thing/Entity/Speaker", {{"speaker_key", K::text}});
  add("Thing/Entity/Vehicle", {{"plate", K::text}});
  add("Thing/Entity/PhoneNumber");
  add("Thing/Entity/EmailAddress");
  add("Thing/Entity/Account");
  add("Thing/Entity/Account/BankAccount", {{"iban", K::text}});
  add("Thing/Entity/Account/OnlineAccount", {{"platform", K::text}});
  add("Thing/Entity/CryptoWallet");
  add("Thing/Entity/IpAddress");
  add("Thing/Entity/Website");
  add("Thing/Entity/Device", {{"serial", K::text}});
  add("Thing/Entity/Weapon");
  add("Thing/Entity/Drug");
  add("Thing/Entity/Misc");
  add("Thing/Entity/Product");
  add("Thing/Entity/Language");
  add("Thing/Entity/Law");
  add("Thing/Entity/Quantity", {{"value", K::real}, {"unit", K::text}});
  add("Thing/Entity/Numbers", {{"value", K::real}});

  add("Thing/Event/PhoneCall", {{"duration_seconds", K::integer}});
  add("Thing/Event/Meeting");
  add("Thing/Event/Message");
  add("Thing/Event/Transaction", {{"amount", K::real}, {"currency", K::text}});
  add("Thing/Event/Travel");
  add("Thing/Event/Crime");
  add("Thing/Event/Arrest");
  add("Thing/Event/Search");

  add("Thing/Datetime/Timepoint");
  add("Thing/Datetime/Date");
  add("Thing/Datetime/Timespan");

  add("Thing/Location/Address", {{"street", K::text}, {"postal_code", K::text}});
  add("Thing/Location/City");
  add("Thing/Location/Village");
  add("Thing/Location/Country", {{"iso_code", K::text}});
  add("Thing/Location/Region");
  add("Thing/Location/Building");
  add("Thing/Location/Coordinates");

  add("Thing/Document/Text");
  add("Thing/Document/Text/Email");
  add("Thing/Document/Text/ChatMessage");
  add("Thing/Document/Text/Report");
  add("Thing/Document/Audio", {{"duration_seconds", K::real}});
  add("Thing/Document/Audio/SpeakerTrack", {{"speakers", K::text}});
  add("Thing/Document/Image", {{"caption", K::text}});
  add("Thing/Document/Video");
  add("Thing/Document/Transcript");
  add("Thing/Document/Spreadsheet");
  add("Thing/Document/Webpage", {{"url", K::text}});
  add("Thing/Document/Binary");

  const auto rel = [&r](std::string_view name, std::string_view from, std::string_view to) {
    r.register_relationship({std::string(name), TypePath(from), TypePath(to)});
  };
  rel("mentioned_in", "Thing", "Thing/Document");
  rel("same_as", "Thing", "Thing");
  rel("related_to", "Thing", "Thing");
  rel("derived_from", "Thing/Document", "Thing/Document");
  rel("speaker_in", "Thing/Entity/Speaker", "Thing/Document/Audio");
  rel("located_at", "Thing", "Thing/Location");
  rel("occurred_at", "Thing/Event", "Thing/Datetime");
  rel("participated_in", "Thing/Entity", "Thing/Event");
  rel("member_of", "Thing/Entity/Person", "Thing/Entity/Organization");
  rel("communicated_with", "Thing/Entity", "Thing/Entity");
  rel("owns", "Thing/Entity", "Thing/Entity");
  rel("depicts", "Thing/Document/Image", "Thing");
  rel("identified_as", "Thing/Entity/Speaker", "Thing/Entity/Person");
  return r;
}

}  // namespace casegraph
