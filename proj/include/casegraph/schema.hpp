#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace casegraph {

// Slash-separated path from the root type, e.g. "Thing/Entity/Person".
class TypePath {
 public:
  static constexpr std::string_view kRoot = "Thing";

  TypePath() : full_(kRoot) {}
  explicit TypePath(std::string_view path);

  const std::string& str() const noexcept { return full_; }
  std::vector<std::string> segments() const;
  std::size_t depth() const;  // root has depth 0

  std::optional<TypePath> parent() const;
  TypePath child(std::string_view segment) const;
  // Path of depth <= 1 containing this path ("Thing/Entity" for a person).
  TypePath first_layer() const;

  // Inclusive prefix test on segment boundaries.
  bool starts_with(const TypePath& ancestor) const;

  friend bool operator==(const TypePath&, const TypePath&) = default;
  friend auto operator<=>(const TypePath&, const TypePath&) = default;

 private:
  std::string full_;
};

enum class AttrKind { text, integer, real, timestamp, interval, geo_point, binary_reference };

std::string_view to_string(AttrKind kind);
AttrKind attr_kind_from_string(std::string_view name);

using AttributeDecls = std::map<std::string, AttrKind>;

struct RelationshipKind {
  std::string name;
  TypePath from;
  TypePath to;
};

// Admiralty-style 6x6 grade: source reliability A-F, information credibility
// 1-6. F and 6 mean "cannot be judged" and rank lowest.
struct ConfidenceGrade {
  char reliability = 'F';
  int credibility = 6;

  static ConfidenceGrade parse(std::string_view text);
  static bool valid(char reliability, int credibility);
  std::string str() const;

  friend bool operator==(const ConfidenceGrade&, const ConfidenceGrade&) = default;
};

inline constexpr ConfidenceGrade kUnknownGrade{'F', 6};
// Best reliability an unreviewed automated result may carry.
inline constexpr char kAutomationCap = 'C';

bool grade_at_least(const ConfidenceGrade& grade, const ConfidenceGrade& threshold);
// Component-wise worst of two grades.
ConfidenceGrade grade_min(const ConfidenceGrade& a, const ConfidenceGrade& b);

enum class ActorKind { user, module };

struct Actor {
  ActorKind kind = ActorKind::user;
  std::string id;

  static Actor user(std::string id) { return {ActorKind::user, std::move(id)}; }
  static Actor module(std::string id) { return {ActorKind::module, std::move(id)}; }

  friend bool operator==(const Actor&, const Actor&) = default;
};

nlohmann::json to_json(const Actor& actor);
Actor actor_from_json(const nlohmann::json& j);

struct TypeInfo {
  TypePath path;
  AttributeDecls declared;   // attributes introduced at this level
  AttributeDecls effective;  // declared plus everything inherited
};

struct RegistrationReceipt {
  TypePath path;
  AttributeDecls effective;
};

// Registered types and relationship kinds. Writes are serialized; reads may
// happen concurrently.
class SchemaRegistry {
 public:
  SchemaRegistry();  // only the root type
  SchemaRegistry(const SchemaRegistry& other);
  SchemaRegistry& operator=(const SchemaRegistry& other);

  RegistrationReceipt register_type(const TypePath& path, const AttributeDecls& attributes);
  void register_relationship(RelationshipKind kind);

  bool contains(const TypePath& path) const;
  bool is_subtype(const TypePath& a, const TypePath& b) const;
  AttributeDecls effective_attributes(const TypePath& path) const;
  std::optional<RelationshipKind> relationship(std::string_view name) const;
  // Throws kind_violation unless `kind` allows an edge between these types.
  void check_edge(std::string_view kind, const TypePath& from, const TypePath& to) const;

  std::vector<TypePath> types() const;
  std::vector<RelationshipKind> relationships() const;
  std::size_t type_count() const;
  std::size_t relationship_count() const;

  // Array of {path, attributes, relationship_kinds}; parents must precede
  // children.
  static SchemaRegistry from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, TypeInfo> types_;
  std::map<std::string, RelationshipKind> relationships_;
};

// The shipped registry: the five first-layer types under Thing plus the
// investigation subtypes and relationship kinds used by the built-in modules.
SchemaRegistry default_registry();

namespace types {
inline const TypePath kThing{"Thing"};
inline const TypePath kEntity{"Thing/Entity"};
inline const TypePath kEvent{"Thing/Event"};
inline const TypePath kDatetime{"Thing/Datetime"};
inline const TypePath kLocation{"Thing/Location"};
inline const TypePath kDocument{"Thing/Document"};
inline const TypePath kPerson{"Thing/Entity/Person"};
inline const TypePath kOrganization{"Thing/Entity/Organization"};
inline const TypePath kSpeaker{"Thing/Entity/Speaker"};
inline const TypePath kTextDocument{"Thing/Document/Text"};
inline const TypePath kAudioDocument{"Thing/Document/Audio"};
inline const TypePath kSpeakerTrack{"Thing/Document/Audio/SpeakerTrack"};
inline const TypePath kImageDocument{"Thing/Document/Image"};
inline const TypePath kVideoDocument{"Thing/Document/Video"};
inline const TypePath kTranscript{"Thing/Document/Transcript"};
inline const TypePath kBinaryDocument{"Thing/Document/Binary"};
}  // namespace types

namespace relations {
inline constexpr std::string_view kMentionedIn = "mentioned_in";
inline constexpr std::string_view kSameAs = "same_as";
inline constexpr std::string_view kDerivedFrom = "derived_from";
inline constexpr std::string_view kSpeakerIn = "speaker_in";
}  // namespace relations

}  // namespace casegraph
