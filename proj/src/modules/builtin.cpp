#include "casegraph/modules/builtin.hpp"

#include <algorithm>
#include <set>

#include "casegraph/orchestration.hpp"
#include "casegraph/text.hpp"

namespace casegraph::modules {

using nlohmann::json;

namespace {

std::optional<std::string> text_of(const RunInput& input) {
  if (const auto it = input.item.attributes.find("content"); it != input.item.attributes.end()) {
    if (const auto* s = std::get_if<std::string>(&it->second)) return *s;
  }
  if (input.bytes && text::is_valid_utf8(*input.bytes)) return input.bytes;
  return std::nullopt;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

const ConfidenceGrade kDerivationGrade{'B', 2};

CandidateEdge derived_from(std::size_t local, ItemId source) {
  return {std::string(relations::kDerivedFrom), EndpointRef::candidate(local), EndpointRef::item(source),
          kDerivationGrade, {}};
}

}  // namespace

std::vector<Utterance> parse_mock_audio(std::string_view bytes) {
  std::vector<Utterance> out;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    auto nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) nl = bytes.size();
    const auto line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    auto speaker = trim(line.substr(0, colon));
    auto words = trim(line.substr(colon + 1));
    if (speaker.empty() || words.empty()) continue;
    out.push_back({std::move(speaker), std::move(words)});
  }
  return out;
}

// -- speaker recognition ------------------------------------------------------

ModuleDescriptor SpeakerRecognition::descriptor() const {
  return {std::string(kSpeakerRecognition),
          {"audio/*"},
          {},
          {{"rerun", "Deselect speakers and re-run", types::kAudioDocument}},
          {{types::kAudioDocument, "audio-player"}}};
}

RunOutput SpeakerRecognition::run(const RunInput& input) const {
  if (!input.bytes || !text::is_valid_utf8(*input.bytes)) {
    throw Error(ErrorCode::invalid_argument, "speaker recognition needs mock audio (UTF-8 utterance lines)");
  }
  std::set<std::string> deselected;
  if (input.parameters.contains("deselect")) {
    for (const auto& s : input.parameters.at("deselect")) deselected.insert(s.get<std::string>());
  }
  RunOutput out;
  std::vector<std::string> speakers;
  std::string content;
  for (const auto& u : parse_mock_audio(*input.bytes)) {
    if (deselected.contains(u.speaker)) continue;
    if (std::find(speakers.begin(), speakers.end(), u.speaker) == speakers.end()) speakers.push_back(u.speaker);
    content += u.speaker + ": " + u.words + "\n";
  }
  std::string speaker_list;
  for (const auto& s : speakers) speaker_list += (speaker_list.empty() ? "" : ",") + s;

  out.nodes.push_back({{types::kSpeakerTrack,
                        "Speaker track of " + input.item.label,
                        {{"content", content}, {"speakers", speaker_list}}},
                       true});
  out.edges.push_back(derived_from(0, input.item.id));
  for (const auto& s : speakers) {
    out.nodes.push_back({{types::kSpeaker, s + " in " + input.item.label, {{"speaker_key", s}}}, false});
    out.edges.push_back({std::string(relations::kSpeakerIn), EndpointRef::candidate(out.nodes.size() - 1),
                         EndpointRef::candidate(0), ConfidenceGrade{'B', 2}, {}});
  }
  return out;
}

// -- speech to text -----------------------------------------------------------

ModuleDescriptor SpeechToText::descriptor() const {
  return {std::string(kSpeechToText), {}, {{types::kSpeakerTrack, {Mutation::create_node}}}, {}, {}};
}

RunOutput SpeechToText::run(const RunInput& input) const {
  const auto content = text_of(input);
  if (!content) throw Error(ErrorCode::invalid_argument, "speaker track has no content");
  std::string transcript;
  for (const auto& u : parse_mock_audio(*content)) transcript += u.words + "\n";
  RunOutput out;
  if (transcript.empty()) return out;
  out.nodes.push_back({{types::kTranscript, "Transcript of " + input.item.label, {{"content", transcript}}}, true});
  out.edges.push_back(derived_from(0, input.item.id));
  return out;
}

// -- NER ------------------------------------------------------------------------

ModuleDescriptor NerModule::descriptor() const {
  return {std::string(kNer),
          {"text/*"},
          {{types::kTranscript, {Mutation::create_node}}, {types::kTextDocument, {Mutation::create_node}}},
          {{"show_similar", "Show similar persons", types::kPerson}},
          {{types::kTextDocument, "document-viewer"}, {types::kTranscript, "document-viewer"}}};
}

RunOutput NerModule::run(const RunInput& input) const {
  const auto content = text_of(input);
  if (!content) return {};
  return ner::mention_candidates(input.item.id, ner::extract(*content, gazetteer_));
}

json NerModule::context_action(const std::string& action, const NodeRecord& item, const json& parameters,
                               const GraphState& state) const {
  if (action != "show_similar") return AnalysisModule::context_action(action, item, parameters, state);
  const double threshold = parameters.value("threshold", 0.5);
  const auto self = text::decode_utf8(item.normalized_label);
  struct Hit {
    double score;
    ItemId id;
    std::string label;
  };
  std::vector<Hit> hits;
  for (const auto& n : state.nodes()) {
    if (n.hidden || n.id == item.id || !n.type.starts_with(types::kPerson)) continue;
    const auto other = text::decode_utf8(n.normalized_label);
    const auto longest = std::max(self.size(), other.size());
    const double score =
        longest == 0 ? 1.0 : 1.0 - static_cast<double>(text::edit_distance(self, other)) / static_cast<double>(longest);
    if (score >= threshold) hits.push_back({score, n.id, n.label});
  }
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  });
  json items = json::array();
  for (const auto& h : hits) items.push_back({{"id", h.id.value}, {"label", h.label}, {"score", h.score}});
  return json{{"items", items}};
}

// -- image analysis ---------------------------------------------------------------

ModuleDescriptor ImageAnalysis::descriptor() const {
  return {std::string(kImageAnalysis),
          {"image/*"},
          {},
          {{"find_in_images", "Find person in images", types::kPerson}},
          {{types::kImageDocument, "image-viewer"}}};
}

RunOutput ImageAnalysis::run(const RunInput& input) const {
  RunOutput out;
  if (!input.bytes || !text::is_valid_utf8(*input.bytes)) return out;
  const auto caption = trim(*input.bytes);
  if (caption.empty()) return out;
  out.nodes.push_back({{types::kTextDocument, "Caption of " + input.item.label, {{"content", caption}}}, true});
  out.edges.push_back(derived_from(0, input.item.id));
  return out;
}

json ImageAnalysis::context_action(const std::string& action, const NodeRecord& item, const json& parameters,
                                   const GraphState& state) const {
  if (action != "find_in_images") return AnalysisModule::context_action(action, item, parameters, state);
  std::set<ItemId> images;
  const auto person = state.node_index(item.id);
  if (!person) return json{{"items", json::array()}};
  for (const auto e : state.incident(*person)) {
    const auto& mention = state.edges()[e];
    if (mention.hidden || mention.kind != relations::kMentionedIn || mention.from != item.id) continue;
    const auto doc = state.node_index(mention.to);
    if (!doc) continue;
    for (const auto d : state.incident(*doc)) {
      const auto& derivation = state.edges()[d];
      if (derivation.hidden || derivation.kind != relations::kDerivedFrom || derivation.from != mention.to) continue;
      const auto* image = state.node(derivation.to);
      if (image && !image->hidden && image->type.starts_with(types::kImageDocument)) images.insert(image->id);
    }
  }
  json items = json::array();
  for (const auto id : images) items.push_back({{"id", id.value}, {"label", state.node(id)->label}});
  return json{{"items", items}};
}

void register_builtin_modules(Orchestrator& orchestrator, const ner::Gazetteer& gazetteer) {
  orchestrator.register_module(std::make_shared<SpeakerRecognition>());
  orchestrator.register_module(std::make_shared<SpeechToText>());
  orchestrator.register_module(std::make_shared<NerModule>(gazetteer));
  orchestrator.register_module(std::make_shared<ImageAnalysis>());
}

}  // namespace casegraph::modules
