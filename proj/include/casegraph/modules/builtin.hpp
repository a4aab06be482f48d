#pragma once

// Built-in analysis modules. Speaker recognition, speech-to-text and image
// analysis are scripted stand-ins that read plain-text mock media:
//
//   mock audio   one utterance per line, "S1: words words"
//   mock image   UTF-8 caption text
//
// They follow the same run contract a real analyzer would.

#include <memory>

#include "casegraph/module_contract.hpp"
#include "casegraph/ner.hpp"

namespace casegraph {
class Orchestrator;
}

namespace casegraph::modules {

inline constexpr std::string_view kSpeakerRecognition = "speaker_recognition";
inline constexpr std::string_view kSpeechToText = "speech_to_text";
inline constexpr std::string_view kNer = "ner";
inline constexpr std::string_view kImageAnalysis = "image_analysis";

struct Utterance {
  std::string speaker;
  std::string words;
};
std::vector<Utterance> parse_mock_audio(std::string_view bytes);

// Parameters: {"deselect": ["S2", ...]} drops those speakers from the track.
class SpeakerRecognition final : public AnalysisModule {
 public:
  ModuleDescriptor descriptor() const override;
  RunOutput run(const RunInput& input) const override;
};

class SpeechToText final : public AnalysisModule {
 public:
  ModuleDescriptor descriptor() const override;
  RunOutput run(const RunInput& input) const override;
};

class NerModule final : public AnalysisModule {
 public:
  explicit NerModule(ner::Gazetteer gazetteer) : gazetteer_(std::move(gazetteer)) {}
  ModuleDescriptor descriptor() const override;
  RunOutput run(const RunInput& input) const override;
  // "show_similar": visible persons ranked by label similarity,
  // parameters {"threshold": 0.5}.
  nlohmann::json context_action(const std::string& action, const NodeRecord& item, const nlohmann::json& parameters,
                                const GraphState& state) const override;

 private:
  ner::Gazetteer gazetteer_;
};

class ImageAnalysis final : public AnalysisModule {
 public:
  ModuleDescriptor descriptor() const override;
  RunOutput run(const RunInput& input) const override;
  // "find_in_images": images whose captions mention the person.
  nlohmann::json context_action(const std::string& action, const NodeRecord& item, const nlohmann::json& parameters,
                                const GraphState& state) const override;
};

void register_builtin_modules(Orchestrator& orchestrator, const ner::Gazetteer& gazetteer);

}  // namespace casegraph::modules
