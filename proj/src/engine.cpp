#include "casegraph/engine.hpp"

#include <fstream>
#include <sstream>

#include "casegraph/error.hpp"
#include "casegraph/modules/builtin.hpp"

namespace casegraph {

using nlohmann::json;

namespace {
constexpr std::string_view kCapabilities[] = {"read", "annotate", "review", "ingest", "admin"};
}

std::string_view to_string(Capability c) { return kCapabilities[static_cast<int>(c)]; }

Capability capability_from_string(std::string_view s) {
  for (int i = 0; i < 5; ++i) {
    if (kCapabilities[i] == s) return static_cast<Capability>(i);
  }
  throw Error(ErrorCode::invalid_argument, "unknown capability '" + std::string(s) + "'");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::storage_failure, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

EngineConfig EngineConfig::from_json(const json& j) {
  EngineConfig c;
  c.host = j.value("host", c.host);
  c.port = j.value("port", c.port);
  if (j.contains("data_dir")) c.data_dir = j.at("data_dir").get<std::string>();
  if (j.contains("modules")) c.modules = j.at("modules").get<std::vector<std::string>>();
  c.orchestrator.max_cascade_depth = j.value("max_cascade_depth", c.orchestrator.max_cascade_depth);
  c.orchestrator.workers = j.value("workers", c.orchestrator.workers);
  if (j.contains("gazetteer") && !j.at("gazetteer").is_null()) c.gazetteer = j.at("gazetteer").get<std::string>();
  if (j.contains("ontology") && !j.at("ontology").is_null()) c.ontology = j.at("ontology").get<std::string>();
  if (j.contains("layout")) c.layout = layout::Params::from_json(j.at("layout"));
  if (j.contains("search")) {
    const auto& s = j.at("search");
    c.search.decay = s.value("decay", c.search.decay);
    c.search.max_edits_limit = s.value("max_edits_limit", c.search.max_edits_limit);
    c.search.max_depth_limit = s.value("max_depth_limit", c.search.max_depth_limit);
  }
  if (j.contains("tokens")) {
    for (const auto& [token, entry] : j.at("tokens").items()) {
      Principal p;
      p.actor = entry.at("actor").get<std::string>();
      for (const auto& cap : entry.at("capabilities")) p.capabilities.insert(capability_from_string(cap.get<std::string>()));
      c.tokens.emplace(token, std::move(p));
    }
  }
  if (j.contains("fixed_timestamp") && !j.at("fixed_timestamp").is_null()) {
    c.fixed_timestamp = parse_rfc3339(j.at("fixed_timestamp").get<std::string>());
  }
  c.fsync = j.value("fsync", c.fsync);
  return c;
}

EngineConfig EngineConfig::load(const std::filesystem::path& path) {
  try {
    auto c = from_json(json::parse(read_file(path)));
    // relative paths in a config file are relative to the file
    const auto base = path.parent_path();
    if (c.data_dir.is_relative()) c.data_dir = base / c.data_dir;
    if (c.gazetteer && c.gazetteer->is_relative()) c.gazetteer = base / *c.gazetteer;
    if (c.ontology && c.ontology->is_relative()) c.ontology = base / *c.ontology;
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, path.string() + ": " + e.what());
  }
}

Engine::Engine(EngineConfig config) : config_(std::move(config)) {
  if (config_.fixed_timestamp) clock_ = Clock::fixed(*config_.fixed_timestamp);
  std::filesystem::create_directories(config_.data_dir);
  schema_ = std::make_shared<const SchemaRegistry>(default_registry());
  log_ = ProvenanceLog::open_file(config_.data_dir / "provenance.ndjson", clock_, config_.fsync);
  store_ = std::make_unique<GraphStore>(schema_, log_);
  store_->rebuild_from_log();
  objects_ = std::make_unique<ObjectStore>(config_.data_dir / "objects");
  orchestrator_ = std::make_unique<Orchestrator>(*store_, *objects_, config_.orchestrator);

  gazetteer_ = config_.gazetteer ? ner::Gazetteer::from_json(json::parse(read_file(*config_.gazetteer)))
                                 : ner::sample_gazetteer();
  for (const auto& id : config_.modules) {
    if (id == modules::kSpeakerRecognition) {
      orchestrator_->register_module(std::make_shared<modules::SpeakerRecognition>());
    } else if (id == modules::kSpeechToText) {
      orchestrator_->register_module(std::make_shared<modules::SpeechToText>());
    } else if (id == modules::kNer) {
      orchestrator_->register_module(std::make_shared<modules::NerModule>(gazetteer_));
    } else if (id == modules::kImageAnalysis) {
      orchestrator_->register_module(std::make_shared<modules::ImageAnalysis>());
    } else {
      throw Error(ErrorCode::invalid_argument, "unknown module '" + id + "' in configuration");
    }
  }
  orchestrator_->restore_from_log();

  auto base = config_.ontology ? search::OntologyGraph::from_json(json::parse(read_file(*config_.ontology)))
                               : search::sample_ontology();
  ontology_ = std::make_unique<search::Ontology>(std::move(base), store_.get());
  ontology_->restore_from_log(*log_);
  search_ = std::make_unique<search::SearchEngine>(*store_, *ontology_, config_.search);
}

void Engine::register_module(std::shared_ptr<const AnalysisModule> module) {
  orchestrator_->register_module(std::move(module));
}

}  // namespace casegraph
