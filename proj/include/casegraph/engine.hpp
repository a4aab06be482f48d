#pragma once

// Wires the store, provenance log, object storage, orchestrator, modules,
// ontology and search together from one JSON configuration.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "casegraph/graph_store.hpp"
#include "casegraph/layout.hpp"
#include "casegraph/ner.hpp"
#include "casegraph/object_store.hpp"
#include "casegraph/orchestration.hpp"
#include "casegraph/search.hpp"

namespace casegraph {

enum class Capability { read, annotate, review, ingest, admin };
std::string_view to_string(Capability c);
Capability capability_from_string(std::string_view s);

struct Principal {
  std::string actor;
  std::set<Capability> capabilities;

  // admin covers everything
  bool can(Capability c) const { return capabilities.contains(c) || capabilities.contains(Capability::admin); }
};

struct EngineConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path data_dir = "casegraph-data";
  std::vector<std::string> modules{"speaker_recognition", "speech_to_text", "ner", "image_analysis"};
  OrchestratorConfig orchestrator;
  std::optional<std::filesystem::path> gazetteer;  // default: ner::sample_gazetteer()
  std::optional<std::filesystem::path> ontology;   // default: search::sample_ontology()
  layout::Params layout;
  search::SearchConfig search;
  std::map<std::string, Principal> tokens;
  std::optional<EpochSeconds> fixed_timestamp;
  bool fsync = false;

  static EngineConfig from_json(const nlohmann::json& j);
  static EngineConfig load(const std::filesystem::path& path);
};

class Engine {
 public:
  // Opens (or creates) the log under data_dir, verifying the hash chain
  // first; a broken chain throws Error(broken_chain) and nothing is served.
  explicit Engine(EngineConfig config);
  // Extra modules (tests) can be registered before anything is ingested.
  void register_module(std::shared_ptr<const AnalysisModule> module);

  const EngineConfig& config() const noexcept { return config_; }
  const Clock& clock() const noexcept { return clock_; }
  GraphStore& store() noexcept { return *store_; }
  ProvenanceLog& log() noexcept { return *log_; }
  ObjectStore& objects() noexcept { return *objects_; }
  Orchestrator& orchestrator() noexcept { return *orchestrator_; }
  search::Ontology& ontology() noexcept { return *ontology_; }
  search::SearchEngine& search() noexcept { return *search_; }
  const ner::Gazetteer& gazetteer() const noexcept { return gazetteer_; }

 private:
  EngineConfig config_;
  Clock clock_;
  std::shared_ptr<const SchemaRegistry> schema_;
  std::shared_ptr<ProvenanceLog> log_;
  std::unique_ptr<GraphStore> store_;
  std::unique_ptr<ObjectStore> objects_;
  std::unique_ptr<Orchestrator> orchestrator_;
  ner::Gazetteer gazetteer_;
  std::unique_ptr<search::Ontology> ontology_;
  std::unique_ptr<search::SearchEngine> search_;
};

std::string read_file(const std::filesystem::path& path);

}  // namespace casegraph
