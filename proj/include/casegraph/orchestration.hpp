#pragma once

// Module registry and enrichment conductor. Ingested data is routed to every
// module whose media-type pattern matches; committed graph mutations are
// routed to every module whose listener matches; results of each run are
// committed in scheduling order, which keeps the provenance log reproducible
// whatever the worker count.

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "casegraph/graph_store.hpp"
#include "casegraph/module_contract.hpp"
#include "casegraph/object_store.hpp"

namespace casegraph {

struct OrchestratorConfig {
  std::uint32_t max_cascade_depth = 8;
  std::uint32_t workers = 1;
};

enum class JobStatus { queued, running, done, failed };
std::string_view to_string(JobStatus s);

struct IngestJob {
  std::uint64_t id = 0;
  ObjectRef object;
  std::string media_type;
  Actor actor;
  JobStatus status = JobStatus::queued;
  ItemId document;
  std::vector<std::string> scheduled_modules;
  std::vector<ItemId> produced;
  std::vector<std::string> warnings;
  std::uint32_t cascade_depth = 0;

  nlohmann::json to_json() const;
};

enum class RunStatus { pending, completed, failed, superseded };
std::string_view to_string(RunStatus s);

struct RunRecord {
  std::uint64_t id = 0;
  std::string module;
  ItemId trigger;
  nlohmann::json parameters = nlohmann::json::object();
  std::string digest;
  std::uint32_t cascade_depth = 0;
  std::uint64_t job = 0;
  RunStatus status = RunStatus::pending;
  std::vector<ItemId> produced;
  std::string error;
};

struct RerunResult {
  bool deduplicated = false;  // identical parameters: nothing happened
  std::uint64_t run = 0;
  std::vector<std::uint64_t> superseded_runs;
  std::vector<ItemId> hidden;
  std::vector<ItemId> produced;
};

struct ActionInfo {
  std::string module;
  std::string action;
  std::string label;
};

struct PreviewInfo {
  std::string module;
  std::string renderer;
};

class Orchestrator {
 public:
  Orchestrator(GraphStore& store, ObjectStore& objects, OrchestratorConfig config = {});
  ~Orchestrator();
  Orchestrator(const Orchestrator&) = delete;
  Orchestrator& operator=(const Orchestrator&) = delete;

  void register_module(std::shared_ptr<const AnalysisModule> module);
  std::vector<ModuleDescriptor> modules() const;

  // Stores the bytes, creates a Document node, schedules capable modules and
  // runs the cascade to completion.
  IngestJob ingest(std::string_view bytes, const std::string& media_type, const Actor& actor,
                   const std::string& name = {});
  std::optional<IngestJob> job(std::uint64_t id) const;

  // Schedules the runs a committed mutation triggers; returns their ids.
  std::vector<std::uint64_t> dispatch_change(const MutationEvent& event);
  // Executes pending runs (and whatever they trigger) until none remain.
  void drain();

  RerunResult rerun_with_parameters(ItemId source, const std::string& module_id,
                                    const nlohmann::json& parameters, const Actor& actor);

  std::vector<ActionInfo> list_context_actions(ItemId item, bool include_hidden = false) const;
  std::vector<PreviewInfo> list_previews(ItemId item) const;
  nlohmann::json invoke_action(const std::string& module_id, const std::string& action, ItemId item,
                               const nlohmann::json& parameters, const Actor& actor);

  std::vector<RunRecord> runs() const;
  std::size_t dropped_runs() const;

  // Rebuilds run and job bookkeeping from module_run and ingest entries.
  void restore_from_log();

  const OrchestratorConfig& config() const noexcept { return config_; }

 private:
  std::optional<std::uint64_t> schedule(const std::string& module_id, ItemId trigger,
                                        std::uint32_t depth, const nlohmann::json& parameters,
                                        std::uint64_t job);
  void commit_run(RunRecord& run, const RunOutput& output);
  std::string content_digest(const NodeRecord& item, const nlohmann::json& parameters) const;
  std::shared_ptr<const AnalysisModule> find_module(const std::string& id) const;
  RunInput prepare_input(const RunRecord& run) const;
  void on_event(const MutationEvent& event);
  void finish_job(std::uint64_t job_id);

  GraphStore& store_;
  ObjectStore& objects_;
  OrchestratorConfig config_;

  std::recursive_mutex op_mutex_;  // serializes ingest / rerun / drain
  mutable std::mutex mutex_;       // guards the bookkeeping below
  std::vector<std::shared_ptr<const AnalysisModule>> modules_;
  std::vector<ModuleDescriptor> descriptors_;
  std::map<std::uint64_t, RunRecord> runs_;
  std::set<std::string> run_keys_;
  std::map<std::uint64_t, IngestJob> jobs_;
  std::map<std::uint64_t, std::uint64_t> item_job_;  // item id -> job id
  std::vector<std::uint64_t> pending_;
  std::uint64_t current_job_ = 0;  // job owning the items currently being committed
  std::uint64_t next_run_ = 1;
  std::uint64_t next_job_ = 1;
  std::size_t dropped_ = 0;
};

TypePath document_type_for(std::string_view media_type);

}  // namespace casegraph
