#include "casegraph/orchestration.hpp"

#include <algorithm>
#include <deque>
#include <thread>
#include <unordered_set>
#include <variant>

#include "casegraph/digest.hpp"
#include "casegraph/error.hpp"
#include "casegraph/text.hpp"

namespace casegraph {

using nlohmann::json;

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string run_key(const std::string& module, ItemId trigger, const std::string& digest) {
  return module + '\x1f' + std::to_string(trigger.value) + '\x1f' + digest;
}

json ids_json(const std::vector<ItemId>& ids) {
  json out = json::array();
  for (const auto id : ids) out.push_back(id.value);
  return out;
}

}  // namespace

json AnalysisModule::context_action(const std::string& action, const NodeRecord&, const json&,
                                    const GraphState&) const {
  throw Error(ErrorCode::invalid_argument,
              "module " + descriptor().id + " does not implement action '" + action + "'");
}

bool media_type_matches(std::string_view pattern, std::string_view media_type) {
  const auto p = lower(pattern);
  const auto m = lower(media_type);
  if (p == "*" || p == "*/*") return true;
  if (p.size() >= 2 && p.ends_with("/*")) {
    return m.size() > p.size() - 1 && m.compare(0, p.size() - 1, p, 0, p.size() - 1) == 0;
  }
  return p == m;
}

TypePath document_type_for(std::string_view media_type) {
  const auto m = lower(media_type);
  if (m.starts_with("text/")) return types::kTextDocument;
  if (m.starts_with("audio/")) return types::kAudioDocument;
  if (m.starts_with("image/")) return types::kImageDocument;
  if (m.starts_with("video/")) return types::kVideoDocument;
  return types::kBinaryDocument;
}

std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::pending: return "pending";
    case RunStatus::completed: return "completed";
    case RunStatus::failed: return "failed";
    case RunStatus::superseded: return "superseded";
  }
  return "pending";
}

std::string_view to_string(JobStatus s) {
  switch (s) {
    case JobStatus::queued: return "queued";
    case JobStatus::running: return "running";
    case JobStatus::done: return "done";
    case JobStatus::failed: return "failed";
  }
  return "queued";
}

json IngestJob::to_json() const {
  return json{{"id", id},
              {"object", object.to_json()},
              {"media_type", media_type},
              {"actor", casegraph::to_json(actor)},
              {"status", std::string(casegraph::to_string(status))},
              {"document", document.value},
              {"scheduled_modules", scheduled_modules},
              {"produced", ids_json(produced)},
              {"warnings", warnings},
              {"cascade_depth", cascade_depth}};
}

// -- orchestrator -----------------------------------------------------------

Orchestrator::Orchestrator(GraphStore& store, ObjectStore& objects, OrchestratorConfig config)
    : store_(store), objects_(objects), config_(config) {
  if (config_.workers == 0) config_.workers = 1;
  store_.set_listener([this](const MutationEvent& e) { on_event(e); });
}

Orchestrator::~Orchestrator() { store_.set_listener(nullptr); }

void Orchestrator::register_module(std::shared_ptr<const AnalysisModule> module) {
  if (!module) throw Error(ErrorCode::invalid_argument, "null module");
  auto d = module->descriptor();
  std::scoped_lock lock(mutex_);
  if (d.id.empty()) throw Error(ErrorCode::invalid_argument, "module id must not be empty");
  if (d.ingest_types.empty() && d.listeners.empty()) {
    throw Error(ErrorCode::invalid_argument,
                "module " + d.id + " registers neither ingest types nor change listeners");
  }
  for (const auto& existing : descriptors_) {
    if (existing.id == d.id) throw Error(ErrorCode::duplicate_module, "module id already registered: " + d.id);
  }
  modules_.push_back(std::move(module));
  descriptors_.push_back(std::move(d));
}

std::vector<ModuleDescriptor> Orchestrator::modules() const {
  std::scoped_lock lock(mutex_);
  return descriptors_;
}

std::shared_ptr<const AnalysisModule> Orchestrator::find_module(const std::string& id) const {
  std::scoped_lock lock(mutex_);
  for (std::size_t i = 0; i < descriptors_.size(); ++i) {
    if (descriptors_[i].id == id) return modules_[i];
  }
  return nullptr;
}

std::string Orchestrator::content_digest(const NodeRecord& item, const json& parameters) const {
  const json content{{"type", item.type.str()}, {"label", item.label}, {"attributes", to_json(item.attributes)}};
  return sha256_hex(content.dump() + '\x1f' + parameters.dump());
}

std::optional<std::uint64_t> Orchestrator::schedule(const std::string& module_id, ItemId trigger,
                                                    std::uint32_t depth, const json& parameters,
                                                    std::uint64_t job) {
  if (depth > config_.max_cascade_depth) {
    {
      std::scoped_lock lock(mutex_);
      ++dropped_;
    }
    store_.record(Actor::module(module_id), Mutation::module_run,
                  json{{"status", "dropped"},
                       {"module", module_id},
                       {"trigger", trigger.value},
                       {"cascade_depth", depth},
                       {"max_cascade_depth", config_.max_cascade_depth}});
    return std::nullopt;
  }
  const auto item = store_.node(trigger);
  if (!item) return std::nullopt;
  const auto digest = content_digest(*item, parameters);
  std::scoped_lock lock(mutex_);
  if (!run_keys_.insert(run_key(module_id, trigger, digest)).second) return std::nullopt;
  RunRecord run;
  run.id = next_run_++;
  run.module = module_id;
  run.trigger = trigger;
  run.parameters = parameters;
  run.digest = digest;
  run.cascade_depth = depth;
  run.job = job;
  pending_.push_back(run.id);
  const auto id = run.id;
  runs_.emplace(id, std::move(run));
  return id;
}

std::vector<std::uint64_t> Orchestrator::dispatch_change(const MutationEvent& event) {
  const auto item = store_.node(event.item);
  if (!item) return {};
  std::vector<std::string> matching;
  std::uint64_t job = 0;
  {
    std::scoped_lock lock(mutex_);
    for (const auto& d : descriptors_) {
      const bool hit = std::any_of(d.listeners.begin(), d.listeners.end(), [&](const ListenerSpec& l) {
        return item->type.starts_with(l.type) &&
               std::find(l.mutations.begin(), l.mutations.end(), event.mutation) != l.mutations.end();
      });
      if (hit) matching.push_back(d.id);
    }
    if (auto it = item_job_.find(event.item.value); it != item_job_.end()) job = it->second;
  }
  std::vector<std::uint64_t> scheduled;
  for (const auto& m : matching) {
    if (auto id = schedule(m, event.item, event.cascade_depth + 1, json::object(), job)) {
      scheduled.push_back(*id);
    }
  }
  return scheduled;
}

void Orchestrator::on_event(const MutationEvent& event) {
  if (event.mutation == Mutation::create_node) {
    std::scoped_lock lock(mutex_);
    if (!item_job_.contains(event.item.value) && current_job_ != 0) {
      item_job_[event.item.value] = current_job_;
    }
  }
  dispatch_change(event);
}

RunInput Orchestrator::prepare_input(const RunRecord& run) const {
  RunInput input;
  auto item = store_.node(run.trigger);
  if (!item) throw Error(ErrorCode::unknown_item, "run trigger vanished");
  input.item = std::move(*item);
  if (auto it = input.item.attributes.find("object"); it != input.item.attributes.end()) {
    if (const auto* ref = std::get_if<BinaryRef>(&it->second)) input.bytes = objects_.get(ref->digest);
  }
  input.parameters = run.parameters;
  input.cascade_depth = run.cascade_depth;
  return input;
}

void Orchestrator::commit_run(RunRecord& run, const RunOutput& output) {
  const Actor actor = Actor::module(run.module);
  const auto& schema = store_.schema();

  // Validate everything before the first commit so a bad run never leaves a
  // partial result behind.
  for (const auto& c : output.nodes) store_.validate_node(c.node);
  const auto endpoint_type = [&](const EndpointRef& ref) -> TypePath {
    if (ref.existing) {
      const auto n = store_.node(*ref.existing);
      if (!n) throw Error(ErrorCode::dangling_endpoint, "candidate edge references unknown item");
      return n->type;
    }
    if (ref.local >= output.nodes.size()) {
      throw Error(ErrorCode::dangling_endpoint, "candidate edge references unknown candidate");
    }
    return output.nodes[ref.local].node.type;
  };
  for (const auto& e : output.edges) schema.check_edge(e.kind, endpoint_type(e.from), endpoint_type(e.to));

  Attribution attribution;
  if (const auto trigger = store_.node(run.trigger)) {
    if (trigger->type.starts_with(types::kDocument)) {
      attribution.document = run.trigger;
    } else {
      for (const auto& a : trigger->attributions) {
        if (a.document) {
          attribution.document = a.document;
          break;
        }
      }
    }
  }
  attribution.module = run.module;
  attribution.run = run.id;

  std::vector<ItemId> local_ids;
  for (const auto& c : output.nodes) {
    const auto id = c.fresh ? store_.insert_node(c.node, actor, attribution, run.cascade_depth)
                            : store_.upsert_node(c.node, actor, attribution, run.cascade_depth).id;
    local_ids.push_back(id);
    run.produced.push_back(id);
  }
  const auto resolve = [&](const EndpointRef& ref) { return ref.existing ? *ref.existing : local_ids[ref.local]; };
  for (const auto& e : output.edges) {
    run.produced.push_back(store_.upsert_edge(
        EdgeCandidate{e.kind, resolve(e.from), resolve(e.to), e.grade, e.attributes}, actor, attribution,
        run.cascade_depth));
  }
  std::scoped_lock lock(mutex_);
  for (const auto id : run.produced) item_job_.try_emplace(id.value, run.job);
}

void Orchestrator::drain() {
  std::scoped_lock op(op_mutex_);
  std::set<std::uint64_t> touched_jobs;
  while (true) {
    std::vector<RunRecord> batch;
    {
      std::scoped_lock lock(mutex_);
      for (const auto id : pending_) batch.push_back(runs_.at(id));
      pending_.clear();
    }
    if (batch.empty()) break;

    std::vector<std::variant<RunOutput, std::string>> results(batch.size());
    const auto execute = [&](std::size_t i) {
      try {
        const auto module = find_module(batch[i].module);
        if (!module) throw Error(ErrorCode::invalid_argument, "module " + batch[i].module + " is not registered");
        results[i] = module->run(prepare_input(batch[i]));
      } catch (const std::exception& ex) {
        results[i] = std::string(ex.what());
      }
    };
    const auto workers = std::min<std::size_t>(config_.workers, batch.size());
    if (workers <= 1) {
      for (std::size_t i = 0; i < batch.size(); ++i) execute(i);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          for (std::size_t i = w; i < batch.size(); i += workers) execute(i);
        });
      }
      for (auto& t : pool) t.join();
    }

    // Commits happen in scheduling order regardless of the worker count.
    for (std::size_t i = 0; i < batch.size(); ++i) {
      auto& run = batch[i];
      touched_jobs.insert(run.job);
      const Actor actor = Actor::module(run.module);
      store_.record(actor, Mutation::module_run,
                    json{{"status", "started"},
                         {"run", run.id},
                         {"module", run.module},
                         {"trigger", run.trigger.value},
                         {"parameters", run.parameters},
                         {"digest", run.digest},
                         {"cascade_depth", run.cascade_depth},
                         {"job", run.job}});
      std::string error;
      if (const auto* failure = std::get_if<std::string>(&results[i])) {
        error = *failure;
      } else {
        {
          std::scoped_lock lock(mutex_);
          current_job_ = run.job;
        }
        try {
          commit_run(run, std::get<RunOutput>(results[i]));
        } catch (const std::exception& ex) {
          error = ex.what();
        }
        std::scoped_lock lock(mutex_);
        current_job_ = 0;
      }
      if (error.empty()) {
        run.status = RunStatus::completed;
        store_.record(actor, Mutation::module_run,
                      json{{"status", "completed"}, {"run", run.id}, {"produced", ids_json(run.produced)}});
      } else {
        run.status = RunStatus::failed;
        run.error = error;
        store_.record(actor, Mutation::module_run,
                      json{{"status", "failed"}, {"run", run.id}, {"error", error},
                           {"produced", ids_json(run.produced)}});
      }
      std::scoped_lock lock(mutex_);
      runs_[run.id] = run;
    }
  }
  for (const auto job : touched_jobs) {
    if (job != 0) finish_job(job);
  }
}

void Orchestrator::finish_job(std::uint64_t job_id) {
  std::scoped_lock lock(mutex_);
  const auto it = jobs_.find(job_id);
  if (it == jobs_.end()) return;
  auto& job = it->second;
  bool failed = false;
  std::set<ItemId> produced{job.document};
  for (const auto& [_, run] : runs_) {
    if (run.job != job_id) continue;
    failed = failed || run.status == RunStatus::failed;
    produced.insert(run.produced.begin(), run.produced.end());
  }
  job.produced.assign(produced.begin(), produced.end());
  job.status = failed ? JobStatus::failed : JobStatus::done;
}

IngestJob Orchestrator::ingest(std::string_view bytes, const std::string& media_type, const Actor& actor,
                               const std::string& name) {
  std::scoped_lock op(op_mutex_);
  if (bytes.empty()) throw Error(ErrorCode::invalid_argument, "cannot ingest an empty payload");
  if (media_type.empty()) throw Error(ErrorCode::invalid_argument, "media type required");
  const auto ref = objects_.put(bytes, media_type);
  const auto type = document_type_for(media_type);

  IngestJob job;
  {
    std::scoped_lock lock(mutex_);
    job.id = next_job_++;
  }
  job.object = ref;
  job.media_type = media_type;
  job.actor = actor;
  job.status = JobStatus::running;

  Attributes attrs{{"object", BinaryRef{ref.digest}}, {"media_type", media_type}};
  if (!name.empty()) attrs.emplace("name", name);
  if (type.starts_with(types::kTextDocument) && text::is_valid_utf8(bytes)) {
    attrs.emplace("content", std::string(bytes));
  }
  const auto label = name.empty() ? type.segments().back() + " " + ref.digest.substr(0, 12) : name;
  {
    std::scoped_lock lock(mutex_);
    current_job_ = job.id;
    jobs_[job.id] = job;
  }
  try {
    job.document = store_.insert_node(NodeCandidate{type, label, attrs}, actor, std::nullopt, 0);
  } catch (...) {
    std::scoped_lock lock(mutex_);
    current_job_ = 0;
    jobs_.erase(job.id);
    throw;
  }
  {
    std::scoped_lock lock(mutex_);
    current_job_ = 0;
  }
  store_.record(actor, Mutation::ingest,
                json{{"job", job.id},
                     {"document", job.document.value},
                     {"object", ref.to_json()},
                     {"media_type", media_type},
                     {"name", name}});

  std::vector<std::string> capable;
  for (const auto& d : modules()) {
    if (std::any_of(d.ingest_types.begin(), d.ingest_types.end(),
                    [&](const std::string& p) { return media_type_matches(p, media_type); })) {
      capable.push_back(d.id);
    }
  }
  job.scheduled_modules = capable;
  if (capable.empty()) job.warnings.push_back("no module accepts media type " + media_type);
  {
    std::scoped_lock lock(mutex_);
    jobs_[job.id] = job;
    item_job_[job.document.value] = job.id;
  }
  for (const auto& m : capable) schedule(m, job.document, 1, json::object(), job.id);
  drain();
  finish_job(job.id);
  std::scoped_lock lock(mutex_);
  return jobs_.at(job.id);
}

std::optional<IngestJob> Orchestrator::job(std::uint64_t id) const {
  std::scoped_lock lock(mutex_);
  const auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second;
}

RerunResult Orchestrator::rerun_with_parameters(ItemId source, const std::string& module_id,
                                                const json& parameters, const Actor& actor) {
  std::scoped_lock op(op_mutex_);
  if (!find_module(module_id)) throw Error(ErrorCode::invalid_argument, "unknown module " + module_id);
  const auto item = store_.node(source);
  if (!item) throw Error(ErrorCode::unknown_item, "unknown item " + std::to_string(source.value));

  std::optional<RunRecord> prior;
  std::vector<RunRecord> all;
  {
    std::scoped_lock lock(mutex_);
    for (const auto& [_, run] : runs_) {
      all.push_back(run);
      if (run.module == module_id && run.trigger == source &&
          (run.status == RunStatus::completed || run.status == RunStatus::failed)) {
        prior = run;
      }
    }
  }
  if (!prior) {
    throw Error(ErrorCode::no_prior_run,
                "module " + module_id + " has no prior run on item " + std::to_string(source.value));
  }
  RerunResult result;
  if (content_digest(*item, parameters) == prior->digest) {
    result.deduplicated = true;
    result.run = prior->id;
    return result;
  }

  // The prior run plus everything its results triggered, transitively.
  std::set<std::uint64_t> superseded{prior->id};
  std::set<ItemId> produced(prior->produced.begin(), prior->produced.end());
  for (bool grew = true; grew;) {
    grew = false;
    for (const auto& run : all) {
      if (superseded.contains(run.id) || run.status == RunStatus::superseded) continue;
      if (produced.contains(run.trigger)) {
        superseded.insert(run.id);
        produced.insert(run.produced.begin(), run.produced.end());
        grew = true;
      }
    }
  }

  for (const auto run_id : superseded) {
    {
      std::scoped_lock lock(mutex_);
      auto& run = runs_.at(run_id);
      run.status = RunStatus::superseded;
      run_keys_.erase(run_key(run.module, run.trigger, run.digest));
    }
    store_.record(actor, Mutation::module_run,
                  json{{"status", "superseded"}, {"run", run_id}, {"reason", "rerun with new parameters"}});
    result.superseded_runs.push_back(run_id);
  }

  for (const auto id : produced) {
    if (const auto node = store_.node(id)) {
      if (node->hidden) continue;
      const bool survives = std::any_of(node->attributions.begin(), node->attributions.end(),
                                        [&](const Attribution& a) { return !a.run || !superseded.contains(*a.run); });
      if (survives) continue;
    } else if (const auto edge = store_.edge(id)) {
      if (edge->hidden) continue;
    } else {
      continue;
    }
    store_.hide(id, actor, "superseded");
    result.hidden.push_back(id);
  }

  const auto new_run = schedule(module_id, source, prior->cascade_depth, parameters, prior->job);
  if (!new_run) throw Error(ErrorCode::invalid_argument, "rerun could not be scheduled");
  result.run = *new_run;
  drain();
  {
    std::scoped_lock lock(mutex_);
    for (auto it = runs_.lower_bound(*new_run); it != runs_.end(); ++it) {
      result.produced.insert(result.produced.end(), it->second.produced.begin(), it->second.produced.end());
    }
  }
  if (prior->job != 0) finish_job(prior->job);
  return result;
}

std::vector<ActionInfo> Orchestrator::list_context_actions(ItemId item, bool include_hidden) const {
  const auto node = store_.node(item);
  if (!node) {
    if (store_.edge(item)) return {};
    throw Error(ErrorCode::unknown_item, "unknown item " + std::to_string(item.value));
  }
  if (node->hidden && !include_hidden) return {};
  std::vector<ActionInfo> out;
  std::scoped_lock lock(mutex_);
  for (const auto& d : descriptors_) {
    for (const auto& a : d.actions) {
      if (node->type.starts_with(a.target)) out.push_back({d.id, a.id, a.label});
    }
  }
  return out;
}

std::vector<PreviewInfo> Orchestrator::list_previews(ItemId item) const {
  const auto node = store_.node(item);
  if (!node) throw Error(ErrorCode::unknown_item, "unknown item " + std::to_string(item.value));
  std::vector<PreviewInfo> out;
  std::scoped_lock lock(mutex_);
  for (const auto& d : descriptors_) {
    for (const auto& p : d.previews) {
      if (node->type.starts_with(p.target)) out.push_back({d.id, p.renderer});
    }
  }
  return out;
}

json Orchestrator::invoke_action(const std::string& module_id, const std::string& action, ItemId item,
                                 const json& parameters, const Actor& actor) {
  const auto module = find_module(module_id);
  if (!module) throw Error(ErrorCode::invalid_argument, "unknown module " + module_id);
  const auto actions = list_context_actions(item, false);
  const bool offered = std::any_of(actions.begin(), actions.end(), [&](const ActionInfo& a) {
    return a.module == module_id && a.action == action;
  });
  if (!offered) {
    throw Error(ErrorCode::invalid_argument,
                "action " + module_id + "/" + action + " is not available for item " + std::to_string(item.value));
  }
  if (action == "rerun") {
    const auto r = rerun_with_parameters(item, module_id, parameters, actor);
    json superseded = json::array();
    for (const auto id : r.superseded_runs) superseded.push_back(id);
    return json{{"deduplicated", r.deduplicated},
                {"run", r.run},
                {"superseded_runs", superseded},
                {"hidden", ids_json(r.hidden)},
                {"produced", ids_json(r.produced)}};
  }
  const auto node = store_.node(item);
  return module->context_action(action, *node, parameters, *store_.snapshot());
}

std::vector<RunRecord> Orchestrator::runs() const {
  std::scoped_lock lock(mutex_);
  std::vector<RunRecord> out;
  for (const auto& [_, r] : runs_) out.push_back(r);
  return out;
}

std::size_t Orchestrator::dropped_runs() const {
  std::scoped_lock lock(mutex_);
  return dropped_;
}

void Orchestrator::restore_from_log() {
  std::scoped_lock op(op_mutex_);
  std::scoped_lock lock(mutex_);
  runs_.clear();
  run_keys_.clear();
  jobs_.clear();
  item_job_.clear();
  pending_.clear();
  dropped_ = 0;
  next_run_ = 1;
  next_job_ = 1;
  store_.log().for_each([&](const ProvenanceEntry& e) {
    const auto& p = e.payload;
    if (e.mutation == Mutation::ingest) {
      IngestJob job;
      job.id = p.at("job").get<std::uint64_t>();
      job.object = ObjectRef::from_json(p.at("object"));
      job.media_type = p.at("media_type").get<std::string>();
      job.actor = e.actor;
      job.document = ItemId{p.at("document").get<std::uint64_t>()};
      job.status = JobStatus::done;
      job.produced.push_back(job.document);
      item_job_[job.document.value] = job.id;
      next_job_ = std::max(next_job_, job.id + 1);
      jobs_[job.id] = std::move(job);
      return;
    }
    if (e.mutation != Mutation::module_run) return;
    const auto status = p.at("status").get<std::string>();
    if (status == "dropped") {
      ++dropped_;
      return;
    }
    const auto id = p.at("run").get<std::uint64_t>();
    if (status == "started") {
      RunRecord run;
      run.id = id;
      run.module = p.at("module").get<std::string>();
      run.trigger = ItemId{p.at("trigger").get<std::uint64_t>()};
      run.parameters = p.at("parameters");
      run.digest = p.at("digest").get<std::string>();
      run.cascade_depth = p.at("cascade_depth").get<std::uint32_t>();
      run.job = p.at("job").get<std::uint64_t>();
      run.status = RunStatus::failed;  // until a completion entry shows up
      run.error = "interrupted";
      runs_[id] = std::move(run);
      next_run_ = std::max(next_run_, id + 1);
      return;
    }
    auto it = runs_.find(id);
    if (it == runs_.end()) return;
    auto& run = it->second;
    if (status == "completed" || status == "failed") {
      run.status = status == "completed" ? RunStatus::completed : RunStatus::failed;
      run.error = status == "failed" ? p.value("error", std::string{}) : std::string{};
      run.produced.clear();
      for (const auto& v : p.at("produced")) run.produced.push_back(ItemId{v.get<std::uint64_t>()});
    } else if (status == "superseded") {
      run.status = RunStatus::superseded;
    }
  });
  for (const auto& [id, run] : runs_) {
    if (run.status != RunStatus::superseded) run_keys_.insert(run_key(run.module, run.trigger, run.digest));
    for (const auto item : run.produced) item_job_.try_emplace(item.value, run.job);
    if (auto j = jobs_.find(run.job); j != jobs_.end()) {
      j->second.produced.insert(j->second.produced.end(), run.produced.begin(), run.produced.end());
      if (run.status == RunStatus::failed) j->second.status = JobStatus::failed;
    }
  }
  for (auto& [_, job] : jobs_) {
    std::sort(job.produced.begin(), job.produced.end());
    job.produced.erase(std::unique(job.produced.begin(), job.produced.end()), job.produced.end());
  }
}

}  // namespace casegraph
