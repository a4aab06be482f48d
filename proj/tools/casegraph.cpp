// casegraph: command-line front end. Every subcommand except verify/replay
// opens the engine on the configured data directory.

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <unordered_map>
#include <iostream>

#include "casegraph/api.hpp"
#include "casegraph/engine.hpp"
#include "casegraph/error.hpp"
#include "casegraph/report.hpp"

using namespace casegraph;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::string data_dir;
};

EngineConfig load_config(const Common& c) {
  auto cfg = c.config.empty() ? EngineConfig{} : EngineConfig::load(c.config);
  if (!c.data_dir.empty()) cfg.data_dir = c.data_dir;
  return cfg;
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::storage_failure, "cannot write " + path);
  out << text;
}

std::vector<ItemId> parse_ids(const std::vector<std::uint64_t>& raw) {
  std::vector<ItemId> ids;
  for (const auto v : raw) ids.push_back(ItemId{v});
  return ids;
}

std::string guess_media_type(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  static const std::map<std::string, std::string> known{
      {".txt", "text/plain"}, {".md", "text/markdown"}, {".eml", "text/plain"},  {".wav", "audio/wav"},
      {".mp3", "audio/mpeg"}, {".audio", "audio/x-mock"}, {".mock", "audio/x-mock"}, {".png", "image/png"}, {".jpg", "image/jpeg"},
      {".jpeg", "image/jpeg"}, {".image", "image/x-mock"}};
  const auto it = known.find(ext);
  if (it == known.end()) {
    throw Error(ErrorCode::invalid_argument, "cannot guess the media type of " + path.string() + "; pass --media-type");
  }
  return it->second;
}

// Graph file for standalone layout: {nodes: [{id} | id], edges: [{from, to} | {source, target} | [a, b]]}.
// Output of `replay --full` has this shape; hidden items are skipped.
std::pair<std::vector<ItemId>, std::vector<layout::Edge>> read_graph(const std::string& path) {
  const auto j = json::parse(read_file(path));
  std::vector<ItemId> nodes;
  std::unordered_map<std::uint64_t, std::uint32_t> index;
  for (const auto& n : j.at("nodes")) {
    if (n.is_object() && n.value("hidden", false)) continue;
    const auto id = n.is_object() ? n.at("id").get<std::uint64_t>() : n.get<std::uint64_t>();
    if (!index.emplace(id, static_cast<std::uint32_t>(nodes.size())).second) {
      throw Error(ErrorCode::invalid_argument, "duplicate node " + std::to_string(id) + " in " + path);
    }
    nodes.push_back(ItemId{id});
  }
  std::vector<layout::Edge> edges;
  const auto lookup = [&](std::uint64_t id) {
    const auto it = index.find(id);
    if (it == index.end()) throw Error(ErrorCode::invalid_argument, "edge endpoint " + std::to_string(id) + " is not a node");
    return it->second;
  };
  for (const auto& e : j.value("edges", json::array())) {
    if (e.is_array()) {
      edges.push_back({lookup(e.at(0).get<std::uint64_t>()), lookup(e.at(1).get<std::uint64_t>())});
      continue;
    }
    if (e.value("hidden", false)) continue;
    const bool named = e.contains("from");
    const auto a = e.at(named ? "from" : "source").get<std::uint64_t>();
    const auto b = e.at(named ? "to" : "target").get<std::uint64_t>();
    if (!index.contains(a) || !index.contains(b)) continue;  // endpoint hidden
    edges.push_back({index.at(a), index.at(b)});
  }
  return {nodes, edges};
}

// Gold files may carry document text; eval-ner runs the extractor on it when
// no prediction file is given.
std::vector<ner::Span> predict_from_gold_text(const std::string& contents, const ner::Gazetteer& gazetteer) {
  std::vector<ner::Span> out;
  std::istringstream in(contents);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = json::parse(line);
    if (!j.contains("text")) continue;
    const auto doc = j.at("doc").get<std::string>();
    for (const auto& m : ner::extract(j.at("text").get<std::string>(), gazetteer)) {
      out.push_back({doc, m.start, m.end, m.label});
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"casegraph: provenance-tracked investigation graph"};
  app.require_subcommand(1);
  Common common;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", common.config, "JSON configuration file");
    sub->add_option("-d,--data-dir", common.data_dir, "data directory (overrides the config)");
  };

  auto* serve = app.add_subcommand("serve", "run the HTTP API");
  add_common(serve);
  int port = 0;
  serve->add_option("-p,--port", port, "port (overrides the config)");

  auto* ingest = app.add_subcommand("ingest", "ingest a file and run the module cascade");
  add_common(ingest);
  std::string ingest_path, media_type, name, actor = "cli";
  ingest->add_option("file", ingest_path)->required()->check(CLI::ExistingFile);
  ingest->add_option("-t,--media-type", media_type, "e.g. text/plain, audio/x-mock; guessed from the extension");
  ingest->add_option("-n,--name", name, "document label");
  ingest->add_option("--actor", actor, "user actor id");

  auto* search = app.add_subcommand("search", "search labels and document text");
  add_common(search);
  std::string query_text, scope = "both";
  std::vector<std::string> modes{"exact"};
  std::size_t max_edits = 1, max_depth = 1;
  search->add_option("query", query_text)->required();
  search->add_option("-m,--modes", modes, "exact, substring, fuzzy, onto (comma separated)")->delimiter(',');
  search->add_option("--max-edits", max_edits);
  search->add_option("--depth,--max-depth", max_depth, "ontology expansion depth");
  search->add_option("--scope", scope, "labels, text or both");

  auto* layout_cmd = app.add_subcommand("layout", "compute a force-directed layout of the graph");
  add_common(layout_cmd);
  std::optional<std::uint64_t> center;
  std::uint32_t hops = 2;
  std::string layout_out, graph_path;
  std::optional<std::uint32_t> iters;
  std::optional<double> theta;
  std::optional<std::uint64_t> seed;
  layout_cmd->add_option("--graph", graph_path, "graph JSON file instead of the data directory")
      ->check(CLI::ExistingFile);
  layout_cmd->add_option("--center", center, "lay out only this node's neighborhood")->excludes("--graph");
  layout_cmd->add_option("-k,--hops", hops);
  layout_cmd->add_option("--iters", iters);
  layout_cmd->add_option("--theta", theta);
  layout_cmd->add_option("--seed", seed);
  layout_cmd->add_option("-o,--out", layout_out);

  auto* eval = app.add_subcommand("eval-ner", "score NER predictions against a gold NDJSON file");
  std::string gold_path, pred_path, gazetteer_path;
  bool eval_json = false;
  eval->add_option("-g,--gold", gold_path)->required()->check(CLI::ExistingFile);
  eval->add_option("-p,--pred", pred_path, "prediction NDJSON; default: run the extractor on gold text")
      ->check(CLI::ExistingFile);
  eval->add_option("--gazetteer", gazetteer_path)->check(CLI::ExistingFile);
  eval->add_flag("--json", eval_json);

  auto* replay_cmd = app.add_subcommand("replay", "fold a provenance log into graph state");
  std::string replay_log;
  std::optional<std::uint64_t> up_to;
  bool replay_full = false;
  replay_cmd->add_option("log", replay_log)->required()->check(CLI::ExistingFile);
  replay_cmd->add_option("--up-to", up_to, "stop after this seq");
  replay_cmd->add_flag("--full", replay_full, "print the whole state instead of a summary");

  auto* verify = app.add_subcommand("verify", "verify a provenance log or an exported report bundle");
  std::string verify_path;
  bool verify_report = false;
  verify->add_option("file", verify_path)->required()->check(CLI::ExistingFile);
  verify->add_flag("--report", verify_report, "the file is a JSON report bundle");

  auto* export_cmd = app.add_subcommand("export-report", "export a self-contained report bundle");
  add_common(export_cmd);
  std::vector<std::uint64_t> report_ids;
  std::string title = "Case report", format = "json", report_out;
  bool include_hidden = false;
  export_cmd->add_option("ids", report_ids)->required();
  export_cmd->add_option("--title", title);
  export_cmd->add_option("-f,--format", format)->check(CLI::IsMember({"json", "html"}));
  export_cmd->add_flag("--include-hidden", include_hidden);
  export_cmd->add_option("-o,--out", report_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) {
      auto cfg = load_config(common);
      if (port != 0) cfg.port = port;
      Engine engine(cfg);
      api::Service service(engine);
      std::cerr << "listening on " << cfg.host << ":" << cfg.port << " (log head "
                << engine.log().head_hash().substr(0, 12) << ")\n";
      service.serve(cfg.host, cfg.port);
    } else if (*ingest) {
      Engine engine(load_config(common));
      if (media_type.empty()) media_type = guess_media_type(ingest_path);
      const auto job = engine.orchestrator().ingest(read_file(ingest_path), media_type, Actor::user(actor),
                                                    name.empty() ? std::filesystem::path(ingest_path).filename().string()
                                                                 : name);
      std::cout << job.to_json().dump(2) << '\n';
    } else if (*search) {
      Engine engine(load_config(common));
      search::SearchQuery q;
      q.text = query_text;
      q.modes.clear();
      for (const auto& m : modes) q.modes.insert(search::parse_mode(m));
      q.fuzzy_max_edits = max_edits;
      q.ontology_max_depth = max_depth;
      q.scope = search::parse_scope(scope);
      json hits = json::array();
      for (const auto& h : engine.search().search(q, Actor::user("cli"))) hits.push_back(h.to_json());
      std::cout << hits.dump(2) << '\n';
    } else if (*layout_cmd) {
      auto params = load_config(common).layout;
      if (iters) params.iterations = *iters;
      if (theta) params.theta = *theta;
      if (seed) params.seed = *seed;
      params.validate();
      if (!graph_path.empty()) {
        const auto [nodes, edges] = read_graph(graph_path);
        if (nodes.empty()) throw Error(ErrorCode::invalid_argument, "nothing to lay out");
        write_output(layout_out, layout::run(nodes, edges, params).to_json().dump(2));
        return 0;
      }
      Engine engine(load_config(common));
      const auto view = center ? engine.store().neighborhood(ItemId{*center}, hops, {})
                               : engine.store().apply_filter({});
      if (view.nodes.empty()) throw Error(ErrorCode::invalid_argument, "nothing to lay out");
      const auto state = engine.store().read(
          [&](const GraphState& s) { return layout::layout_view(s, view, params); });
      write_output(layout_out, state.to_json().dump(2));
    } else if (*eval) {
      const auto gold_text = read_file(gold_path);
      const auto gold = ner::import_annotations(gold_text);
      std::vector<ner::Span> predicted;
      if (!pred_path.empty()) {
        predicted = ner::read_spans(read_file(pred_path));
      } else {
        const auto gaz = gazetteer_path.empty() ? ner::sample_gazetteer()
                                                : ner::Gazetteer::from_json(json::parse(read_file(gazetteer_path)));
        predicted = predict_from_gold_text(gold_text, gaz);
      }
      const auto report = ner::evaluate(predicted, gold);
      std::cout << (eval_json ? report.to_json().dump(2) + "\n" : report.table());
    } else if (*replay_cmd) {
      const auto entries = ProvenanceLog::read_file(replay_log);
      const auto status = verify_chain(entries);
      if (!status.ok) {
        std::cerr << "broken chain at seq " << status.broken_seq << ": " << status.reason << '\n';
        return 2;
      }
      const auto state = replay(entries, up_to);
      if (replay_full) {
        std::cout << state.to_json().dump(2) << '\n';
      } else {
        std::size_t hidden = 0;
        for (const auto& n : state.nodes()) hidden += n.hidden;
        for (const auto& e : state.edges()) hidden += e.hidden;
        std::cout << json{{"entries", state.applied_entries()},
                          {"nodes", state.nodes().size()},
                          {"edges", state.edges().size()},
                          {"hidden", hidden},
                          {"fingerprint", state.fingerprint()}}
                         .dump(2)
                  << '\n';
      }
    } else if (*verify) {
      if (verify_report) {
        const auto problems = report::verify(json::parse(read_file(verify_path)));
        for (const auto& p : problems) std::cerr << "problem: " << p << '\n';
        if (!problems.empty()) return 2;
        std::cout << "report ok\n";
      } else {
        const auto status = verify_log_text(read_file(verify_path));
        if (!status.ok) {
          std::cerr << "broken chain at seq " << status.broken_seq << ": " << status.reason << '\n';
          return 2;
        }
        std::cout << "chain ok\n";
      }
    } else if (*export_cmd) {
      Engine engine(load_config(common));
      const auto bundle =
          report::build(engine.store(), {title, parse_ids(report_ids), include_hidden}, engine.clock());
      write_output(report_out, format == "html" ? report::render_html(bundle) : bundle.dump(2));
    }
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
