#include "casegraph/provenance.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "casegraph/digest.hpp"
#include "casegraph/error.hpp"

namespace casegraph {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<Mutation, std::string_view>, 12> kMutationNames{{
    {Mutation::create_node, "create_node"},
    {Mutation::update_node, "update_node"},
    {Mutation::create_edge, "create_edge"},
    {Mutation::update_edge, "update_edge"},
    {Mutation::hide, "hide"},
    {Mutation::review, "review"},
    {Mutation::annotate, "annotate"},
    {Mutation::ontology_edit, "ontology_edit"},
    {Mutation::ingest, "ingest"},
    {Mutation::module_run, "module_run"},
    {Mutation::clamp_grade, "clamp_grade"},
    {Mutation::search_executed, "search_executed"},
}};

json header_json() {
  return json{{"format", "casegraph-provenance"}, {"version", 1}, {"digest", "sha256"}};
}

}  // namespace

std::string_view to_string(Mutation m) {
  for (const auto& [k, name] : kMutationNames) {
    if (k == m) return name;
  }
  return "unknown";
}

Mutation mutation_from_string(std::string_view name) {
  for (const auto& [k, n] : kMutationNames) {
    if (n == name) return k;
  }
  throw Error(ErrorCode::parse_error, "unknown mutation kind '" + std::string(name) + "'");
}

std::string log_header_line() { return header_json().dump(); }

// -- entries ----------------------------------------------------------------

std::string ProvenanceEntry::canonical_body() const {
  // nlohmann::json objects keep keys sorted, and dump() without indent emits
  // no insignificant whitespace.
  const json body{{"seq", seq},
                  {"timestamp", timestamp},
                  {"actor", casegraph::to_json(actor)},
                  {"mutation", std::string(casegraph::to_string(mutation))},
                  {"payload", payload},
                  {"prev_hash", prev_hash}};
  return body.dump();
}

std::string ProvenanceEntry::compute_hash() const { return sha256_hex(canonical_body()); }

json ProvenanceEntry::to_json() const {
  return json{{"seq", seq},
              {"timestamp", timestamp},
              {"actor", casegraph::to_json(actor)},
              {"mutation", std::string(casegraph::to_string(mutation))},
              {"payload", payload},
              {"prev_hash", prev_hash},
              {"entry_hash", entry_hash}};
}

std::string ProvenanceEntry::to_line() const { return to_json().dump(); }

ProvenanceEntry ProvenanceEntry::from_json(const json& j) {
  if (!j.is_object() || j.size() != 7) {
    throw Error(ErrorCode::parse_error, "provenance entry must be an object with 7 fields");
  }
  ProvenanceEntry e;
  e.seq = j.at("seq").get<std::uint64_t>();
  e.timestamp = j.at("timestamp").get<std::string>();
  e.actor = actor_from_json(j.at("actor"));
  e.mutation = mutation_from_string(j.at("mutation").get<std::string>());
  e.payload = j.at("payload");
  e.prev_hash = j.at("prev_hash").get<std::string>();
  e.entry_hash = j.at("entry_hash").get<std::string>();
  return e;
}

ChainStatus verify_chain(std::span<const ProvenanceEntry> entries) {
  std::string expected_prev = kGenesisHash;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    const auto at = static_cast<std::uint64_t>(i);
    if (e.seq != at) return {false, at, "sequence gap: expected " + std::to_string(at)};
    if (e.prev_hash != expected_prev) return {false, at, "prev_hash does not match predecessor"};
    if (e.compute_hash() != e.entry_hash) return {false, at, "entry_hash mismatch"};
    expected_prev = e.entry_hash;
  }
  return {};
}

ChainStatus verify_log_text(std::string_view contents) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < contents.size()) {
    auto nl = contents.find('\n', start);
    if (nl == std::string_view::npos) nl = contents.size();
    lines.push_back(contents.substr(start, nl - start));
    start = nl + 1;
  }
  if (lines.empty()) return {};
  if (lines.front() != log_header_line()) return {false, 0, "missing or altered log header"};

  std::string expected_prev = kGenesisHash;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto at = static_cast<std::uint64_t>(i - 1);
    ProvenanceEntry e;
    try {
      e = ProvenanceEntry::from_json(json::parse(lines[i]));
    } catch (const std::exception& ex) {
      return {false, at, std::string("unparseable entry: ") + ex.what()};
    }
    if (e.to_line() != lines[i]) return {false, at, "entry is not in canonical form"};
    if (e.seq != at) return {false, at, "sequence gap: expected " + std::to_string(at)};
    if (e.prev_hash != expected_prev) return {false, at, "prev_hash does not match predecessor"};
    if (e.compute_hash() != e.entry_hash) return {false, at, "entry_hash mismatch"};
    expected_prev = e.entry_hash;
  }
  return {};
}

// -- sinks ------------------------------------------------------------------

FileSink::FileSink(std::filesystem::path path, bool fsync_each)
    : path_(std::move(path)), fsync_each_(fsync_each) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) {
    throw Error(ErrorCode::storage_failure,
                "cannot open provenance log " + path_.string() + ": " + std::strerror(errno));
  }
  if (std::filesystem::file_size(path_) == 0) write_line(log_header_line());
}

FileSink::~FileSink() {
  if (fd_ >= 0) ::close(fd_);
}

void FileSink::write_line(const std::string& line) {
  std::string buf = line;
  buf.push_back('\n');
  std::size_t written = 0;
  while (written < buf.size()) {
    const auto n = ::write(fd_, buf.data() + written, buf.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::storage_failure,
                  "provenance write failed: " + std::string(std::strerror(errno)));
    }
    written += static_cast<std::size_t>(n);
  }
  if (fsync_each_ && ::fsync(fd_) != 0) {
    throw Error(ErrorCode::storage_failure, "provenance fsync failed");
  }
}

// -- log --------------------------------------------------------------------

ProvenanceLog::ProvenanceLog(Clock clock, std::unique_ptr<LogSink> sink)
    : clock_(clock), sink_(std::move(sink)) {}

std::vector<ProvenanceEntry> ProvenanceLog::read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::storage_failure, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const auto contents = ss.str();
  if (const auto status = verify_log_text(contents); !status.ok) {
    throw Error(ErrorCode::broken_chain, "provenance chain broken at seq " +
                                             std::to_string(status.broken_seq) + ": " + status.reason);
  }
  std::vector<ProvenanceEntry> entries;
  std::istringstream lines(contents);
  std::string line;
  std::getline(lines, line);  // header
  while (std::getline(lines, line)) {
    if (!line.empty()) entries.push_back(ProvenanceEntry::from_json(json::parse(line)));
  }
  return entries;
}

std::unique_ptr<ProvenanceLog> ProvenanceLog::open_file(const std::filesystem::path& path,
                                                        Clock clock, bool fsync_each) {
  std::vector<ProvenanceEntry> existing;
  if (std::filesystem::exists(path) && std::filesystem::file_size(path) > 0) {
    existing = read_file(path);
  }
  auto log = std::make_unique<ProvenanceLog>(clock, std::make_unique<FileSink>(path, fsync_each));
  log->entries_.assign(existing.begin(), existing.end());
  return log;
}

ProvenanceEntry ProvenanceLog::append(const Actor& actor, Mutation mutation, json payload) {
  std::scoped_lock lock(mutex_);
  ProvenanceEntry e;
  e.seq = entries_.size();
  e.timestamp = clock_.now_rfc3339();
  e.actor = actor;
  e.mutation = mutation;
  e.payload = std::move(payload);
  e.prev_hash = entries_.empty() ? kGenesisHash : entries_.back().entry_hash;
  e.entry_hash = e.compute_hash();
  if (sink_) sink_->write_line(e.to_line());
  entries_.push_back(e);
  return e;
}

std::size_t ProvenanceLog::size() const {
  std::scoped_lock lock(mutex_);
  return entries_.size();
}

std::string ProvenanceLog::head_hash() const {
  std::scoped_lock lock(mutex_);
  return entries_.empty() ? kGenesisHash : entries_.back().entry_hash;
}

std::optional<ProvenanceEntry> ProvenanceLog::at(std::uint64_t seq) const {
  std::scoped_lock lock(mutex_);
  if (seq >= entries_.size()) return std::nullopt;
  return entries_[seq];
}

std::vector<ProvenanceEntry> ProvenanceLog::snapshot() const {
  std::scoped_lock lock(mutex_);
  return {entries_.begin(), entries_.end()};
}

std::vector<ProvenanceEntry> ProvenanceLog::range(std::uint64_t from, std::uint64_t to) const {
  std::scoped_lock lock(mutex_);
  to = std::min<std::uint64_t>(to, entries_.size());
  if (from >= to) return {};
  return {entries_.begin() + static_cast<std::ptrdiff_t>(from),
          entries_.begin() + static_cast<std::ptrdiff_t>(to)};
}

void ProvenanceLog::for_each(const std::function<void(const ProvenanceEntry&)>& fn) const {
  std::scoped_lock lock(mutex_);
  for (const auto& e : entries_) fn(e);
}

std::vector<ProvenanceEntry> select_entries(const ProvenanceLog& log,
                                            const std::vector<std::uint64_t>& ids,
                                            const std::vector<std::uint64_t>& runs) {
  const std::unordered_set<std::uint64_t> id_set(ids.begin(), ids.end());
  const std::unordered_set<std::uint64_t> run_set(runs.begin(), runs.end());
  const auto hit = [](const json& payload, const char* key, const auto& set) {
    const auto it = payload.find(key);
    return it != payload.end() && it->is_number_integer() && set.contains(it->template get<std::uint64_t>());
  };
  std::vector<ProvenanceEntry> out;
  log.for_each([&](const ProvenanceEntry& e) {
    if (!e.payload.is_object()) return;
    const bool touches = hit(e.payload, "id", id_set) || hit(e.payload, "document", id_set) ||
                         (e.mutation == Mutation::module_run && hit(e.payload, "run", run_set));
    if (touches) out.push_back(e);
  });
  return out;
}

}  // namespace casegraph
