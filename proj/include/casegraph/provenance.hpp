#pragma once

// Write-once, read-many archive of every graph mutation and user action.
//
// Each entry is hashed with SHA-256 over its canonical JSON form (sorted
// keys, no insignificant whitespace) including the previous entry's hash, so
// any modification, removal or reordering breaks the chain at a known seq.
// On disk the log is newline-delimited JSON: one header line naming the
// digest algorithm, then one entry per line.

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "casegraph/clock.hpp"
#include "casegraph/schema.hpp"

namespace casegraph {

enum class Mutation {
  create_node,
  update_node,
  create_edge,
  update_edge,
  hide,
  review,
  annotate,
  ontology_edit,
  ingest,
  module_run,
  clamp_grade,
  search_executed,
};

std::string_view to_string(Mutation m);
Mutation mutation_from_string(std::string_view name);

inline const std::string kGenesisHash(64, '0');

struct ProvenanceEntry {
  std::uint64_t seq = 0;
  std::string timestamp;
  Actor actor;
  Mutation mutation = Mutation::create_node;
  nlohmann::json payload;
  std::string prev_hash;
  std::string entry_hash;

  // Canonical serialization of everything the hash covers.
  std::string canonical_body() const;
  std::string compute_hash() const;
  // One NDJSON line (without the newline).
  std::string to_line() const;
  nlohmann::json to_json() const;
  static ProvenanceEntry from_json(const nlohmann::json& j);
};

struct ChainStatus {
  bool ok = true;
  std::uint64_t broken_seq = 0;  // meaningful only when !ok
  std::string reason;
};

// Recomputes every hash and checks that seqs are gapless from 0.
ChainStatus verify_chain(std::span<const ProvenanceEntry> entries);

// Verifies raw file contents (header plus entry lines). A line that fails to
// parse, or that is not in canonical form, breaks the chain at its position.
ChainStatus verify_log_text(std::string_view contents);

class LogSink {
 public:
  virtual ~LogSink() = default;
  // Must not return before the line is durable; throws on failure.
  virtual void write_line(const std::string& line) = 0;
};

class FileSink : public LogSink {
 public:
  // Writes the header when the file is new or empty.
  explicit FileSink(std::filesystem::path path, bool fsync_each = false);
  ~FileSink() override;
  FileSink(const FileSink&) = delete;
  FileSink& operator=(const FileSink&) = delete;

  void write_line(const std::string& line) override;

 private:
  std::filesystem::path path_;
  int fd_ = -1;
  bool fsync_each_;
};

std::string log_header_line();

class ProvenanceLog {
 public:
  explicit ProvenanceLog(Clock clock = {}, std::unique_ptr<LogSink> sink = nullptr);

  // Loads and verifies an existing log file; throws Error(broken_chain) naming
  // the first broken seq. New entries are appended to the same file.
  static std::unique_ptr<ProvenanceLog> open_file(const std::filesystem::path& path, Clock clock = {},
                                                  bool fsync_each = false);
  static std::vector<ProvenanceEntry> read_file(const std::filesystem::path& path);

  // Seals and persists an entry. If the sink throws, nothing is recorded.
  ProvenanceEntry append(const Actor& actor, Mutation mutation, nlohmann::json payload);

  std::size_t size() const;
  std::string head_hash() const;
  std::optional<ProvenanceEntry> at(std::uint64_t seq) const;
  std::vector<ProvenanceEntry> snapshot() const;
  std::vector<ProvenanceEntry> range(std::uint64_t from, std::uint64_t to) const;
  // Calls `fn` on each entry in seq order under the log lock.
  void for_each(const std::function<void(const ProvenanceEntry&)>& fn) const;

  const Clock& clock() const noexcept { return clock_; }

 private:
  mutable std::mutex mutex_;
  Clock clock_;
  std::unique_ptr<LogSink> sink_;
  std::deque<ProvenanceEntry> entries_;
};

// Entries that touch any id in `ids` (payload "id" or "document") or any run
// in `runs` (module_run entries), in seq order.
std::vector<ProvenanceEntry> select_entries(const ProvenanceLog& log,
                                            const std::vector<std::uint64_t>& ids,
                                            const std::vector<std::uint64_t>& runs);

}  // namespace casegraph
