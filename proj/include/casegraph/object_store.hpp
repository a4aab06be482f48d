#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

namespace casegraph {

struct ObjectRef {
  std::string digest;  // SHA-256, lowercase hex
  std::string media_type;
  std::uint64_t length = 0;
  std::string storage_path;  // relative to the store root

  nlohmann::json to_json() const;
  static ObjectRef from_json(const nlohmann::json& j);
  friend bool operator==(const ObjectRef&, const ObjectRef&) = default;
};

// Content-addressed blob directory: <root>/<d0d1>/<d2d3>/<digest>.
class ObjectStore {
 public:
  explicit ObjectStore(std::filesystem::path root);

  ObjectRef put(std::string_view bytes, std::string media_type);
  // Reads and re-hashes; throws Error(storage_failure) on a digest mismatch.
  std::string get(std::string_view digest) const;
  bool contains(std::string_view digest) const;
  std::filesystem::path path_for(std::string_view digest) const;
  static std::string relative_path(std::string_view digest);

  const std::filesystem::path& root() const noexcept { return root_; }

 private:
  std::filesystem::path root_;
};

}  // namespace casegraph
