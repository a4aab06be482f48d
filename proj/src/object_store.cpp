#include "casegraph/object_store.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

#include "casegraph/digest.hpp"
#include "casegraph/error.hpp"

namespace casegraph {

namespace fs = std::filesystem;

nlohmann::json ObjectRef::to_json() const {
  return {{"digest", digest}, {"media_type", media_type}, {"length", length}, {"storage_path", storage_path}};
}

ObjectRef ObjectRef::from_json(const nlohmann::json& j) {
  return {j.at("digest").get<std::string>(), j.at("media_type").get<std::string>(),
          j.at("length").get<std::uint64_t>(), j.at("storage_path").get<std::string>()};
}

ObjectStore::ObjectStore(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) throw Error(ErrorCode::storage_failure, "cannot create object store at " + root_.string());
}

std::string ObjectStore::relative_path(std::string_view digest) {
  if (digest.size() != 64) throw Error(ErrorCode::invalid_argument, "malformed digest");
  return std::string(digest.substr(0, 2)) + "/" + std::string(digest.substr(2, 2)) + "/" + std::string(digest);
}

fs::path ObjectStore::path_for(std::string_view digest) const { return root_ / relative_path(digest); }

bool ObjectStore::contains(std::string_view digest) const {
  std::error_code ec;
  return fs::exists(path_for(digest), ec);
}

ObjectRef ObjectStore::put(std::string_view bytes, std::string media_type) {
  const auto digest = sha256_hex(bytes);
  ObjectRef ref{digest, std::move(media_type), bytes.size(), relative_path(digest)};
  const auto target = path_for(digest);
  if (fs::exists(target)) return ref;
  std::error_code ec;
  fs::create_directories(target.parent_path(), ec);
  if (ec) throw Error(ErrorCode::storage_failure, "cannot create " + target.parent_path().string());
  auto tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::storage_failure, "cannot write " + tmp.string());
  }
  fs::rename(tmp, target, ec);
  if (ec) throw Error(ErrorCode::storage_failure, "cannot move object into place: " + ec.message());
  return ref;
}

std::string ObjectStore::get(std::string_view digest) const {
  const auto path = path_for(digest);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::storage_failure, "object " + std::string(digest) + " not found");
  std::stringstream ss;
  ss << in.rdbuf();
  auto bytes = ss.str();
  if (sha256_hex(bytes) != digest) {
    throw Error(ErrorCode::storage_failure, "object " + std::string(digest) + " failed digest verification");
  }
  return bytes;
}

}  // namespace casegraph
