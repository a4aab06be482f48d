#pragma once

// HTTP/JSON facade. `handle` is the whole service minus the socket: tests
// drive it directly, `serve` binds it to httplib.

#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "casegraph/engine.hpp"

namespace casegraph::api {

struct Request {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::map<std::string, std::string> headers;  // lower-case names
  std::string body;
};

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;

  nlohmann::json json() const { return nlohmann::json::parse(body); }
};

int http_status(ErrorCode code);

class Service {
 public:
  explicit Service(Engine& engine);

  Response handle(const Request& request);

  // Blocks until stop() is called. Throws Error(invalid_argument) when the
  // address cannot be bound.
  void serve(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  Engine& engine_;
  std::shared_ptr<Impl> impl_;
};

}  // namespace casegraph::api
