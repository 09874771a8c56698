#include <cstdlib>
#include <regex>

#include "cogstat/errors.hpp"
#include "cogstat/llm_protocol.hpp"
#include "httplib.h"

namespace cogstat::protocol {

namespace {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Url split_url(const std::string& endpoint) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)", std::regex::icase);
  std::smatch m;
  if (!std::regex_match(endpoint, m, re)) throw ConfigError("endpoint is not an http(s) URL: " + endpoint);
  return {m[1].str(), m[2].matched ? m[2].str() : "/"};
}

}  // namespace

HttpTransport::HttpTransport(std::string endpoint, std::string auth_env)
    : endpoint_(std::move(endpoint)), auth_env_(std::move(auth_env)) {
  split_url(endpoint_);
}

std::string HttpTransport::complete(const ChatRequest& request) {
  const Url url = split_url(endpoint_);
  httplib::Client client(url.origin);
  const auto secs = static_cast<time_t>(request.timeout_seconds);
  const auto usecs = static_cast<time_t>((request.timeout_seconds - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers headers;
  if (const char* key = std::getenv(auth_env_.c_str()); key != nullptr && *key != '\0') {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  auto res = client.Post(url.path, headers, request_body(request).dump(), "application/json");
  if (!res) throw TransportError("POST " + endpoint_ + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw TransportError("POST " + endpoint_ + " returned HTTP " + std::to_string(res->status));
  }
  nlohmann::json body;
  try {
    body = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error&) {
    throw TransportError("response body is not JSON");
  }
  return response_content(body);
}

}  // namespace cogstat::protocol
