#include <chrono>
#include <cstdlib>
#include <thread>

#include "cogstat/errors.hpp"
#include "cogstat/llm_protocol.hpp"
#include "doctest.h"
#include "httplib.h"

using namespace cogstat;
using namespace cogstat::protocol;

namespace {

class LocalServer {
 public:
  LocalServer() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Server& server() { return server_; }
  std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

ChatRequest request(double timeout = 5.0) {
  ChatRequest r;
  r.model = "local-model";
  r.messages = {{"user", "pick one"}};
  r.temperature = 0.5;
  r.timeout_seconds = timeout;
  return r;
}

}  // namespace

TEST_CASE("HttpTransport round trip") {
  LocalServer local;
  std::string auth;
  nlohmann::json body;
  local.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    auth = req.get_header_value("Authorization");
    body = nlohmann::json::parse(req.body);
    res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"I pick The Horse Growls"}}]})",
                    "application/json");
  });
  local.server().Post("/fail", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  local.server().Post("/garbage", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("not json", "text/plain");
  });
  local.server().Post("/slow", [](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(1500));
    res.set_content("{}", "application/json");
  });

  ::setenv("COGSTAT_TEST_TOKEN", "secret", 1);
  HttpTransport t(local.url("/v1/chat/completions"), "COGSTAT_TEST_TOKEN");
  CHECK(t.complete(request()) == "I pick The Horse Growls");
  CHECK(auth == "Bearer secret");
  CHECK(body["model"] == "local-model");
  CHECK(body["temperature"] == 0.5);
  CHECK(body["messages"][0]["content"] == "pick one");
  CHECK_FALSE(body.contains("measurement"));

  HttpTransport anonymous(local.url("/v1/chat/completions"), "COGSTAT_TEST_TOKEN_UNSET");
  CHECK(anonymous.complete(request()) == "I pick The Horse Growls");
  CHECK(auth.empty());

  CHECK_THROWS_AS(HttpTransport(local.url("/fail"), "X").complete(request()), TransportError);
  CHECK_THROWS_AS(HttpTransport(local.url("/garbage"), "X").complete(request()), TransportError);
  CHECK_THROWS_AS(HttpTransport(local.url("/slow"), "X").complete(request(0.3)), TransportError);
}

TEST_CASE("HttpTransport connection failures and bad endpoints") {
  int port = 0;
  {
    LocalServer gone;
    port = std::stoi(gone.url("").substr(std::string("http://127.0.0.1:").size()));
  }
  HttpTransport t("http://127.0.0.1:" + std::to_string(port) + "/x", "X");
  CHECK_THROWS_AS(t.complete(request(1.0)), TransportError);
  CHECK_THROWS_AS(HttpTransport("ftp://example.com/x", "X"), ConfigError);
  CHECK_THROWS_AS(HttpTransport("not a url", "X"), ConfigError);
}
