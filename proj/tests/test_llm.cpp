#include "doctest.h"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "topoxpert/error.hpp"
#include "topoxpert/llm.hpp"

using namespace topoxpert;

namespace {

CompletionRequest simple_request(const std::string& text) {
  CompletionRequest req;
  req.model = "test-model";
  req.messages = {{"system", "sys"}, {"user", text}};
  return req;
}

struct StubServer {
  httplib::Server svr;
  int port = 0;
  std::thread thread;

  explicit StubServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    svr.Post("/v1/chat/completions", std::move(handler));
    port = svr.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { svr.listen_after_bind(); });
    svr.wait_until_ready();
  }

  ~StubServer() {
    svr.stop();
    thread.join();
  }

  HttpClientConfig config() const {
    HttpClientConfig cfg;
    cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    cfg.api_key = "test-key";
    cfg.model = "test-model";
    cfg.backoff_base_ms = 1;
    cfg.backoff_cap_ms = 5;
    return cfg;
  }
};

std::string completion_body(const std::string& content) {
  nlohmann::json j;
  j["choices"] = {{{"message", {{"role", "assistant"}, {"content", content}}}}};
  return j.dump();
}

}  // namespace

TEST_CASE("scripted client pops responses in order and then exhausts") {
  ScriptedClient client({"one", "two"});
  auto r1 = client.complete(simple_request("a"));
  auto r2 = client.complete(simple_request("b"));
  auto r3 = client.complete(simple_request("c"));
  CHECK(std::get<std::string>(r1) == "one");
  CHECK(std::get<std::string>(r2) == "two");
  REQUIRE(std::holds_alternative<ClientError>(r3));
  CHECK(std::get<ClientError>(r3).kind == ClientErrorKind::ScriptExhausted);
}

TEST_CASE("missing api key fails before any network traffic") {
  HttpClientConfig cfg;
  cfg.base_url = "http://127.0.0.1:1";  // nothing listens here
  HttpChatClient client(cfg);
  auto r = client.complete(simple_request("x"));
  REQUIRE(std::holds_alternative<ClientError>(r));
  CHECK(std::get<ClientError>(r).kind == ClientErrorKind::AuthFailed);
}

TEST_CASE("http client retries 429 and 5xx then succeeds") {
  std::atomic<int> calls{0};
  StubServer server([&](const httplib::Request& req, httplib::Response& res) {
    auto body = nlohmann::json::parse(req.body);
    CHECK(body["model"] == "test-model");
    CHECK(req.get_header_value("Authorization") == "Bearer test-key");
    int n = ++calls;
    if (n == 1) {
      res.status = 429;
    } else if (n == 2) {
      res.status = 503;
    } else {
      res.set_content(completion_body("hello"), "application/json");
    }
  });
  HttpChatClient client(server.config());
  auto r = client.complete(simple_request("x"));
  REQUIRE(std::holds_alternative<std::string>(r));
  CHECK(std::get<std::string>(r) == "hello");
  CHECK(calls == 3);
}

TEST_CASE("http client gives up after max attempts") {
  std::atomic<int> calls{0};
  StubServer server([&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 429;
  });
  auto cfg = server.config();
  cfg.max_attempts = 3;
  HttpChatClient client(cfg);
  auto r = client.complete(simple_request("x"));
  REQUIRE(std::holds_alternative<ClientError>(r));
  CHECK(std::get<ClientError>(r).kind == ClientErrorKind::RateLimited);
  CHECK(calls == 3);
}

TEST_CASE("auth and schema failures do not retry") {
  std::atomic<int> calls{0};
  StubServer server([&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 401;
  });
  HttpChatClient client(server.config());
  auto r = client.complete(simple_request("x"));
  REQUIRE(std::holds_alternative<ClientError>(r));
  CHECK(std::get<ClientError>(r).kind == ClientErrorKind::AuthFailed);
  CHECK(calls == 1);

  std::atomic<int> calls2{0};
  StubServer bad([&](const httplib::Request&, httplib::Response& res) {
    ++calls2;
    res.set_content("{\"unexpected\": true}", "application/json");
  });
  HttpChatClient client2(bad.config());
  auto r2 = client2.complete(simple_request("x"));
  REQUIRE(std::holds_alternative<ClientError>(r2));
  CHECK(std::get<ClientError>(r2).kind == ClientErrorKind::BadResponse);
  CHECK(calls2 == 1);
}

TEST_CASE("request key ignores trailing whitespace, not content") {
  CompletionRequest a = simple_request("design an amplifier\nwith two stages");
  CompletionRequest b = simple_request("design an amplifier   \nwith two stages\t");
  CompletionRequest c = simple_request("design an amplifier\nwith three stages");
  CHECK(request_key(a) == request_key(b));
  CHECK(request_key(a) != request_key(c));

  CompletionRequest d = a;
  d.model = "other-model";
  CHECK(request_key(a) != request_key(d));
}

TEST_CASE("record then replay round trips through the cassette") {
  std::string path = "cassette_test.jsonl";
  std::remove(path.c_str());
  {
    ScriptedClient inner({"recorded answer"});
    RecordReplayClient rec(&inner, path, CassetteMode::Record);
    auto r = rec.complete(simple_request("q"));
    CHECK(std::get<std::string>(r) == "recorded answer");
  }
  {
    RecordReplayClient rep(nullptr, path, CassetteMode::Replay);
    auto hit = rep.complete(simple_request("q"));
    CHECK(std::get<std::string>(hit) == "recorded answer");
    auto miss = rep.complete(simple_request("unseen"));
    REQUIRE(std::holds_alternative<ClientError>(miss));
    CHECK(std::get<ClientError>(miss).kind == ClientErrorKind::CassetteMiss);
  }
  // cassette lines carry the key hash and a digest
  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  auto j = nlohmann::json::parse(line);
  CHECK(j.contains("key_hash"));
  CHECK(j.contains("request_digest"));
  CHECK(j["response_text"] == "recorded answer");
  std::remove(path.c_str());
}

TEST_CASE("replay mode requires a readable cassette") {
  CHECK_THROWS_AS(RecordReplayClient(nullptr, "missing_cassette.jsonl", CassetteMode::Replay),
                  Error);
}

TEST_CASE("from_env reads the TOPOXPERT variables") {
  setenv("TOPOXPERT_API_KEY", "k1", 1);
  setenv("TOPOXPERT_API_BASE", "http://b1/v1", 1);
  setenv("TOPOXPERT_MODEL", "m1", 1);
  auto cfg = HttpClientConfig::from_env();
  CHECK(cfg.api_key == "k1");
  CHECK(cfg.base_url == "http://b1/v1");
  CHECK(cfg.model == "m1");
  unsetenv("TOPOXPERT_API_KEY");
  unsetenv("TOPOXPERT_API_BASE");
  unsetenv("TOPOXPERT_MODEL");
}
