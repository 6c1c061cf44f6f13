#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "core/model_client.hpp"
#include "core/prompts.hpp"
#include "support.hpp"

using namespace gems;
using nlohmann::json;

TEST_CASE("templates drop lines whose slot is empty") {
  const std::string t = "A: {{a}}\nB: {{b}} and {{c}}\nfixed\n";
  CHECK(render_template(t, {{"a", "1"}, {"b", "2"}, {"c", "3"}}) == "A: 1\nB: 2 and 3\nfixed\n");
  CHECK(render_template(t, {{"a", "1"}, {"b", "2"}}) == "A: 1\nfixed\n");
  CHECK(render_template(t, {{"a", ""}, {"b", "2"}, {"c", "3"}}) == "B: 2 and 3\nfixed\n");
}

TEST_CASE("multi-line slot values start on their own line") {
  CHECK(render_template("Plan: {{p}}", {{"p", "1. a\n2. b\n"}}) == "Plan:\n1. a\n2. b");
}

TEST_CASE("bundled prompt templates render by stage") {
  for (const char* stage : {"tutorial", "movements", "stimulation", "naive", "checkpoint"}) {
    CHECK_NOTHROW(prompt_template(stage));
  }
  CHECK_THROWS_AS(prompt_template("summary"), Error);
  const auto p = render_prompt("tutorial", {{"request", "open the window"}});
  CHECK(p.user == "Request: open the window");
  CHECK(p.system.find("tutorial") != std::string::npos);
}

TEST_CASE("mock client picks the most specific entry") {
  const auto doc = json::parse(R"({
    "schema_version": 1,
    "responses": [
      {"stage": "tutorial", "text": "generic"},
      {"stage": "tutorial", "scenario": "s", "text": "scenario"},
      {"stage": "tutorial", "condition": "naive", "text": "condition"},
      {"stage": "tutorial", "condition": "naive", "text": "condition later"},
      {"stage": "tutorial", "prompt_contains": "Previous", "text": ["retry", "plan"]},
      {"stage": "movements", "text": "  \n"}
    ]})");
  auto mock = MockClient::from_json(doc, "mock");
  auto ask = [&](std::string scenario, std::string condition, std::string user, std::string stage = "tutorial") {
    return mock->complete({scenario, stage, condition, "", user});
  };
  CHECK(ask("x", "full", "req") == "generic");
  CHECK(ask("s", "full", "req") == "scenario");
  CHECK(ask("s", "naive", "req") == "condition");
  CHECK(ask("s", "naive", "Previous attempt") == "retry\nplan\n");
  CHECK(ask("s", "naive", "previous attempt") == "condition");
  try {
    ask("s", "full", "req", "movements");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyResponse);
  }
  CHECK_THROWS_AS(ask("s", "full", "req", "checkpoint"), Error);
  CHECK_THROWS_AS(MockClient::from_json(json::parse(R"({"schema_version":1,"responses":[{"text":"x"}]})"), "m"),
                  Error);
}

TEST_CASE("replay returns recorded answers and detects divergence") {
  std::vector<TranscriptEntry> t{{"tutorial", "full", "sys", "u1", "r1"}, {"movements", "full", "sys", "u2", "r2"}};
  CHECK(transcript_from_json(to_json(t)) == t);
  ReplayClient replay(t);
  CHECK(replay.complete({"s", "tutorial", "full", "sys", "u1"}) == "r1");
  try {
    replay.complete({"s", "movements", "full", "sys", "changed"});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Transport);
  }
  CHECK(replay.complete({"s", "movements", "full", "sys", "u2"}) == "r2");
  try {
    replay.complete({"s", "stimulation", "full", "sys", "u3"});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyResponse);
  }
}

namespace {

// Local chat-completion endpoint. `plan` holds the status to answer with on
// each successive call.
struct FakeEndpoint {
  httplib::Server srv;
  std::thread thread;
  int port = 0;
  std::vector<int> plan;
  std::string content = "hello";
  std::atomic<int> calls{0};
  std::string last_auth;
  json last_body;

  FakeEndpoint() {
    srv.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const int n = calls++;
      last_auth = req.get_header_value("Authorization");
      last_body = json::parse(req.body);
      const int status = n < static_cast<int>(plan.size()) ? plan[n] : 200;
      res.status = status;
      if (status == 200) {
        res.set_content(json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump(),
                        "application/json");
      } else {
        res.set_content("busy", "text/plain");
      }
    });
    port = srv.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { srv.listen_after_bind(); });
    srv.wait_until_ready();
  }
  ~FakeEndpoint() {
    srv.stop();
    thread.join();
  }
  HttpClientConfig config() const {
    HttpClientConfig c;
    c.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/";
    c.api_key_env = "GEMS_TEST_KEY";
    c.retries = 2;
    c.connect_timeout_ms = 2000;
    c.read_timeout_ms = 2000;
    return c;
  }
};

}  // namespace

TEST_CASE("HTTP client speaks the chat-completion protocol") {
  ::setenv("GEMS_TEST_KEY", "sekret", 1);
  FakeEndpoint ep;
  const ModelRequest req{"s", "tutorial", "full", "be brief", "open it"};

  SUBCASE("success sends bearer key and both messages") {
    HttpModelClient c(ep.config());
    CHECK(c.complete(req) == "hello");
    CHECK(ep.last_auth == "Bearer sekret");
    CHECK(ep.last_body["messages"].size() == 2);
    CHECK(ep.last_body["messages"][1]["content"] == "open it");
  }
  SUBCASE("server errors and rate limits are retried") {
    ep.plan = {503, 429};
    HttpModelClient c(ep.config());
    CHECK(c.complete(req) == "hello");
    CHECK(ep.calls == 3);
  }
  SUBCASE("retries run out") {
    ep.plan = {500, 500, 500, 500};
    HttpModelClient c(ep.config());
    try {
      c.complete(req);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Transport);
      CHECK(std::string(e.what()).find("3 attempt") != std::string::npos);
    }
  }
  SUBCASE("client errors are not retried") {
    ep.plan = {401};
    HttpModelClient c(ep.config());
    CHECK_THROWS_AS(c.complete(req), Error);
    CHECK(ep.calls == 1);
  }
  SUBCASE("empty content") {
    ep.content = " ";
    HttpModelClient c(ep.config());
    try {
      c.complete(req);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::EmptyResponse);
    }
  }
  ::unsetenv("GEMS_TEST_KEY");
}

TEST_CASE("HTTP client reports unreachable endpoints and bad URLs") {
  CHECK_THROWS_AS(HttpModelClient(HttpClientConfig{"localhost:1"}), Error);
  HttpClientConfig c;
  c.base_url = "http://127.0.0.1:1";
  c.retries = 0;
  c.connect_timeout_ms = 500;
  try {
    HttpModelClient(c).complete({"s", "tutorial", "full", "", "x"});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Transport);
  }
}
