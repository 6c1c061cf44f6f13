// Exercises the shared library through its C header only.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "gems/gems.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string data(const std::string& rel) { return std::string(gems_default_data_dir()) + "/" + rel; }

// Takes ownership of a library string.
std::string take(char* s) {
  std::string out = s ? s : "";
  gems_string_free(s);
  return out;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("gems-capi-" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

gems_kb* default_kb() {
  gems_kb* kb = nullptr;
  REQUIRE(gems_kb_load(nullptr, &kb) == GEMS_OK);
  return kb;
}

gems_scenario* load_scenario(const std::string& id) {
  gems_scenario* sc = nullptr;
  REQUIRE(gems_scenario_load(data("scenarios/" + id + "/scenario.json").c_str(), nullptr, &sc) == GEMS_OK);
  return sc;
}

}  // namespace

TEST_CASE("status names and version") {
  CHECK(std::strcmp(gems_status_name(GEMS_OK), "ok") == 0);
  CHECK(std::strcmp(gems_status_name(GEMS_ERR_UNKNOWN_JOINT), "unknown-joint") == 0);
  CHECK(std::strlen(gems_version()) > 0);
  CHECK(fs::exists(data("default/bundle.json")));
}

TEST_CASE("argument and load errors set the last error") {
  gems_kb* kb = nullptr;
  CHECK(gems_kb_load(nullptr, nullptr) == GEMS_ERR_INVALID_ARGUMENT);
  gems_kb_paths paths{"/nonexistent/bundle.json", nullptr, nullptr};
  CHECK(gems_kb_load(&paths, &kb) == GEMS_ERR_IO);
  CHECK(kb == nullptr);
  CHECK(std::string(gems_last_error()).find("/nonexistent/bundle.json") != std::string::npos);

  gems_scenario* sc = nullptr;
  CHECK(gems_scenario_load("/nonexistent/scenario.json", nullptr, &sc) == GEMS_ERR_IO);
  sc = load_scenario("window");
  CHECK(gems_scenario_set_condition(sc, "sideways") == GEMS_ERR_INVALID_ARGUMENT);
  CHECK(std::string(gems_scenario_id(sc)) == "window");
  gems_scenario_free(sc);
  gems_kb_free(nullptr);
  gems_string_free(nullptr);
}

TEST_CASE("chain JSON") {
  gems_kb* kb = default_kb();
  char* out = nullptr;
  REQUIRE(gems_kb_chain_json(kb, &out) == GEMS_OK);
  const auto j = json::parse(take(out));
  CHECK(j["chain"]["joints"].size() == 10);
  CHECK(j["limits"].contains("limits"));
  gems_kb_free(kb);
}

TEST_CASE("constrain a file") {
  gems_kb* kb = default_kb();
  char* out = nullptr;
  REQUIRE(gems_constrain_file(kb, data("fixtures/wrist_overflow.txt").c_str(),
                              data("fixtures/wrist_overflow_pose.json").c_str(), GEMS_FORMAT_STRUCTURED,
                              &out) == GEMS_OK);
  const auto j = json::parse(take(out));
  REQUIRE(j["results"].size() == 1);
  CHECK(j["results"][0]["verdict"] == "adjusted");
  CHECK(j["results"][0]["instructions"] == json::array({"right wrist abduction 14", "right elbow flexion 31"}));

  REQUIRE(gems_constrain_file(kb, data("fixtures/neck.txt").c_str(), data("fixtures/neck_at_limit_pose.json").c_str(),
                              GEMS_FORMAT_PLAIN, &out) == GEMS_OK);
  const auto text = take(out);
  CHECK(text.find("stopped-impossible") != std::string::npos);
  CHECK(text.find("stopped-maxed") != std::string::npos);

  TempDir dir;
  std::ofstream(dir.path / "bad.txt") << "right elbow flexion 10\nright tail wag 3\n";
  CHECK(gems_constrain_file(kb, (dir.path / "bad.txt").string().c_str(), nullptr, GEMS_FORMAT_PLAIN, &out) ==
        GEMS_ERR_PARSE);
  CHECK(std::string(gems_last_error()).find("bad.txt:2") != std::string::npos);
  gems_kb_free(kb);
}

TEST_CASE("evaluate files") {
  gems_kb* kb = default_kb();
  const auto gt = data("scenarios/window/ground_truth.txt");
  char* out = nullptr;
  REQUIRE(gems_evaluate_files(kb, gt.c_str(), gt.c_str(), 0, GEMS_FORMAT_STRUCTURED, &out) == GEMS_OK);
  auto j = json::parse(take(out));
  CHECK(j["weighted"] == 0);
  CHECK(j["swap_insert_delete"] == false);
  TempDir dir;
  std::ofstream(dir.path / "short.txt") << "right fingers flexion 60\n";
  REQUIRE(gems_evaluate_files(kb, (dir.path / "short.txt").string().c_str(), gt.c_str(), 0, GEMS_FORMAT_STRUCTURED,
                              &out) == GEMS_OK);
  CHECK(json::parse(take(out))["weighted"] == 24);
  REQUIRE(gems_evaluate_files(kb, (dir.path / "short.txt").string().c_str(), gt.c_str(), 1, GEMS_FORMAT_STRUCTURED,
                              &out) == GEMS_OK);
  CHECK(json::parse(take(out))["weighted"] == 4);
  gems_kb_free(kb);
}

TEST_CASE("generate writes artifacts and replays identically") {
  gems_scenario* sc = load_scenario("window");
  TempDir dir;
  const auto first = (dir.path / "first").string();
  char* out = nullptr;
  REQUIRE(gems_generate(sc, nullptr, first.c_str(), GEMS_FORMAT_STRUCTURED, &out) == GEMS_OK);
  const auto result = take(out);
  for (const char* f : {"tutorial.txt", "steps.json", "plan.json", "plan.txt", "constraints.json", "report.json",
                        "transcript.json", "result.json"})
    CHECK_MESSAGE(fs::exists(fs::path(first) / f), f);

  gems_client_config cfg;
  gems_client_config_init(&cfg);
  cfg.kind = GEMS_CLIENT_REPLAY;
  const auto transcript = (fs::path(first) / "transcript.json").string();
  cfg.path = transcript.c_str();
  gems_client* replay = nullptr;
  REQUIRE(gems_client_create(&cfg, sc, &replay) == GEMS_OK);
  const auto second = (dir.path / "second").string();
  REQUIRE(gems_generate(sc, replay, second.c_str(), GEMS_FORMAT_STRUCTURED, &out) == GEMS_OK);
  CHECK(take(out) == result);
  CHECK(read_file(fs::path(first) / "result.json") == read_file(fs::path(second) / "result.json"));
  gems_client_free(replay);

  REQUIRE(gems_scenario_set_condition(sc, "naive") == GEMS_OK);
  REQUIRE(gems_generate(sc, nullptr, nullptr, GEMS_FORMAT_STRUCTURED, &out) == GEMS_OK);
  CHECK(json::parse(take(out))["transcript"]["calls"].size() == 1);

  cfg.kind = GEMS_CLIENT_HTTP;
  cfg.path = nullptr;
  cfg.base_url = "http://127.0.0.1:1";
  cfg.retries = 0;
  cfg.connect_timeout_ms = 300;
  gems_client* http = nullptr;
  REQUIRE(gems_client_create(&cfg, sc, &http) == GEMS_OK);
  CHECK(gems_generate(sc, http, nullptr, GEMS_FORMAT_PLAIN, &out) == GEMS_ERR_TRANSPORT);
  gems_client_free(http);
  gems_scenario_free(sc);
}

TEST_CASE("ablation over the bundled suite") {
  char* out = nullptr;
  REQUIRE(gems_ablate(nullptr, nullptr, GEMS_FORMAT_STRUCTURED, &out) == GEMS_OK);
  const auto j = json::parse(take(out));
  CHECK(j["tasks"].size() == 4);
  CHECK(j["conditions"][0]["condition"] == "full");
  CHECK(gems_ablate("/nonexistent/suite.json", nullptr, GEMS_FORMAT_PLAIN, &out) == GEMS_ERR_IO);
}

TEST_CASE("session through the C API") {
  gems_scenario* sc = load_scenario("pill_bottle");
  gems_session* s = nullptr;
  REQUIRE(gems_session_create(sc, nullptr, &s) == GEMS_OK);
  gems_scenario_free(sc);  // the session keeps its own copy
  CHECK(std::string(gems_session_phase(s)) == "idle");

  uint64_t ticket = 0;
  CHECK(gems_session_command(s, "dance", &ticket) == GEMS_ERR_PARSE);
  REQUIRE(gems_session_command(s, "EMS help me open this pill bottle", &ticket) == GEMS_OK);
  CHECK(gems_session_wait(s, ticket, 10) == GEMS_ERR_TRANSPORT);  // nobody ticks yet
  REQUIRE(gems_session_tick(s, 0) == GEMS_OK);
  CHECK(gems_session_wait(s, ticket, 10) == GEMS_OK);
  CHECK(std::string(gems_session_phase(s)) == "awaiting-confirmation");

  REQUIRE(gems_session_command_json(s, R"({"verb":"confirm"})", &ticket) == GEMS_OK);
  CHECK(gems_session_command_json(s, "{", &ticket) != GEMS_OK);
  for (int i = 0; i < 10; ++i) gems_session_tick(s, 100);
  CHECK(std::string(gems_session_phase(s)) == "stimulating");

  char* out = nullptr;
  uint64_t last = 0;
  REQUIRE(gems_session_events(s, 0, &out, &last) == GEMS_OK);
  const auto ndjson = take(out);
  CHECK(last > 5);
  CHECK(ndjson.find("\"type\":\"session\"") != std::string::npos);
  CHECK(gems_session_wait_event(s, last, 10) == 0);
  REQUIRE(gems_session_events(s, last, &out, &last) == GEMS_OK);
  CHECK(take(out).empty());

  REQUIRE(gems_session_command(s, "stop", &ticket) == GEMS_OK);
  CHECK(std::string(gems_session_phase(s)) == "halted");
  REQUIRE(gems_session_snapshot(s, &out) == GEMS_OK);
  CHECK(json::parse(take(out))["phase"] == "halted");
  gems_session_free(s);
}

TEST_CASE("service through the C API") {
  gems_scenario* sc = load_scenario("pill_bottle");
  gems_session* s = nullptr;
  REQUIRE(gems_session_create(sc, nullptr, &s) == GEMS_OK);
  gems_service* svc = nullptr;
  CHECK(gems_service_start(s, "nonsense", 1.0, &svc) == GEMS_ERR_INVALID_ARGUMENT);
  REQUIRE(gems_service_start(s, "127.0.0.1:0", 20.0, &svc) == GEMS_OK);
  const int port = gems_service_port(svc);
  CHECK(port > 0);

  gems_service* clash = nullptr;
  CHECK(gems_service_start(s, ("127.0.0.1:" + std::to_string(port)).c_str(), 1.0, &clash) == GEMS_ERR_IO);

  httplib::Client c("127.0.0.1", port);
  auto res = c.Post("/command", "help me open this pill bottle", "text/plain");
  REQUIRE(res);
  CHECK(res->status == 202);
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(10);
  while (std::string(gems_session_phase(s)) != "awaiting-confirmation" && std::chrono::steady_clock::now() < deadline)
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  CHECK(std::string(gems_session_phase(s)) == "awaiting-confirmation");
  res = c.Get("/chain");
  REQUIRE(res);
  CHECK(json::parse(res->body)["schema_version"] == 1);
  gems_service_stop(svc);
  gems_session_free(s);
  gems_scenario_free(sc);
}
