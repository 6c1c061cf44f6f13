// gems: command-line front end over the C interface.
//
// Exit codes: 0 success, 1 runtime failure (model transport, pipeline),
// 2 usage, I/O, parse, schema or bind errors.

#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <functional>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "gems/gems.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

int exit_code(gems_status st) {
  switch (st) {
    case GEMS_OK: return kExitOk;
    case GEMS_ERR_TRANSPORT:
    case GEMS_ERR_EMPTY_RESPONSE:
    case GEMS_ERR_PIPELINE:
    case GEMS_ERR_INTERNAL: return kExitRuntime;
    default: return kExitUsage;
  }
}

int report(gems_status st, const std::string& what) {
  std::cerr << "gems " << what << ": " << gems_status_name(st) << ": " << gems_last_error() << "\n";
  return exit_code(st);
}

// Owns a C string returned by the library.
struct Text {
  char* p = nullptr;
  ~Text() { gems_string_free(p); }
};

struct KbOptions {
  std::string kb, limits, profile;
  gems_kb_paths paths() const {
    return {kb.empty() ? nullptr : kb.c_str(), limits.empty() ? nullptr : limits.c_str(),
            profile.empty() ? nullptr : profile.c_str()};
  }
};

struct ClientOptions {
  std::optional<std::string> mock;  // present with "" means the scenario's script
  std::string http, replay, model;
};

void add_kb_options(CLI::App* app, KbOptions& o) {
  app->add_option("--kb", o.kb, "Knowledge base manifest (bundle.json)");
  app->add_option("--limits", o.limits, "Joint limits file replacing the manifest's");
  app->add_option("--profile", o.profile, "User profile replacing the manifest's");
}

void add_format_option(CLI::App* app, std::string& format) {
  app->add_option("--format", format, "Output format")->check(CLI::IsMember({"plain", "structured"}));
}

void add_client_options(CLI::App* app, ClientOptions& o) {
  auto* mock = app->add_option_function<std::string>("--mock", [&o](const std::string& v) { o.mock = v; },
                                                     "Scripted model responses (default: the scenario's script)");
  mock->expected(0, 1);
  auto* http = app->add_option("--http", o.http, "Chat-completion base URL; key from MODEL_API_KEY");
  auto* replay = app->add_option("--replay", o.replay, "Answer from a recorded transcript.json");
  app->add_option("--model", o.model, "Model name for --http");
  mock->excludes(http)->excludes(replay);
  http->excludes(replay);
}

gems_format format_of(const std::string& f) { return f == "structured" ? GEMS_FORMAT_STRUCTURED : GEMS_FORMAT_PLAIN; }

// nullptr client means the scenario's own mock script.
gems_status make_client(const ClientOptions& o, const gems_scenario* scenario, gems_client** out) {
  *out = nullptr;
  gems_client_config cfg;
  gems_client_config_init(&cfg);
  if (!o.http.empty()) {
    cfg.kind = GEMS_CLIENT_HTTP;
    cfg.base_url = o.http.c_str();
    if (!o.model.empty()) cfg.model = o.model.c_str();
  } else if (!o.replay.empty()) {
    cfg.kind = GEMS_CLIENT_REPLAY;
    cfg.path = o.replay.c_str();
  } else if (o.mock && !o.mock->empty()) {
    cfg.path = o.mock->c_str();
  } else {
    return GEMS_OK;
  }
  return gems_client_create(&cfg, scenario, out);
}

std::string render_event(const std::string& line, bool show_pose) {
  const auto j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded()) return line;
  const std::string type = j.value("type", "");
  const auto& d = j["data"];
  char stamp[32];
  std::snprintf(stamp, sizeof stamp, "[%8.1f s] ", j.value("t_ms", 0.0) / 1000.0);
  if (type == "announcement") return stamp + std::string("EMS: ") + d.value("text", "");
  if (type == "phase")
    return stamp + std::string("phase ") + d.value("from", "") + " -> " + d.value("to", "") + " (" +
           d.value("reason", "") + ")";
  if (type == "noop") return stamp + std::string("ignored ") + d.value("verb", "") + ": " + d.value("reason", "");
  if (type == "pose" && !show_pose) return {};
  return stamp + type + " " + d.dump();
}

int cmd_generate(const std::string& scenario_path, const std::string& condition, bool naive, const KbOptions& kb,
                 const ClientOptions& co, const std::string& out, const std::string& format) {
  const auto paths = kb.paths();
  gems_scenario* sc = nullptr;
  if (auto st = gems_scenario_load(scenario_path.c_str(), &paths, &sc); st) return report(st, "generate");
  const std::string cond = naive ? "naive" : condition;
  if (!cond.empty()) {
    if (auto st = gems_scenario_set_condition(sc, cond.c_str()); st) {
      gems_scenario_free(sc);
      return report(st, "generate");
    }
  }
  gems_client* client = nullptr;
  if (auto st = make_client(co, sc, &client); st) {
    gems_scenario_free(sc);
    return report(st, "generate");
  }
  Text summary;
  const auto st = gems_generate(sc, client, out.empty() ? nullptr : out.c_str(), format_of(format), &summary.p);
  gems_client_free(client);
  gems_scenario_free(sc);
  if (st) return report(st, "generate");
  std::cout << summary.p;
  if (!out.empty() && format != "structured") std::cout << "wrote " << out << "\n";
  return kExitOk;
}

int with_kb(const KbOptions& kb, const std::string& what, const std::function<gems_status(gems_kb*)>& f) {
  const auto paths = kb.paths();
  gems_kb* k = nullptr;
  if (auto st = gems_kb_load(&paths, &k); st) return report(st, what);
  const auto st = f(k);
  gems_kb_free(k);
  return st ? report(st, what) : kExitOk;
}

int cmd_session(const std::string& scenario_path, const std::string& condition, const KbOptions& kb,
                const ClientOptions& co, const std::string& bind, double time_scale, bool raw_events,
                bool show_pose) {
  const auto paths = kb.paths();
  gems_scenario* sc = nullptr;
  if (auto st = gems_scenario_load(scenario_path.c_str(), &paths, &sc); st) return report(st, "session");
  if (!condition.empty()) {
    if (auto st = gems_scenario_set_condition(sc, condition.c_str()); st) {
      gems_scenario_free(sc);
      return report(st, "session");
    }
  }
  gems_client* client = nullptr;
  gems_session* session = nullptr;
  gems_status st = make_client(co, sc, &client);
  if (!st) st = gems_session_create(sc, client, &session);
  gems_client_free(client);
  gems_scenario_free(sc);
  if (st) return report(st, "session");

  gems_service* service = nullptr;
  if (st = gems_service_start(session, bind.c_str(), time_scale, &service); st) {
    gems_session_free(session);
    return report(st, "session");
  }
  std::cerr << "session service on port " << gems_service_port(service) << " (GET /events, POST /command)\n";

  std::mutex out_mu;
  std::atomic<bool> running{true};
  std::uint64_t printed = 0;
  auto drain = [&] {
    Text batch;
    std::uint64_t last = printed;
    if (gems_session_events(session, printed, &batch.p, &last) != GEMS_OK) return;
    printed = last;
    std::lock_guard lock(out_mu);
    std::string all(batch.p), line;
    for (std::size_t pos = 0; pos < all.size();) {
      const auto nl = all.find('\n', pos);
      line = all.substr(pos, nl - pos);
      pos = nl == std::string::npos ? all.size() : nl + 1;
      const auto shown = raw_events ? line : render_event(line, show_pose);
      if (!shown.empty()) std::cout << shown << "\n";
    }
    std::cout.flush();
  };
  std::thread printer([&] {
    while (running) {
      gems_session_wait_event(session, printed, 100);
      drain();
    }
  });

  const bool interactive = isatty(STDIN_FILENO);
  std::string line;
  while (true) {
    if (interactive) {
      std::lock_guard lock(out_mu);
      std::cout << "> " << std::flush;
    }
    if (!std::getline(std::cin, line)) break;
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    line = line.substr(b);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line == "quit" || line == "exit") break;
    std::uint64_t ticket = 0;
    if (auto cst = gems_session_command(session, line.c_str(), &ticket); cst) {
      std::lock_guard lock(out_mu);
      std::cout << "? " << gems_last_error() << "\n" << std::flush;
      continue;
    }
    gems_session_wait(session, ticket, 60000);
  }
  running = false;
  printer.join();
  gems_service_stop(service);
  drain();
  Text snap;
  if (gems_session_snapshot(session, &snap.p) == GEMS_OK) {
    const auto j = nlohmann::json::parse(snap.p);
    std::cout << "final phase: " << j.value("phase", "") << "\n";
  }
  gems_session_free(session);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generative EMS instruction engine"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(gems_version()));

  KbOptions kb;
  ClientOptions client;
  std::string format = "plain";
  std::string scenario, condition, out, bind = "127.0.0.1:8765";
  bool naive = false;

  auto* gen = app.add_subcommand("generate", "Run the generation pipeline for a scenario");
  gen->add_option("--scenario", scenario, "Scenario file")->required();
  gen->add_option("--flags", condition, "Ablation condition")
      ->check(CLI::IsMember({"full", "no-context", "no-pose", "no-ems", "naive"}));
  gen->add_flag("--naive", naive, "Same as --flags naive");
  gen->add_option("--out", out, "Directory for tutorial, steps, plan and transcript");
  add_kb_options(gen, kb);
  add_client_options(gen, client);
  add_format_option(gen, format);

  std::string instructions, pose;
  auto* con = app.add_subcommand("constrain", "Check instructions against joint limits at a pose");
  con->add_option("instructions", instructions, "Instruction file")->required();
  con->add_option("pose", pose, "Pose file (default: neutral)");
  add_kb_options(con, kb);
  add_format_option(con, format);

  std::string generated, truth;
  bool swap = false;
  auto* ev = app.add_subcommand("evaluate", "Weighted edit distance against a ground truth");
  ev->add_option("generated", generated, "Generated instruction file")->required();
  ev->add_option("ground_truth", truth, "Ground-truth instruction file")->required();
  ev->add_flag("--swap-insert-delete", swap, "Swap insertion and deletion labels and costs");
  add_kb_options(ev, kb);
  add_format_option(ev, format);

  std::string suite;
  auto* abl = app.add_subcommand("ablate", "Distance table over a scenario suite and conditions");
  abl->add_option("suite", suite, "Suite file (default: bundled suite)");
  abl->add_option("--out", out, "Directory for per-run outputs and the report");
  add_format_option(abl, format);

  double time_scale = 1.0;
  bool raw_events = false, show_pose = false;
  auto* ses = app.add_subcommand("session", "Serve a live session and read commands from stdin");
  ses->add_option("--scenario", scenario, "Scenario file")->required();
  ses->add_option("--flags", condition, "Ablation condition")
      ->check(CLI::IsMember({"full", "no-context", "no-pose", "no-ems", "naive"}));
  ses->add_option("--bind", bind, "host:port for the event stream and command endpoint (port 0: any)");
  ses->add_option("--time-scale", time_scale, "Simulated seconds per wall-clock second")->check(CLI::PositiveNumber);
  ses->add_flag("--events", raw_events, "Print raw NDJSON events");
  ses->add_flag("--show-pose", show_pose, "Include pose events in plain output");
  add_kb_options(ses, kb);
  add_client_options(ses, client);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  if (*gen) return cmd_generate(scenario, condition, naive, kb, client, out, format);
  if (*con)
    return with_kb(kb, "constrain", [&](gems_kb* k) {
      Text t;
      const auto st = gems_constrain_file(k, instructions.c_str(), pose.empty() ? nullptr : pose.c_str(),
                                          format_of(format), &t.p);
      if (!st) std::cout << t.p;
      return st;
    });
  if (*ev)
    return with_kb(kb, "evaluate", [&](gems_kb* k) {
      Text t;
      const auto st = gems_evaluate_files(k, generated.c_str(), truth.c_str(), swap ? 1 : 0, format_of(format), &t.p);
      if (!st) std::cout << t.p;
      return st;
    });
  if (*abl) {
    Text t;
    const auto st = gems_ablate(suite.empty() ? nullptr : suite.c_str(), out.empty() ? nullptr : out.c_str(),
                                format_of(format), &t.p);
    if (st) return report(st, "ablate");
    std::cout << t.p;
    return kExitOk;
  }
  if (*ses) return cmd_session(scenario, condition, kb, client, bind, time_scale, raw_events, show_pose);
  return kExitUsage;
}
