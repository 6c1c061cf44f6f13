#include "gems/gems.h"

#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "core/evaluator.hpp"
#include "core/knowledge_base.hpp"
#include "core/service.hpp"
#include "core/session.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

struct gems_kb {
  gems::KnowledgeBase kb;
};

struct gems_scenario {
  gems::Scenario s;
};

struct gems_client {
  std::shared_ptr<gems::ModelClient> c;
};

struct gems_session {
  std::shared_ptr<gems::Session> s;
};

struct gems_service {
  std::unique_ptr<gems::SessionRunner> runner;
  std::unique_ptr<gems::SessionService> service;
};

namespace {

thread_local std::string g_last_error;

gems_status status_of(gems::ErrorKind k) {
  using gems::ErrorKind;
  switch (k) {
    case ErrorKind::Io: return GEMS_ERR_IO;
    case ErrorKind::Schema: return GEMS_ERR_SCHEMA;
    case ErrorKind::Reference: return GEMS_ERR_REFERENCE;
    case ErrorKind::Limit: return GEMS_ERR_LIMIT;
    case ErrorKind::Parse: return GEMS_ERR_PARSE;
    case ErrorKind::UnknownChannel: return GEMS_ERR_UNKNOWN_CHANNEL;
    case ErrorKind::UnknownJoint: return GEMS_ERR_UNKNOWN_JOINT;
    case ErrorKind::Transport: return GEMS_ERR_TRANSPORT;
    case ErrorKind::EmptyResponse: return GEMS_ERR_EMPTY_RESPONSE;
    case ErrorKind::Pipeline: return GEMS_ERR_PIPELINE;
    case ErrorKind::InvalidArgument: return GEMS_ERR_INVALID_ARGUMENT;
  }
  return GEMS_ERR_INTERNAL;
}

gems_status fail(gems_status st, std::string msg) {
  g_last_error = std::move(msg);
  return st;
}

template <typename F>
gems_status guarded(F&& f) {
  g_last_error.clear();
  try {
    return f();
  } catch (const gems::Error& e) {
    return fail(status_of(e.kind()), e.what());
  } catch (const json::exception& e) {
    return fail(GEMS_ERR_SCHEMA, e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(GEMS_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(GEMS_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(GEMS_ERR_INTERNAL, "unknown error");
  }
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

#define GEMS_REQUIRE(cond, what) \
  if (!(cond)) return fail(GEMS_ERR_INVALID_ARGUMENT, what)

gems::LoadOverrides part_overrides(const gems_kb_paths* p) {
  gems::LoadOverrides o;
  if (p && p->limits) o.joint_limits = p->limits;
  if (p && p->profile) o.profile = p->profile;
  return o;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw gems::Error(gems::ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw gems::Error(gems::ErrorKind::Io, "write failed for " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw gems::Error(gems::ErrorKind::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::shared_ptr<gems::ModelClient> scenario_mock(const gems::Scenario& s) {
  if (!s.mock) throw gems::Error(gems::ErrorKind::InvalidArgument, "scenario '" + s.id + "' names no mock script");
  return gems::MockClient::from_file(*s.mock);
}

void write_generation(const fs::path& dir, const gems::GenerationResult& r) {
  fs::create_directories(dir);
  write_file(dir / "tutorial.txt", r.tutorial + (r.tutorial.empty() || r.tutorial.back() == '\n' ? "" : "\n"));
  write_file(dir / "steps.json", gems::to_json(std::span<const gems::MovementStep>(r.steps)).dump(2) + "\n");
  write_file(dir / "plan.json", gems::to_json(std::span<const gems::MovementStep>(r.plan)).dump(2) + "\n");
  write_file(dir / "plan.txt", gems::plan_to_instruction_file(r.plan));
  json log = json::array();
  for (const auto& e : r.constraint_log) log.push_back(gems::to_json(e));
  write_file(dir / "constraints.json", log.dump(2) + "\n");
  write_file(dir / "report.json", gems::to_json(r.report).dump(2) + "\n");
  write_file(dir / "transcript.json", gems::to_json(r.transcript).dump(2) + "\n");
  write_file(dir / "result.json", gems::to_json(r).dump(2) + "\n");
}

std::string outcome_summary(const gems::ConstraintOutcome& o) {
  std::string s(gems::to_string(o.verdict));
  if (o.verdict == gems::Verdict::Adjusted) {
    s += ":";
    for (std::size_t i = 0; i < o.instructions.size(); ++i)
      s += (i ? ", " : " ") + o.instructions[i].joint + " " + gems::format_number(o.instructions[i].target_angle);
  }
  return s;
}

}  // namespace

extern "C" {

const char* gems_version(void) { return "1.0.0"; }

const char* gems_status_name(gems_status st) {
  switch (st) {
    case GEMS_OK: return "ok";
    case GEMS_ERR_IO: return "io";
    case GEMS_ERR_SCHEMA: return "schema";
    case GEMS_ERR_REFERENCE: return "reference";
    case GEMS_ERR_LIMIT: return "limit";
    case GEMS_ERR_PARSE: return "parse";
    case GEMS_ERR_UNKNOWN_CHANNEL: return "unknown-channel";
    case GEMS_ERR_UNKNOWN_JOINT: return "unknown-joint";
    case GEMS_ERR_TRANSPORT: return "transport";
    case GEMS_ERR_EMPTY_RESPONSE: return "empty-response";
    case GEMS_ERR_PIPELINE: return "pipeline";
    case GEMS_ERR_INVALID_ARGUMENT: return "invalid-argument";
    case GEMS_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* gems_last_error(void) { return g_last_error.c_str(); }

void gems_string_free(char* s) { std::free(s); }

const char* gems_default_data_dir(void) {
  static const std::string dir = gems::default_data_dir().string();
  return dir.c_str();
}

gems_status gems_kb_load(const gems_kb_paths* paths, gems_kb** out) {
  return guarded([&] {
    GEMS_REQUIRE(out, "out is NULL");
    *out = nullptr;
    const fs::path manifest =
        paths && paths->manifest ? fs::path(paths->manifest) : gems::default_data_dir() / "default" / "bundle.json";
    *out = new gems_kb{gems::load_knowledge_base(manifest, part_overrides(paths))};
    return GEMS_OK;
  });
}

void gems_kb_free(gems_kb* kb) { delete kb; }

gems_status gems_kb_chain_json(const gems_kb* kb, char** out) {
  return guarded([&] {
    GEMS_REQUIRE(kb && out, "kb and out are required");
    const json j{{"schema_version", 1}, {"chain", gems::chain_to_json(kb->kb.model)},
                 {"limits", gems::limits_to_json(kb->kb.limits)}};
    *out = dup(j.dump(2));
    return GEMS_OK;
  });
}

gems_status gems_scenario_load(const char* path, const gems_kb_paths* overrides, gems_scenario** out) {
  return guarded([&] {
    GEMS_REQUIRE(path && out, "path and out are required");
    *out = nullptr;
    gems::ScenarioOverrides o;
    if (overrides && overrides->manifest) o.knowledge_base = overrides->manifest;
    o.parts = part_overrides(overrides);
    *out = new gems_scenario{gems::load_scenario(path, o)};
    return GEMS_OK;
  });
}

void gems_scenario_free(gems_scenario* scenario) { delete scenario; }

const char* gems_scenario_id(const gems_scenario* scenario) { return scenario ? scenario->s.id.c_str() : ""; }

gems_status gems_scenario_set_condition(gems_scenario* scenario, const char* condition) {
  return guarded([&] {
    GEMS_REQUIRE(scenario && condition, "scenario and condition are required");
    scenario->s.flags = gems::AblationFlags::from_name(condition);
    return GEMS_OK;
  });
}

void gems_client_config_init(gems_client_config* cfg) {
  if (!cfg) return;
  *cfg = gems_client_config{};
  cfg->kind = GEMS_CLIENT_MOCK;
  cfg->retries = -1;
}

gems_status gems_client_create(const gems_client_config* cfg, const gems_scenario* scenario, gems_client** out) {
  return guarded([&] {
    GEMS_REQUIRE(cfg && out, "cfg and out are required");
    *out = nullptr;
    std::shared_ptr<gems::ModelClient> client;
    switch (cfg->kind) {
      case GEMS_CLIENT_MOCK:
        if (cfg->path) {
          client = gems::MockClient::from_file(cfg->path);
        } else {
          GEMS_REQUIRE(scenario, "a mock client without a script needs a scenario");
          client = scenario_mock(scenario->s);
        }
        break;
      case GEMS_CLIENT_HTTP: {
        GEMS_REQUIRE(cfg->base_url && *cfg->base_url, "http client needs a base URL");
        gems::HttpClientConfig h;
        h.base_url = cfg->base_url;
        if (cfg->model) h.model = cfg->model;
        if (cfg->api_key_env) h.api_key_env = cfg->api_key_env;
        if (cfg->retries >= 0) h.retries = cfg->retries;
        if (cfg->connect_timeout_ms > 0) h.connect_timeout_ms = cfg->connect_timeout_ms;
        if (cfg->read_timeout_ms > 0) h.read_timeout_ms = cfg->read_timeout_ms;
        client = std::make_shared<gems::HttpModelClient>(h);
        break;
      }
      case GEMS_CLIENT_REPLAY: {
        GEMS_REQUIRE(cfg->path, "replay client needs a transcript path");
        json doc;
        try {
          doc = json::parse(read_file(cfg->path));
        } catch (const json::parse_error& e) {
          throw gems::Error(gems::ErrorKind::Parse, std::string(cfg->path) + ": " + e.what());
        }
        client = std::make_shared<gems::ReplayClient>(gems::transcript_from_json(doc));
        break;
      }
      default:
        return fail(GEMS_ERR_INVALID_ARGUMENT, "unknown client kind");
    }
    *out = new gems_client{std::move(client)};
    return GEMS_OK;
  });
}

void gems_client_free(gems_client* client) { delete client; }

gems_status gems_generate(const gems_scenario* scenario, gems_client* client, const char* out_dir, gems_format format,
                          char** summary) {
  return guarded([&] {
    GEMS_REQUIRE(scenario, "scenario is required");
    const auto& s = scenario->s;
    auto model = client ? client->c : scenario_mock(s);
    const auto r = gems::run_pipeline(s.id, s.context, s.flags, *s.kb, s.pose, *model);
    if (out_dir) write_generation(out_dir, r);
    if (summary) {
      if (format == GEMS_FORMAT_STRUCTURED) {
        *summary = dup(gems::to_json(r).dump(2) + "\n");
      } else {
        std::string text = "scenario " + s.id + ", condition " + r.condition + ", " +
                           std::to_string(r.transcript.size()) + " model call(s)\n" + gems::plan_to_text(r.plan);
        if (!r.report.empty()) text += std::to_string(r.report.size()) + " format violation(s)\n";
        *summary = dup(text);
      }
    }
    return GEMS_OK;
  });
}

gems_status gems_constrain_file(const gems_kb* kb, const char* instructions_path, const char* pose_path,
                                gems_format format, char** out) {
  return guarded([&] {
    GEMS_REQUIRE(kb && instructions_path && out, "kb, instructions_path and out are required");
    const auto& k = kb->kb;
    const gems::BodyPose pose = pose_path ? gems::load_pose(pose_path, k.model, k.limits) : gems::BodyPose{};
    std::istringstream lines(read_file(instructions_path));
    std::string line, text;
    json results = json::array();
    int n = 0;
    while (std::getline(lines, line)) {
      ++n;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto hash = line.find('#');
      const std::string body = line.substr(0, hash);
      if (body.find_first_not_of(" \t") == std::string::npos) continue;
      const auto parsed = gems::parse_instruction_line(body, k.model, k.profile.dominant_hand);
      if (!parsed.instruction) {
        const auto& v = parsed.report.violations;
        throw gems::Error(gems::ErrorKind::Parse, std::string(instructions_path) + ":" + std::to_string(n) + ": " +
                                                      (v.empty() ? std::string("unparseable") : v.front().detail));
      }
      const auto outcome = gems::constrain(*parsed.instruction, pose, k.limits, k.model);
      json res{{"line", n},
               {"input", gems::serialize_instruction(*parsed.instruction)},
               {"verdict", gems::to_string(outcome.verdict)},
               {"explanation", outcome.explanation},
               {"instructions", json::array()}};
      for (const auto& i : outcome.instructions) res["instructions"].push_back(gems::serialize_instruction(i));
      if (!parsed.report.empty()) res["format"] = gems::to_json(parsed.report);
      results.push_back(res);

      text += gems::serialize_instruction(*parsed.instruction) + " -> " + outcome_summary(outcome) + "\n";
      for (const auto& i : outcome.instructions) text += "  " + gems::serialize_instruction(i) + "\n";
      if (!outcome.explanation.empty()) text += "  note: " + outcome.explanation + "\n";
    }
    *out = dup(format == GEMS_FORMAT_STRUCTURED ? json{{"schema_version", 1}, {"results", results}}.dump(2) + "\n"
                                                : text);
    return GEMS_OK;
  });
}

gems_status gems_evaluate_files(const gems_kb* kb, const char* generated_path, const char* ground_truth_path,
                                int swap_insert_delete, gems_format format, char** out) {
  return guarded([&] {
    GEMS_REQUIRE(kb && generated_path && ground_truth_path && out, "kb, both paths and out are required");
    const auto& k = kb->kb;
    const auto gen = gems::load_instruction_file(generated_path, k.model, k.profile.dominant_hand);
    const auto gt = gems::load_instruction_file(ground_truth_path, k.model, k.profile.dominant_hand);
    for (const auto& v : gt.report.violations)
      if (!v.recovered)
        throw gems::Error(gems::ErrorKind::Parse,
                          std::string(ground_truth_path) + ": ground truth line '" + v.raw + "': " + v.detail);
    gems::CostConfig cfg;
    cfg.swap_insert_delete = swap_insert_delete != 0;
    const auto a = gems::distance(gen.instructions, gen.report, gt.instructions, k.limits, cfg);
    if (format == GEMS_FORMAT_STRUCTURED) {
      auto j = gems::to_json(a, gen.instructions, gt.instructions);
      j["swap_insert_delete"] = cfg.swap_insert_delete;
      *out = dup(j.dump(2) + "\n");
    } else {
      *out = dup(gems::alignment_table(a, gen.instructions, gt.instructions));
    }
    return GEMS_OK;
  });
}

gems_status gems_ablate(const char* suite_path, const char* out_dir, gems_format format, char** out) {
  return guarded([&] {
    GEMS_REQUIRE(out, "out is required");
    const fs::path suite = suite_path ? fs::path(suite_path) : gems::default_data_dir() / "suites" / "ablation.json";
    json doc;
    try {
      doc = json::parse(read_file(suite));
    } catch (const json::parse_error& e) {
      throw gems::Error(gems::ErrorKind::Parse, suite.string() + ": " + e.what());
    }
    if (doc.value("schema_version", 0) != gems::kConfigSchemaVersion)
      throw gems::Error(gems::ErrorKind::Schema, suite.string() + ": unsupported schema_version");
    std::vector<std::string> conditions;
    if (doc.contains("conditions")) {
      conditions = doc.at("conditions").get<std::vector<std::string>>();
    } else {
      for (const char* c : gems::kConditionOrder) conditions.emplace_back(c);
    }
    gems::AblationResults results;
    for (const auto& entry : doc.at("scenarios")) {
      fs::path p = entry.get<std::string>();
      if (p.is_relative()) p = suite.parent_path() / p;
      const auto s = gems::load_scenario(p);
      if (!s.ground_truth) throw gems::Error(gems::ErrorKind::Schema, p.string() + ": scenario has no ground_truth");
      const auto gt = gems::load_instruction_file(*s.ground_truth, s.kb->model, s.kb->profile.dominant_hand);
      auto client = scenario_mock(s);
      for (const auto& cond : conditions) {
        const auto r = gems::run_pipeline(s.id, s.context, gems::AblationFlags::from_name(cond), *s.kb, s.pose, *client);
        const auto gen = gems::flatten(r.plan);
        results[cond][s.id] = gems::distance(gen, r.report, gt.instructions, s.kb->limits);
        if (out_dir) write_generation(fs::path(out_dir) / cond / s.id, r);
      }
    }
    const auto report = gems::ablation_report(results);
    if (out_dir) {
      write_file(fs::path(out_dir) / "ablation.json", gems::to_json(report).dump(2) + "\n");
      write_file(fs::path(out_dir) / "ablation.txt", gems::to_text(report));
    }
    *out = dup(format == GEMS_FORMAT_STRUCTURED ? gems::to_json(report).dump(2) + "\n" : gems::to_text(report));
    return GEMS_OK;
  });
}

gems_status gems_session_create(const gems_scenario* scenario, gems_client* client, gems_session** out) {
  return guarded([&] {
    GEMS_REQUIRE(scenario && out, "scenario and out are required");
    *out = nullptr;
    auto model = client ? client->c : scenario_mock(scenario->s);
    *out = new gems_session{std::make_shared<gems::Session>(scenario->s, std::move(model))};
    return GEMS_OK;
  });
}

void gems_session_free(gems_session* session) { delete session; }

gems_status gems_session_command(gems_session* session, const char* text, uint64_t* ticket) {
  return guarded([&] {
    GEMS_REQUIRE(session && text, "session and text are required");
    std::string error;
    const auto cmd = gems::parse_command(text, &error);
    if (!cmd) return fail(GEMS_ERR_PARSE, error);
    const auto t = session->s->submit(*cmd);
    if (ticket) *ticket = t;
    return GEMS_OK;
  });
}

gems_status gems_session_command_json(gems_session* session, const char* text, uint64_t* ticket) {
  return guarded([&] {
    GEMS_REQUIRE(session && text, "session and json are required");
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      return fail(GEMS_ERR_PARSE, e.what());
    }
    std::string error;
    const auto cmd = gems::command_from_json(j, &error);
    if (!cmd) return fail(GEMS_ERR_PARSE, error);
    const auto t = session->s->submit(*cmd);
    if (ticket) *ticket = t;
    return GEMS_OK;
  });
}

gems_status gems_session_wait(gems_session* session, uint64_t ticket, int timeout_ms) {
  return guarded([&] {
    GEMS_REQUIRE(session, "session is required");
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    while (session->s->processed() < ticket) {
      if (std::chrono::steady_clock::now() >= deadline)
        return fail(GEMS_ERR_TRANSPORT, "command " + std::to_string(ticket) + " not applied in time");
      session->s->events().wait_for(session->s->events().last_seq(), std::chrono::milliseconds(10));
    }
    return GEMS_OK;
  });
}

gems_status gems_session_tick(gems_session* session, double dt_ms) {
  return guarded([&] {
    GEMS_REQUIRE(session, "session is required");
    session->s->tick(dt_ms);
    return GEMS_OK;
  });
}

gems_status gems_session_snapshot(const gems_session* session, char** out) {
  return guarded([&] {
    GEMS_REQUIRE(session && out, "session and out are required");
    *out = dup(session->s->snapshot().dump());
    return GEMS_OK;
  });
}

gems_status gems_session_events(const gems_session* session, uint64_t after_seq, char** out, uint64_t* last_seq) {
  return guarded([&] {
    GEMS_REQUIRE(session && out, "session and out are required");
    const auto ev = session->s->events().since(after_seq);
    *out = dup(gems::to_ndjson(ev));
    if (last_seq) *last_seq = ev.empty() ? after_seq : ev.back().seq;
    return GEMS_OK;
  });
}

int gems_session_wait_event(const gems_session* session, uint64_t after_seq, int timeout_ms) {
  if (!session) return 0;
  return session->s->events().wait_for(after_seq, std::chrono::milliseconds(timeout_ms)) ? 1 : 0;
}

const char* gems_session_phase(const gems_session* session) {
  return session ? gems::to_string(session->s->phase()).data() : "";
}

gems_status gems_service_start(gems_session* session, const char* bind, double time_scale, gems_service** out) {
  return guarded([&] {
    GEMS_REQUIRE(session && bind && out, "session, bind and out are required");
    *out = nullptr;
    auto svc = std::make_unique<gems_service>();
    svc->runner = std::make_unique<gems::SessionRunner>(session->s, session->s->scenario().session.tick_ms,
                                                        time_scale > 0 ? time_scale : 1.0);
    svc->service = std::make_unique<gems::SessionService>(session->s);
    svc->service->start(bind);
    svc->runner->start();
    *out = svc.release();
    return GEMS_OK;
  });
}

int gems_service_port(const gems_service* service) { return service ? service->service->port() : 0; }

void gems_service_stop(gems_service* service) {
  if (!service) return;
  service->service->stop();
  service->runner->stop();
  delete service;
}

}  // extern "C"
