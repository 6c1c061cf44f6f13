#include "core/scenario.hpp"

#include "core/json_util.hpp"

#ifndef GEMS_DATA_DIR
#define GEMS_DATA_DIR "data"
#endif

namespace gems {

WorldOracle::WorldOracle(std::map<std::string, bool> facts, std::vector<WorldRule> rules)
    : initial_(facts), facts_(std::move(facts)), rules_(std::move(rules)), counts_(rules_.size(), 0) {}

void WorldOracle::on_step_completed(const MovementStep& step) {
  const std::string desc = to_lower(step.description);
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    const auto& r = rules_[i];
    if (!r.step_contains.empty() && desc.find(to_lower(r.step_contains)) == std::string::npos) continue;
    if (++counts_[i] >= r.after) facts_[r.fact] = r.value;
  }
}

std::optional<bool> WorldOracle::fact(const std::string& name) const {
  auto it = facts_.find(name);
  if (it == facts_.end()) return std::nullopt;
  return it->second;
}

std::string WorldOracle::facts_text() const {
  std::string out;
  for (const auto& [k, v] : facts_) {
    if (!out.empty()) out += ", ";
    out += k + "=" + (v ? "true" : "false");
  }
  return out.empty() ? "none" : out;
}

void WorldOracle::reset() {
  facts_ = initial_;
  std::fill(counts_.begin(), counts_.end(), 0);
}

std::string_view to_string(BodyReaction r) {
  switch (r) {
    case BodyReaction::Comply: return "comply";
    case BodyReaction::Freeze: return "freeze";
    case BodyReaction::Resist: return "resist";
  }
  return "";
}

std::filesystem::path default_data_dir() { return GEMS_DATA_DIR; }

namespace {

using json_util::json;

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& rel) {
  std::filesystem::path p(rel);
  return p.is_absolute() ? p : base / p;
}

SessionConfig parse_session(const json& j, const std::string& where) {
  SessionConfig c;
  if (j.contains("stimulation_mode")) {
    auto m = stimulation_mode_from_string(json_util::get_string(j, "stimulation_mode", where));
    if (!m) throw Error(ErrorKind::Schema, where + ".stimulation_mode: expected actuate, nudge or tactile");
    c.stimulation_mode = *m;
  }
  if (j.contains("completion_mode")) {
    auto m = completion_mode_from_string(json_util::get_string(j, "completion_mode", where));
    if (!m) throw Error(ErrorKind::Schema, where + ".completion_mode: expected partial or full");
    c.completion_mode = *m;
  }
  c.tick_ms = json_util::get_number_or(j, "tick_ms", where, c.tick_ms);
  c.stall_window_ms = json_util::get_number_or(j, "stall_window_ms", where, c.stall_window_ms);
  c.repeat_cap = static_cast<int>(json_util::get_number_or(j, "repeat_cap", where, c.repeat_cap));
  c.response.velocity_deg_per_s = json_util::get_number_or(j, "velocity_deg_per_s", where, c.response.velocity_deg_per_s);
  c.response.motor_threshold = json_util::get_number_or(j, "motor_threshold", where, c.response.motor_threshold);
  c.response.reach_tolerance_deg =
      json_util::get_number_or(j, "reach_tolerance_deg", where, c.response.reach_tolerance_deg);
  if (c.tick_ms <= 0 || c.stall_window_ms <= 0 || c.repeat_cap < 1 || c.response.velocity_deg_per_s <= 0 ||
      c.response.reach_tolerance_deg < 0)
    throw Error(ErrorKind::Schema, where + ": session timing values must be positive");
  if (j.contains("body")) {
    const auto& body = j["body"];
    if (!body.is_array()) throw Error(ErrorKind::Schema, where + ".body: expected an array");
    for (std::size_t i = 0; i < body.size(); ++i) {
      const std::string w = where + ".body[" + std::to_string(i) + "]";
      BodyRule r;
      r.step_contains = json_util::get_string_or(body[i], "step_contains", w, "");
      const auto reaction = json_util::get_string(body[i], "reaction", w);
      if (reaction == "comply") r.reaction = BodyReaction::Comply;
      else if (reaction == "freeze") r.reaction = BodyReaction::Freeze;
      else if (reaction == "resist") r.reaction = BodyReaction::Resist;
      else throw Error(ErrorKind::Schema, w + ".reaction: expected comply, freeze or resist");
      c.body.push_back(std::move(r));
    }
  }
  return c;
}

WorldOracle parse_world(const json& j, const std::string& where) {
  std::map<std::string, bool> facts;
  if (j.contains("facts")) {
    if (!j["facts"].is_object()) throw Error(ErrorKind::Schema, where + ".facts: expected an object");
    for (const auto& [k, v] : j["facts"].items()) {
      if (!v.is_boolean()) throw Error(ErrorKind::Schema, where + ".facts." + k + ": expected a boolean");
      facts[k] = v.get<bool>();
    }
  }
  std::vector<WorldRule> rules;
  if (j.contains("rules")) {
    for (std::size_t i = 0; i < j["rules"].size(); ++i) {
      const auto& r = j["rules"][i];
      const std::string w = where + ".rules[" + std::to_string(i) + "]";
      WorldRule rule;
      rule.fact = json_util::get_string(r, "fact", w);
      rule.value = json_util::get_bool(r, "value", w, true);
      rule.after = static_cast<int>(json_util::get_number_or(r, "after", w, 1));
      rule.step_contains = json_util::get_string_or(r, "step_contains", w, "");
      if (rule.after < 1) throw Error(ErrorKind::Schema, w + ".after: must be at least 1");
      rules.push_back(std::move(rule));
    }
  }
  return WorldOracle(std::move(facts), std::move(rules));
}

}  // namespace

Scenario load_scenario(const std::filesystem::path& path, const ScenarioOverrides& overrides) {
  const auto doc = json_util::parse_file(path);
  const std::string where = path.string();
  json_util::check_schema_version(doc, kConfigSchemaVersion, where);

  Scenario s;
  s.dir = path.parent_path();
  s.id = json_util::get_string(doc, "id", where);

  std::filesystem::path kb_path = overrides.knowledge_base
                                      ? *overrides.knowledge_base
                                      : (doc.contains("knowledge_base")
                                             ? resolve(s.dir, json_util::get_string(doc, "knowledge_base", where))
                                             : default_data_dir() / "default" / "bundle.json");
  auto kb = std::make_shared<KnowledgeBase>(load_knowledge_base(kb_path, overrides.parts));
  s.kb = kb;

  const auto& ctx = json_util::require(doc, "context", where);
  const std::string cw = where + ": context";
  s.context.request = json_util::get_string(ctx, "request", cw);
  if (s.context.request.empty()) throw Error(ErrorKind::Schema, cw + ".request: must not be empty");
  if (ctx.contains("location")) s.context.location = json_util::get_string(ctx, "location", cw);
  if (ctx.contains("pov_facts")) {
    for (const auto& f : ctx["pov_facts"]) {
      if (!f.is_string()) throw Error(ErrorKind::Schema, cw + ".pov_facts: expected strings");
      s.context.pov_facts.push_back(f.get<std::string>());
    }
  }
  if (ctx.contains("previous_output")) s.context.previous_output = json_util::get_string(ctx, "previous_output", cw);
  s.context.user_settings = kb->profile.user_settings;
  if (ctx.contains("user_settings")) {
    const auto extra = json_util::get_string(ctx, "user_settings", cw);
    s.context.user_settings += (s.context.user_settings.empty() ? "" : "; ") + extra;
  }

  if (doc.contains("pose")) {
    const auto& p = doc["pose"];
    s.pose = p.is_string() ? load_pose(resolve(s.dir, p.get<std::string>()), kb->model, kb->limits)
                           : parse_pose(p, kb->model, kb->limits, where + ": pose");
  }
  s.context.pose_text = pose_to_text(s.pose, kb->model);

  s.flags = AblationFlags::from_name(json_util::get_string_or(doc, "flags", where, "full"));
  if (doc.contains("mock")) s.mock = resolve(s.dir, json_util::get_string(doc, "mock", where));
  if (doc.contains("ground_truth")) s.ground_truth = resolve(s.dir, json_util::get_string(doc, "ground_truth", where));
  if (doc.contains("world")) s.world = parse_world(doc["world"], where + ": world");
  if (doc.contains("session")) s.session = parse_session(doc["session"], where + ": session");
  return s;
}

}  // namespace gems
