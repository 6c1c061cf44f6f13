#include "core/pipeline.hpp"

#include <cctype>

#include "core/prompts.hpp"

namespace gems {

AblationFlags AblationFlags::from_name(std::string_view name) {
  AblationFlags f;
  if (name == "full") return f;
  if (name == "no-context") f.use_context = false;
  else if (name == "no-pose") f.use_pose = false;
  else if (name == "no-ems") f.use_ems_knowledge = false;
  else if (name == "naive") f = AblationFlags{false, false, false, true};
  else throw Error(ErrorKind::InvalidArgument, "unknown ablation condition '" + std::string(name) + "'");
  return f;
}

std::string AblationFlags::name() const {
  if (naive) return "naive";
  if (use_context && use_pose && use_ems_knowledge) return "full";
  if (!use_context && use_pose && use_ems_knowledge) return "no-context";
  if (use_context && !use_pose && use_ems_knowledge) return "no-pose";
  if (use_context && use_pose && !use_ems_knowledge) return "no-ems";
  std::string n = "custom";
  if (!use_context) n += "-no-context";
  if (!use_pose) n += "-no-pose";
  if (!use_ems_knowledge) n += "-no-ems";
  return n;
}

namespace {

constexpr const char* kGenericRequest = "help me";

std::string call_stage(StageContext& sc, const std::string& stage, const PromptSlots& slots) {
  const auto prompt = render_prompt(stage, slots);
  ModelRequest req{sc.scenario, stage, sc.condition, prompt.system, prompt.user};
  std::string text;
  try {
    text = sc.client.complete(req);
  } catch (const Error& e) {
    throw Error(e.kind(), stage + ": " + e.what());
  }
  if (sc.transcript) sc.transcript->push_back({stage, sc.condition, prompt.system, prompt.user, text});
  return text;
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::string gestures_text(const KnowledgeBase& kb) {
  std::string out;
  for (const auto& g : kb.gestures) {
    out += std::string(to_string(g.handedness)) + " " + g.joint + " " + std::string(to_string(g.movement));
    if (!g.description.empty()) out += " (" + g.description + ")";
    out += '\n';
  }
  return out;
}

std::string limits_text(const KnowledgeBase& kb) {
  std::string out;
  for (const auto& [key, range] : kb.limits.entries()) {
    out += key.first + " " + std::string(to_string(positive_dof(key.second))) + "/" +
           std::string(to_string(negative_dof(key.second))) + ": " + format_number(range.min) + " to " +
           format_number(range.max) + "\n";
  }
  return out;
}

std::string chain_text(const KnowledgeBase& kb) {
  std::string out;
  for (const auto& j : kb.model.joints()) {
    if (j.parent.empty()) continue;
    out += j.id + " -> " + j.parent + "\n";
  }
  for (const auto& [key, targets] : kb.model.compat_map()) {
    out += key.first + " " + std::string(to_string(key.second)) + " continues as";
    for (std::size_t i = 0; i < targets.size(); ++i)
      out += (i ? ", " : " ") + targets[i].joint + " " + std::string(to_string(targets[i].dof));
    out += "\n";
  }
  return out;
}

std::string steps_text(const std::vector<MovementStep>& steps) {
  std::string out;
  for (const auto& s : steps) {
    out += std::to_string(s.ordinal) + ". " + s.description;
    if (!s.checkpoint.empty()) out += " [until: " + s.checkpoint + "]";
    out += '\n';
  }
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

template <typename F>
void for_each_line(std::string_view text, F&& f) {
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    f(text.substr(pos, nl - pos));
    if (nl == text.size()) break;
    pos = nl + 1;
  }
}

// "step 3:" (any case, optional space before the colon) -> 3. Text after the
// colon is a label and is ignored.
std::optional<int> step_header(std::string_view line) {
  const std::string l = to_lower(trim(line));
  if (l.rfind("step", 0) != 0) return std::nullopt;
  std::size_t i = 4;
  while (i < l.size() && l[i] == ' ') ++i;
  const std::size_t digits = i;
  while (i < l.size() && std::isdigit(static_cast<unsigned char>(l[i]))) ++i;
  if (i == digits || i - digits > 6) return std::nullopt;
  const int n = std::stoi(l.substr(digits, i - digits));
  while (i < l.size() && l[i] == ' ') ++i;
  if (i >= l.size() || l[i] != ':') return std::nullopt;
  return n;
}

}  // namespace

std::string generate_tutorial(const ContextBundle& ctx, const AblationFlags& flags, StageContext& sc) {
  PromptSlots slots;
  if (flags.use_context) {
    slots["request"] = ctx.request;
    if (ctx.location) slots["location"] = *ctx.location;
    slots["pov_facts"] = join(ctx.pov_facts, "; ");
    if (ctx.previous_output) slots["previous_output"] = *ctx.previous_output;
  } else {
    slots["request"] = kGenericRequest;
  }
  if (flags.use_ems_knowledge) slots["user_settings"] = ctx.user_settings;
  return call_stage(sc, "tutorial", slots);
}

std::vector<MovementStep> parse_movement_steps(std::string_view text) {
  std::vector<MovementStep> out;
  for_each_line(text, [&](std::string_view raw) {
    std::string line = trim(raw);
    std::size_t i = 0;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    if (i == 0 || i >= line.size() || (line[i] != '.' && line[i] != ')')) return;
    std::string body = trim(std::string_view(line).substr(i + 1));
    MovementStep step;
    const std::string lower = to_lower(body);
    if (auto u = lower.rfind("[until:"); u != std::string::npos) {
      const auto close = body.find(']', u);
      step.checkpoint = trim(std::string_view(body).substr(u + 7, close == std::string::npos ? std::string::npos
                                                                                             : close - u - 7));
      body = trim(std::string_view(body).substr(0, u));
    }
    if (body.empty()) return;
    step.description = body;
    step.ordinal = static_cast<int>(out.size()) + 1;
    out.push_back(std::move(step));
  });
  return out;
}

std::vector<MovementStep> generate_movement_steps(const std::string& tutorial, const ContextBundle& ctx,
                                                  const AblationFlags& flags, const KnowledgeBase& kb,
                                                  StageContext& sc) {
  if (trim(tutorial).empty()) throw Error(ErrorKind::Pipeline, "movements: empty tutorial");
  PromptSlots slots{{"tutorial", tutorial}};
  if (flags.use_pose) slots["pose"] = ctx.pose_text;
  if (flags.use_context) slots["pov_facts"] = join(ctx.pov_facts, "; ");
  if (flags.use_ems_knowledge) slots["dominant_hand"] = std::string(to_string(kb.profile.dominant_hand));
  const auto text = call_stage(sc, "movements", slots);
  auto steps = parse_movement_steps(text);
  if (steps.empty()) throw Error(ErrorKind::Pipeline, "movements: no numbered steps in model response");
  return steps;
}

void parse_stimulation_response(std::string_view text, std::vector<MovementStep>& steps, const KnowledgeBase& kb,
                                FormatReport& report) {
  std::size_t current = 0;  // index into steps; lines before any header go to the first step
  std::vector<bool> selected(steps.size(), false);
  for_each_line(text, [&](std::string_view raw) {
    std::string line = trim(raw);
    if (auto hash = line.find('#'); hash != std::string::npos) line = trim(std::string_view(line).substr(0, hash));
    if (line.empty()) return;
    if (auto n = step_header(line)) {
      if (*n < 1 || static_cast<std::size_t>(*n) > steps.size()) {
        report.violations.push_back({ViolationKind::Other, line, false, "no such step"});
        current = steps.size();
      } else {
        current = static_cast<std::size_t>(*n - 1);
      }
      return;
    }
    auto parsed = parse_instruction_line(line, kb.model, kb.profile.dominant_hand);
    if (current >= steps.size()) {
      report.violations.push_back({ViolationKind::Other, line, false, "instruction outside any step"});
      return;
    }
    report.append(parsed.report);
    if (!parsed.instruction) return;
    const auto& in = *parsed.instruction;
    const Side side = kb.model.resolve_side(in.joint, in.handedness);
    if (!kb.find_gesture(side, in.joint, in.movement)) {
      report.violations.push_back({ViolationKind::Other, line, false, "no knowledge-base gesture"});
      return;
    }
    steps[current].instructions.push_back(in);
    selected[current] = true;
  });
  for (std::size_t i = 0; i < steps.size(); ++i) steps[i].unrealizable = !selected[i];
}

std::vector<MovementStep> select_stimulations(const std::vector<MovementStep>& steps, const ContextBundle& ctx,
                                              const AblationFlags& flags, const KnowledgeBase& kb,
                                              StageContext& sc, FormatReport& report) {
  PromptSlots slots{{"steps", steps_text(steps)}, {"gestures", gestures_text(kb)}};
  if (flags.use_ems_knowledge) {
    slots["limits"] = limits_text(kb);
    slots["chain"] = chain_text(kb);
    slots["dominant_hand"] = std::string(to_string(kb.profile.dominant_hand));
    slots["user_settings"] = ctx.user_settings;
  }
  if (flags.use_pose) slots["pose"] = ctx.pose_text;
  const auto text = call_stage(sc, "stimulation", slots);
  auto out = steps;
  for (auto& s : out) s.instructions.clear();
  parse_stimulation_response(text, out, kb, report);
  return out;
}

std::vector<MovementStep> constrain_plan(const std::vector<MovementStep>& steps, const BodyPose& pose,
                                         const KnowledgeBase& kb, std::vector<ConstraintLogEntry>& log) {
  BodyPose predicted = pose;
  std::vector<MovementStep> out;
  for (const auto& step : steps) {
    MovementStep s = step;
    s.instructions.clear();
    for (const auto& instr : step.instructions) {
      auto outcome = constrain(instr, predicted, kb.limits, kb.model);
      if (outcome.verdict == Verdict::Accepted || outcome.verdict == Verdict::Adjusted) {
        for (const auto& e : outcome.instructions) {
          predicted = apply_completed(predicted, e, kb.limits, kb.model);
          s.instructions.push_back(e);
        }
      }
      log.push_back({step.ordinal, instr, std::move(outcome)});
    }
    if (s.instructions.empty()) s.unrealizable = true;
    out.push_back(std::move(s));
  }
  return out;
}

GenerationResult run_pipeline(const std::string& scenario_id, const ContextBundle& ctx, const AblationFlags& flags,
                              const KnowledgeBase& kb, const BodyPose& pose, ModelClient& client) {
  GenerationResult r;
  r.condition = flags.name();
  StageContext sc{client, scenario_id, r.condition, &r.transcript};

  if (flags.naive) {
    PromptSlots slots{{"request", kGenericRequest}, {"gestures", gestures_text(kb)}};
    const auto text = call_stage(sc, "naive", slots);
    // Step boundaries come from "step N:" headers when the model emits them.
    int headers = 0;
    for_each_line(text, [&](std::string_view l) {
      if (auto n = step_header(l)) headers = std::max(headers, *n);
    });
    for (int i = 1; i <= std::max(headers, 1); ++i) r.steps.push_back({i, "step " + std::to_string(i), {}, "", false});
    parse_stimulation_response(text, r.steps, kb, r.report);
    r.plan = r.steps;
    return r;
  }

  r.tutorial = generate_tutorial(ctx, flags, sc);
  auto steps = generate_movement_steps(r.tutorial, ctx, flags, kb, sc);
  r.steps = select_stimulations(steps, ctx, flags, kb, sc, r.report);
  if (flags.use_ems_knowledge) {
    r.plan = constrain_plan(r.steps, pose, kb, r.constraint_log);
  } else {
    r.plan = r.steps;
  }
  return r;
}

std::string plan_to_text(const std::vector<MovementStep>& plan) {
  std::string out;
  for (const auto& s : plan) {
    out += std::to_string(s.ordinal) + ". " + s.description;
    if (!s.checkpoint.empty()) out += " [until: " + s.checkpoint + "]";
    if (s.unrealizable) out += " (no EMS gesture; spoken only)";
    out += '\n';
    for (const auto& i : s.instructions) out += "   " + serialize_instruction(i) + '\n';
  }
  return out;
}

std::string plan_to_instruction_file(const std::vector<MovementStep>& plan) {
  std::string out;
  for (const auto& s : plan) {
    out += "# step " + std::to_string(s.ordinal) + ": " + s.description;
    if (s.unrealizable) out += " (unrealizable)";
    out += '\n';
    for (const auto& i : s.instructions) out += serialize_instruction(i) + '\n';
  }
  return out;
}

nlohmann::json to_json(const ConstraintLogEntry& e) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& i : e.outcome.instructions) out.push_back(serialize_instruction(i));
  return {{"step", e.step},
          {"input", serialize_instruction(e.input)},
          {"verdict", to_string(e.outcome.verdict)},
          {"explanation", e.outcome.explanation},
          {"output", out}};
}

nlohmann::json to_json(const GenerationResult& r) {
  nlohmann::json log = nlohmann::json::array();
  for (const auto& e : r.constraint_log) log.push_back(to_json(e));
  return {{"schema_version", 1},
          {"condition", r.condition},
          {"tutorial", r.tutorial},
          {"steps", to_json(std::span<const MovementStep>(r.steps))},
          {"plan", to_json(std::span<const MovementStep>(r.plan))},
          {"format_report", to_json(r.report)},
          {"constraint_log", log},
          {"transcript", to_json(r.transcript)}};
}

}  // namespace gems
