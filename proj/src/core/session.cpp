#include "core/session.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "core/knowledge_base.hpp"
#include "core/prompts.hpp"

namespace gems {

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Idle: return "idle";
    case Phase::AwaitingConfirmation: return "awaiting-confirmation";
    case Phase::Stimulating: return "stimulating";
    case Phase::Paused: return "paused";
    case Phase::Halted: return "halted";
    case Phase::Done: return "done";
  }
  return "";
}

std::string_view to_string(Verb v) {
  switch (v) {
    case Verb::Help: return "help";
    case Verb::Confirm: return "confirm";
    case Verb::Repeat: return "repeat";
    case Verb::RepeatStep: return "repeat-step";
    case Verb::SlowDown: return "slow-down";
    case Verb::SpeedUp: return "speed-up";
    case Verb::Pause: return "pause";
    case Verb::Resume: return "resume";
    case Verb::Stop: return "stop";
    case Verb::ThinkAgain: return "think-again";
    case Verb::SetStimulationMode: return "set-stimulation-mode";
    case Verb::SetCompletionMode: return "set-completion-mode";
    case Verb::UserSettings: return "user-settings";
  }
  return "";
}

std::optional<Verb> verb_from_string(std::string_view s) {
  for (Verb v : kAllVerbs)
    if (to_string(v) == s) return v;
  if (s == "continue") return Verb::Confirm;
  return std::nullopt;
}

std::string_view to_string(CheckerKind k) {
  switch (k) {
    case CheckerKind::MovingExpected: return "moving-expected";
    case CheckerKind::Stalled: return "stalled";
    case CheckerKind::Opposed: return "opposed";
  }
  return "";
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

// Text after `prefix` in the original-case string, without separators.
std::string rest_after(const std::string& original, std::size_t prefix_len) {
  std::string r = trim(std::string_view(original).substr(std::min(prefix_len, original.size())));
  while (!r.empty() && (r.front() == ':' || r.front() == ',' || r.front() == '-')) r = trim(r.substr(1));
  return r;
}

}  // namespace

std::optional<Command> parse_command(std::string_view text, std::string* error) {
  std::string original = trim(text);
  // Optional wake word.
  if (original.size() >= 3 && to_lower(original.substr(0, 3)) == "ems" &&
      (original.size() == 3 || !std::isalnum(static_cast<unsigned char>(original[3])))) {
    original = trim(std::string_view(original).substr(3));
    while (!original.empty() && (original.front() == ',' || original.front() == ':')) original = trim(original.substr(1));
  }
  while (!original.empty() && (original.back() == '.' || original.back() == '!' || original.back() == '?'))
    original.pop_back();
  original = trim(original);
  // Same length as `original`, so prefix lengths carry over.
  std::string norm = to_lower(original);
  std::replace(norm.begin(), norm.end(), '-', ' ');
  std::replace(norm.begin(), norm.end(), '_', ' ');

  auto fail = [&](std::string msg) -> std::optional<Command> {
    if (error) *error = std::move(msg);
    return std::nullopt;
  };
  if (norm.empty()) return fail("empty command");

  Command c;
  auto mode_word = [&](std::size_t prefix_len) { return trim(std::string_view(norm).substr(prefix_len)); };

  if (norm == "stop" || norm == "halt") c.verb = Verb::Stop;
  else if (norm == "pause") c.verb = Verb::Pause;
  else if (norm == "resume") c.verb = Verb::Resume;
  else if (norm == "confirm" || norm == "continue" || norm == "yes" || norm == "ok" || norm == "go" || norm == "start")
    c.verb = Verb::Confirm;
  else if (norm == "slow down" || norm == "slower") c.verb = Verb::SlowDown;
  else if (norm == "speed up" || norm == "faster") c.verb = Verb::SpeedUp;
  else if (starts_with(norm, "repeat step")) {
    const auto n = mode_word(11);
    if (n.empty() || n.size() > 6 || !std::all_of(n.begin(), n.end(), ::isdigit))
      return fail("repeat step needs a step number");
    c.verb = Verb::RepeatStep;
    c.step = std::stoi(n);
  } else if (norm == "repeat") c.verb = Verb::Repeat;
  else if (starts_with(norm, "think again")) {
    c.verb = Verb::ThinkAgain;
    c.text = rest_after(original, 11);
  } else if (norm.find("try something different") != std::string::npos ||
             norm.find("try something else") != std::string::npos) {
    c.verb = Verb::ThinkAgain;
    c.text = original;
  } else if (starts_with(norm, "set stimulation mode") || starts_with(norm, "stimulation mode") ||
             starts_with(norm, "mode ")) {
    const std::size_t len = starts_with(norm, "set") ? 20 : starts_with(norm, "stim") ? 16 : 5;
    auto m = stimulation_mode_from_string(mode_word(len));
    if (!m) return fail("stimulation mode must be actuate, nudge or tactile");
    c.verb = Verb::SetStimulationMode;
    c.stimulation_mode = *m;
  } else if (starts_with(norm, "set completion mode") || starts_with(norm, "completion mode") ||
             starts_with(norm, "completion ")) {
    const std::size_t len = starts_with(norm, "set") ? 19 : starts_with(norm, "completion mode") ? 15 : 11;
    auto m = completion_mode_from_string(mode_word(len));
    if (!m) return fail("completion mode must be partial or full");
    c.verb = Verb::SetCompletionMode;
    c.completion_mode = *m;
  } else if (starts_with(norm, "user settings")) {
    c.verb = Verb::UserSettings;
    c.text = rest_after(original, 13);
    if (c.text.empty()) return fail("user settings need text");
  } else if (starts_with(norm, "help")) {
    c.verb = Verb::Help;
    c.text = original;
  } else {
    return fail("unrecognized command '" + original + "'");
  }
  return c;
}

std::optional<Command> command_from_json(const nlohmann::json& j, std::string* error) {
  auto fail = [&](std::string msg) -> std::optional<Command> {
    if (error) *error = std::move(msg);
    return std::nullopt;
  };
  if (!j.is_object()) return fail("expected a JSON object");
  if (j.contains("text") && !j.contains("verb")) {
    if (!j["text"].is_string()) return fail("'text' must be a string");
    return parse_command(j["text"].get<std::string>(), error);
  }
  if (!j.contains("verb") || !j["verb"].is_string()) return fail("missing 'verb'");
  auto verb = verb_from_string(j["verb"].get<std::string>());
  if (!verb) return fail("unknown verb '" + j["verb"].get<std::string>() + "'");
  Command c;
  c.verb = *verb;
  if (j.contains("text") && j["text"].is_string()) c.text = j["text"].get<std::string>();
  if (c.verb == Verb::RepeatStep) {
    if (!j.contains("step") || !j["step"].is_number_integer()) return fail("repeat-step needs an integer 'step'");
    c.step = j["step"].get<int>();
  }
  if (c.verb == Verb::SetStimulationMode || c.verb == Verb::SetCompletionMode) {
    if (!j.contains("mode") || !j["mode"].is_string()) return fail("missing 'mode'");
    const auto m = j["mode"].get<std::string>();
    if (c.verb == Verb::SetStimulationMode) {
      auto sm = stimulation_mode_from_string(m);
      if (!sm) return fail("stimulation mode must be actuate, nudge or tactile");
      c.stimulation_mode = *sm;
    } else {
      auto cm = completion_mode_from_string(m);
      if (!cm) return fail("completion mode must be partial or full");
      c.completion_mode = *cm;
    }
  }
  if (c.verb == Verb::UserSettings && c.text.empty()) return fail("user-settings needs 'text'");
  return c;
}

nlohmann::json to_json(const Command& c) {
  nlohmann::json j{{"verb", to_string(c.verb)}};
  if (!c.text.empty()) j["text"] = c.text;
  if (c.verb == Verb::RepeatStep) j["step"] = c.step;
  if (c.verb == Verb::SetStimulationMode) j["mode"] = to_string(c.stimulation_mode);
  if (c.verb == Verb::SetCompletionMode) j["mode"] = to_string(c.completion_mode);
  return j;
}

CheckerVerdict classify_motion(double signed_delta, double threshold, double stalled_ms, double stall_window_ms) {
  CheckerVerdict v{CheckerKind::MovingExpected, signed_delta, stalled_ms};
  if (signed_delta <= -threshold) v.kind = CheckerKind::Opposed;
  else if (std::abs(signed_delta) < threshold && stalled_ms >= stall_window_ms) v.kind = CheckerKind::Stalled;
  return v;
}

TransitionRule transition_rule(Phase phase, Verb verb) {
  const bool running = phase == Phase::Stimulating || phase == Phase::Paused;
  switch (verb) {
    case Verb::Help:
      if (running) return {};
      return {true, Phase::AwaitingConfirmation};
    case Verb::Confirm:
      if (phase == Phase::AwaitingConfirmation || phase == Phase::Paused) return {true, Phase::Stimulating};
      return {};
    case Verb::Repeat:
    case Verb::RepeatStep:
      if (running) return {true, std::nullopt};
      return {};
    case Verb::Pause:
      if (phase == Phase::Stimulating) return {true, Phase::Paused};
      return {};
    case Verb::Resume:
      if (phase == Phase::Paused) return {true, Phase::Stimulating};
      return {};
    case Verb::Stop: return {true, Phase::Halted};
    case Verb::ThinkAgain:
      if (phase == Phase::Idle) return {};
      return {true, Phase::AwaitingConfirmation};
    case Verb::SlowDown:
    case Verb::SpeedUp:
    case Verb::SetStimulationMode:
    case Verb::SetCompletionMode:
    case Verb::UserSettings: return {true, std::nullopt};
  }
  return {};
}

Session::Session(Scenario scenario, std::shared_ptr<ModelClient> client)
    : scenario_(std::move(scenario)), kb_(scenario_.kb), client_(std::move(client)) {
  if (!kb_) throw Error(ErrorKind::InvalidArgument, "session needs a loaded knowledge base");
  if (!client_) throw Error(ErrorKind::InvalidArgument, "session needs a model client");
  std::lock_guard lock(state_mu_);
  st_.body = scenario_.pose;
  st_.context = scenario_.context;
  st_.stimulation_mode = scenario_.session.stimulation_mode;
  st_.completion_mode = scenario_.session.completion_mode;
  emit("session", {{"scenario", scenario_.id},
                   {"condition", scenario_.flags.name()},
                   {"request", st_.context.request},
                   {"settings", settings_json()}});
}

void Session::emit(std::string type, nlohmann::json data) { events_.append(std::move(type), std::move(data), st_.clock_ms); }

void Session::set_phase(Phase next, const std::string& reason) {
  if (st_.phase == next) return;
  const Phase prev = st_.phase;
  st_.phase = next;
  if (next == Phase::Halted || next == Phase::Done || next == Phase::AwaitingConfirmation || next == Phase::Idle)
    st_.active.reset();
  emit("phase", {{"from", to_string(prev)}, {"to", to_string(next)}, {"reason", reason}});
}

void Session::noop(const Command& cmd, const std::string& reason) {
  emit("noop", {{"verb", to_string(cmd.verb)}, {"phase", to_string(st_.phase)}, {"reason", reason}});
}

nlohmann::json Session::settings_json() const {
  return {{"speed", st_.speed},
          {"stimulation_mode", to_string(st_.stimulation_mode)},
          {"completion_mode", to_string(st_.completion_mode)},
          {"user_settings", st_.context.user_settings}};
}

std::uint64_t Session::submit(Command cmd) {
  std::unique_lock qlock(queue_mu_);
  const std::uint64_t ticket = ++submitted_;
  if (cmd.verb == Verb::Stop) {
    // Stop jumps the queue; commands queued before it are still applied
    // afterwards and meet a halted session.
    qlock.unlock();
    std::lock_guard lock(state_mu_);
    emit("command", to_json(cmd));
    apply_stop("stop command");
    ++processed_;
    return ticket;
  }
  queue_.push_back(std::move(cmd));
  return ticket;
}

void Session::tick(double dt_ms) {
  std::deque<Command> pending;
  {
    std::lock_guard lock(queue_mu_);
    pending.swap(queue_);
  }
  std::lock_guard lock(state_mu_);
  for (const auto& c : pending) {
    emit("command", to_json(c));
    apply(c);
    ++processed_;
  }
  if (dt_ms <= 0) return;
  st_.clock_ms += dt_ms;
  if (st_.phase == Phase::Stimulating) advance(dt_ms);
}

SessionState Session::state() const {
  std::lock_guard lock(state_mu_);
  return st_;
}

Phase Session::phase() const {
  std::lock_guard lock(state_mu_);
  return st_.phase;
}

void Session::apply_stop(const std::string& reason) {
  st_.active.reset();
  set_phase(Phase::Halted, reason);
}

bool Session::plan_has_unrealizable() const {
  return std::any_of(st_.plan.begin(), st_.plan.end(),
                     [](const MovementStep& s) { return s.unrealizable || s.instructions.empty(); });
}

void Session::apply(const Command& cmd) {
  const auto rule = transition_rule(st_.phase, cmd.verb);
  if (!rule.accepted) {
    noop(cmd, std::string("not available while ") + std::string(to_string(st_.phase)));
    return;
  }
  const int cap = scenario_.session.repeat_cap;
  switch (cmd.verb) {
    case Verb::Help: {
      const std::string request = cmd.text.empty() ? st_.context.request : cmd.text;
      plan_request(request, std::nullopt);
      break;
    }
    case Verb::Confirm:
      if (st_.phase == Phase::Paused) {
        set_phase(Phase::Stimulating, "continued");
        break;
      }
      if (st_.completion_mode == CompletionMode::Full && plan_has_unrealizable()) {
        noop(cmd, "full completion mode: the plan has a step without an EMS counterpart");
        break;
      }
      move_to_step(0);
      set_phase(Phase::Stimulating, "confirmed");
      break;
    case Verb::Repeat:
    case Verb::RepeatStep: {
      const std::size_t target = cmd.verb == Verb::Repeat ? st_.step : static_cast<std::size_t>(cmd.step - 1);
      if (cmd.verb == Verb::RepeatStep && (cmd.step < 1 || target >= st_.plan.size())) {
        noop(cmd, "no step " + std::to_string(cmd.step));
        break;
      }
      if (target >= st_.plan.size()) {
        noop(cmd, "no current step");
        break;
      }
      if (st_.executions[target] >= cap) {
        noop(cmd, "step " + std::to_string(target + 1) + " already ran " + std::to_string(cap) + " times");
        break;
      }
      move_to_step(target);
      emit("step", {{"ordinal", target + 1}, {"event", "rewound"}});
      break;
    }
    case Verb::SlowDown:
    case Verb::SpeedUp:
      st_.speed = std::clamp(st_.speed * (cmd.verb == Verb::SlowDown ? 0.5 : 2.0), kSpeedMin, kSpeedMax);
      emit("settings", settings_json());
      break;
    case Verb::Pause: set_phase(Phase::Paused, "paused"); break;
    case Verb::Resume: set_phase(Phase::Stimulating, "resumed"); break;
    case Verb::Stop: apply_stop("stop command"); break;
    case Verb::ThinkAgain: {
      if (!st_.last_result) {
        noop(cmd, "no previous plan to reconsider");
        break;
      }
      std::string previous = plan_to_text(st_.last_result->plan);
      if (!cmd.text.empty()) previous += "User feedback: " + cmd.text + "\n";
      plan_request(st_.context.request, previous);
      break;
    }
    case Verb::SetStimulationMode:
      st_.stimulation_mode = cmd.stimulation_mode;
      if (st_.active) st_.active.reset();  // restart the instruction at the new intensity
      emit("settings", settings_json());
      break;
    case Verb::SetCompletionMode:
      st_.completion_mode = cmd.completion_mode;
      emit("settings", settings_json());
      if (cmd.completion_mode == CompletionMode::Full &&
          (st_.phase == Phase::Stimulating || st_.phase == Phase::Paused) && plan_has_unrealizable())
        apply_stop("full completion mode: the plan has a step without an EMS counterpart");
      break;
    case Verb::UserSettings:
      st_.context.user_settings += (st_.context.user_settings.empty() ? "" : "; ") + cmd.text;
      emit("settings", settings_json());
      break;
  }
}

void Session::plan_request(const std::string& request, std::optional<std::string> previous_output) {
  ContextBundle ctx = st_.context;
  ctx.request = request;
  ctx.previous_output = std::move(previous_output);
  ctx.pose_text = pose_to_text(st_.body, kb_->model);
  st_.active.reset();
  try {
    auto result = run_pipeline(scenario_.id, ctx, scenario_.flags, *kb_, st_.body, *client_);
    st_.context.request = request;
    load_plan(std::move(result));
  } catch (const std::exception& e) {
    emit("warning", {{"message", std::string("generation failed: ") + e.what()}});
    emit("announcement", {{"text", "I could not generate instructions for this request."}});
    set_phase(Phase::Idle, "generation failed");
  }
}

void Session::load_plan(GenerationResult result) {
  st_.plan = result.plan;
  st_.executions.assign(st_.plan.size(), 0);
  move_to_step(0);
  nlohmann::json stopped = nlohmann::json::array();
  for (const auto& e : result.constraint_log)
    if (e.outcome.verdict == Verdict::StoppedImpossible || e.outcome.verdict == Verdict::StoppedMaxed)
      stopped.push_back(to_json(e));
  emit("plan", {{"condition", result.condition},
                {"steps", to_json(std::span<const MovementStep>(st_.plan))},
                {"stopped", stopped},
                {"format_violations", result.report.size()},
                {"revision", ++st_.plans}});
  st_.last_result = std::move(result);
  emit("announcement", {{"text", summarize(st_.plan, st_.completion_mode)}});
  set_phase(Phase::AwaitingConfirmation, "plan ready");
}

std::string Session::summarize(const std::vector<MovementStep>& plan, CompletionMode mode) const {
  std::vector<std::string> groups, joints;
  for (const auto& s : plan) {
    for (const auto& i : s.instructions) {
      if (std::find(joints.begin(), joints.end(), i.joint) == joints.end()) joints.push_back(i.joint);
      const auto* spec = kb_->model.find(i.joint);
      const std::string g = spec ? spec->group : i.joint;
      if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
    }
  }
  if (joints.empty()) return "I found no feasible EMS instructions for this task.";
  std::string out = "I will move ";
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (i) out += i + 1 == groups.size() ? " and " : ", ";
    out += groups[i];
  }
  out += " (";
  for (std::size_t i = 0; i < joints.size(); ++i) out += (i ? ", " : "") + joints[i];
  out += ").";
  for (const auto& s : plan) {
    if (!(s.unrealizable || s.instructions.empty())) continue;
    if (mode == CompletionMode::Full)
      out += " Step " + std::to_string(s.ordinal) + " (" + s.description +
             ") has no EMS counterpart, so I cannot run this plan in full completion mode.";
    else
      out += " I will only say step " + std::to_string(s.ordinal) + ": " + s.description + ".";
  }
  out += " Say confirm to start.";
  return out;
}

std::string Session::announce_plan() const {
  std::lock_guard lock(state_mu_);
  return summarize(st_.plan, st_.completion_mode);
}

void Session::move_to_step(std::size_t index) {
  st_.step = index;
  st_.instruction = 0;
  st_.step_started = false;
  st_.active.reset();
}

BodyReaction Session::reaction_for(const MovementStep& step) const {
  const std::string desc = to_lower(step.description);
  for (const auto& r : scenario_.session.body)
    if (r.step_contains.empty() || desc.find(to_lower(r.step_contains)) != std::string::npos) return r.reaction;
  return BodyReaction::Comply;
}

void Session::advance(double dt_ms) {
  // Instantaneous transitions (spoken-only steps, checkpoints) cascade within
  // one tick; at most one motion update happens per tick.
  for (int guard = 0; guard < 10000 && st_.phase == Phase::Stimulating; ++guard) {
    if (st_.step >= st_.plan.size()) {
      emit("announcement", {{"text", "All steps are done."}});
      set_phase(Phase::Done, "plan complete");
      return;
    }
    const auto& s = st_.plan[st_.step];
    if (!st_.step_started) {
      if (s.unrealizable || s.instructions.empty()) {
        if (st_.completion_mode == CompletionMode::Full) {
          apply_stop("step " + std::to_string(s.ordinal) + " has no EMS counterpart");
          return;
        }
        emit("step", {{"ordinal", s.ordinal}, {"event", "spoken"}, {"description", s.description}});
        emit("announcement", {{"text", "Please do this yourself: " + s.description}});
        move_to_step(st_.step + 1);
        continue;
      }
      // Any route back into a step (next, goto, rewind) meets the cap here.
      if (st_.executions[st_.step] >= scenario_.session.repeat_cap) {
        step_failed("repeat cap of " + std::to_string(scenario_.session.repeat_cap) + " reached");
        continue;
      }
      st_.step_started = true;
      ++st_.executions[st_.step];
      emit("step", {{"ordinal", s.ordinal},
                    {"event", "started"},
                    {"execution", st_.executions[st_.step]},
                    {"description", s.description}});
    }
    if (!st_.active) {
      start_instruction();
      if (!st_.active) continue;
    }

    auto& a = *st_.active;
    const auto axis = axis_of(a.motion.dof);
    const double prev = st_.body.angle(a.motion.side, a.motion.joint, axis);
    const double motion_dt = dt_ms * st_.speed;
    switch (reaction_for(s)) {
      case BodyReaction::Comply:
        st_.body = apply_simulated_motion(st_.body, a.motion, motion_dt, scenario_.session.response, kb_->limits);
        break;
      case BodyReaction::Freeze: st_.body.timestamp_ms += motion_dt; break;
      case BodyReaction::Resist: {
        MotionCommand back = a.motion;
        const auto& range = kb_->limits.at(a.motion.joint, axis);
        back.goal_angle = direction_of(a.motion.dof) > 0 ? range.min : range.max;
        back.drive = 1.0;
        SimResponseConfig voluntary = scenario_.session.response;
        voluntary.motor_threshold = 0.0;
        st_.body = apply_simulated_motion(st_.body, back, motion_dt, voluntary, kb_->limits);
        break;
      }
    }
    const double cur = st_.body.angle(a.motion.side, a.motion.joint, axis);
    if (cur != prev)
      emit("pose", {{"side", to_string(a.motion.side)},
                    {"joint", a.motion.joint},
                    {"axis", to_string(axis)},
                    {"angle", cur}});

    a.elapsed_ms += dt_ms;
    const double threshold = kb_->profile.stall_threshold_deg;
    const double signed_delta = (cur - a.anchor_angle) * direction_of(a.motion.dof);
    const double stalled = std::abs(signed_delta) >= threshold ? 0.0 : a.stalled_ms + dt_ms;
    const auto verdict = classify_motion(signed_delta, threshold, stalled, scenario_.session.stall_window_ms);
    auto report = [&](const CheckerVerdict& v) {
      emit("checker", {{"verdict", to_string(v.kind)},
                       {"delta", v.delta},
                       {"window_ms", v.window_ms},
                       {"ordinal", s.ordinal},
                       {"instruction", st_.instruction}});
    };

    if (verdict.kind == CheckerKind::Opposed) {
      report(verdict);
      emit("announcement", {{"text", "You moved against the stimulation, so I stopped."}});
      apply_stop("user opposed the movement");
      return;
    }
    if (!a.sub_motor && std::abs(a.motion.goal_angle - cur) <= scenario_.session.response.reach_tolerance_deg) {
      finish_instruction("completed");
      return;
    }
    if (a.sub_motor) {
      if (a.elapsed_ms >= a.duration_ms) finish_instruction("completed");
      return;
    }
    if (std::abs(signed_delta) >= threshold) {
      a.anchor_angle = cur;
      a.stalled_ms = 0.0;
    } else {
      a.stalled_ms = stalled;
    }
    if (verdict.kind != a.last_verdict) {
      a.last_verdict = verdict.kind;
      report(verdict);
    }
    if (verdict.kind == CheckerKind::Stalled) {
      if (st_.completion_mode == CompletionMode::Partial) {
        emit("announcement", {{"text", "No movement detected, skipping this instruction."}});
        finish_instruction("skipped");
      } else {
        apply_stop("no movement in full completion mode");
      }
    }
    return;
  }
}

void Session::start_instruction() {
  const auto& s = st_.plan[st_.step];
  const auto& instr = s.instructions[st_.instruction];
  const Side side = kb_->model.resolve_side(instr.joint, instr.handedness);
  const auto* gesture = kb_->find_gesture(side, instr.joint, instr.movement);

  double drive = 1.0;
  double amplitude = 0.0;
  switch (st_.stimulation_mode) {
    case StimulationMode::Actuate: drive = 1.0; break;
    case StimulationMode::Nudge: drive = kb_->profile.nudge_fraction; break;
    case StimulationMode::Tactile: drive = kb_->profile.tactile_fraction; break;
  }
  StimParams params = instr.params ? *instr.params : gesture ? gesture->params : StimParams{};
  if (gesture && !gesture->channels.empty()) {
    const auto& ch = gesture->channels.front();
    const double max = kb_->profile.channel_max_ma.count(ch) ? kb_->profile.channel_max_ma.at(ch) : 0.0;
    amplitude = effective_amplitude(kb_->profile, ch, st_.stimulation_mode);
    drive = max > 0 ? amplitude / max : 0.0;
  }
  if (!instr.params) params.amplitude_ma = amplitude;

  ActiveInstruction a;
  a.motion = motion_for(instr, st_.body, kb_->limits, kb_->model, drive);
  a.anchor_angle = st_.body.angle(a.motion.side, a.motion.joint, axis_of(a.motion.dof));
  a.duration_ms = params.duration_ms;
  a.sub_motor = drive < scenario_.session.response.motor_threshold;
  st_.active = a;
  emit("instruction", {{"ordinal", s.ordinal},
                       {"index", st_.instruction},
                       {"event", "started"},
                       {"text", serialize_instruction(instr)},
                       {"mode", to_string(st_.stimulation_mode)},
                       {"drive", drive},
                       {"amplitude_ma", params.amplitude_ma},
                       {"frequency_hz", params.frequency_hz},
                       {"pulse_width_us", params.pulse_width_us},
                       {"goal", a.motion.goal_angle}});
  if (!a.sub_motor &&
      std::abs(a.motion.goal_angle - a.anchor_angle) <= scenario_.session.response.reach_tolerance_deg)
    finish_instruction("completed");
}

void Session::finish_instruction(const std::string& how) {
  const auto& s = st_.plan[st_.step];
  emit("instruction", {{"ordinal", s.ordinal},
                       {"index", st_.instruction},
                       {"event", how},
                       {"text", serialize_instruction(s.instructions[st_.instruction])}});
  st_.active.reset();
  ++st_.instruction;
  if (st_.instruction >= s.instructions.size()) finish_step();
}

void Session::finish_step() {
  const auto& s = st_.plan[st_.step];
  emit("step", {{"ordinal", s.ordinal}, {"event", "completed"}, {"execution", st_.executions[st_.step]}});
  scenario_.world.on_step_completed(s);
  if (s.checkpoint.empty()) {
    move_to_step(st_.step + 1);
    return;
  }
  checkpoint();
}

void Session::step_failed(const std::string& why) {
  const auto& s = st_.plan[st_.step];
  emit("step", {{"ordinal", s.ordinal}, {"event", "failed"}, {"reason", why}});
  emit("announcement", {{"text", "Step " + std::to_string(s.ordinal) + " did not reach its goal after " +
                                     std::to_string(st_.executions[st_.step]) + " attempts."}});
  if (st_.completion_mode == CompletionMode::Full) {
    apply_stop("step " + std::to_string(s.ordinal) + " failed");
    return;
  }
  move_to_step(st_.step + 1);
}

void Session::checkpoint() {
  const auto& s = st_.plan[st_.step];
  const int cap = scenario_.session.repeat_cap;
  const std::string facts = scenario_.world.facts_text();

  std::string answer;
  std::string decision = "next";
  std::optional<std::size_t> target;
  try {
    const auto prompt = render_prompt("checkpoint", {{"plan", plan_to_text(st_.plan)},
                                                     {"step", std::to_string(s.ordinal) + ". " + s.description},
                                                     {"condition", s.checkpoint},
                                                     {"facts", facts}});
    answer = client_->complete({scenario_.id, "checkpoint", scenario_.flags.name(), prompt.system, prompt.user});
    const std::string a = to_lower(trim(answer));
    if (starts_with(a, "repeat")) {
      decision = "repeat";
    } else if (starts_with(a, "next") || starts_with(a, "continue") || starts_with(a, "advance")) {
      decision = "next";
    } else if (starts_with(a, "done") || starts_with(a, "finish")) {
      decision = "done";
    } else {
      std::size_t i = 0;
      while (i < a.size() && !std::isdigit(static_cast<unsigned char>(a[i]))) ++i;
      std::size_t j = i;
      while (j < a.size() && std::isdigit(static_cast<unsigned char>(a[j]))) ++j;
      if ((starts_with(a, "goto") || starts_with(a, "go to") || starts_with(a, "step")) && j > i && j - i <= 6) {
        decision = "goto";
        target = static_cast<std::size_t>(std::max(0, std::stoi(a.substr(i, j - i)) - 1));
      } else {
        emit("warning", {{"message", "unreadable checkpoint answer, advancing: " + trim(answer)}});
      }
    }
  } catch (const std::exception& e) {
    emit("warning", {{"message", std::string("checkpoint failed, advancing: ") + e.what()}});
  }

  emit("checkpoint", {{"ordinal", s.ordinal},
                      {"condition", s.checkpoint},
                      {"facts", facts},
                      {"decision", decision},
                      {"target", target ? nlohmann::json(*target + 1) : nlohmann::json(nullptr)},
                      {"execution", st_.executions[st_.step]}});

  if (decision == "goto" && target && *target == st_.step) decision = "repeat";
  if (decision == "done") {
    for (std::size_t k = st_.step + 1; k < st_.plan.size(); ++k)
      emit("step", {{"ordinal", st_.plan[k].ordinal}, {"event", "skipped"}, {"reason", "task already done"}});
    move_to_step(st_.plan.size());
    return;
  }
  if (decision == "repeat") {
    if (st_.executions[st_.step] >= cap) {
      step_failed("repeat cap of " + std::to_string(cap) + " reached");
      return;
    }
    move_to_step(st_.step);
    return;
  }
  if (decision == "goto" && target) {
    if (*target < st_.step && st_.executions[*target] >= cap) {
      step_failed("repeat cap of " + std::to_string(cap) + " reached for step " + std::to_string(*target + 1));
      return;
    }
    for (std::size_t k = st_.step + 1; k < std::min(*target, st_.plan.size()); ++k)
      emit("step", {{"ordinal", st_.plan[k].ordinal}, {"event", "skipped"}, {"reason", "already achieved"}});
    move_to_step(std::min(*target, st_.plan.size()));
    return;
  }
  move_to_step(st_.step + 1);
}

nlohmann::json Session::snapshot() const {
  std::lock_guard lock(state_mu_);
  nlohmann::json cursor{{"step", st_.step + 1}, {"instruction", st_.instruction}};
  return {{"scenario", scenario_.id},
          {"condition", scenario_.flags.name()},
          {"phase", to_string(st_.phase)},
          {"request", st_.context.request},
          {"plan", to_json(std::span<const MovementStep>(st_.plan))},
          {"cursor", cursor},
          {"executions", st_.executions},
          {"settings", settings_json()},
          {"pose", pose_to_json(st_.body)},
          {"pose_text", pose_to_text(st_.body, kb_->model)},
          {"facts", scenario_.world.facts()},
          {"clock_ms", st_.clock_ms},
          {"last_seq", events_.last_seq()}};
}

}  // namespace gems
