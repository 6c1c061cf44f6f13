#pragma once

#include <atomic>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "core/events.hpp"
#include "core/pipeline.hpp"
#include "core/scenario.hpp"

namespace gems {

enum class Phase : std::uint8_t { Idle, AwaitingConfirmation, Stimulating, Paused, Halted, Done };

enum class Verb : std::uint8_t {
  Help,
  Confirm,
  Repeat,
  RepeatStep,
  SlowDown,
  SpeedUp,
  Pause,
  Resume,
  Stop,
  ThinkAgain,
  SetStimulationMode,
  SetCompletionMode,
  UserSettings,
};

inline constexpr Phase kAllPhases[] = {Phase::Idle,   Phase::AwaitingConfirmation, Phase::Stimulating,
                                       Phase::Paused, Phase::Halted,               Phase::Done};
inline constexpr Verb kAllVerbs[] = {Verb::Help,     Verb::Confirm,           Verb::Repeat,
                                     Verb::RepeatStep, Verb::SlowDown,        Verb::SpeedUp,
                                     Verb::Pause,    Verb::Resume,            Verb::Stop,
                                     Verb::ThinkAgain, Verb::SetStimulationMode, Verb::SetCompletionMode,
                                     Verb::UserSettings};

std::string_view to_string(Phase p);
std::string_view to_string(Verb v);
std::optional<Verb> verb_from_string(std::string_view s);

struct Command {
  Verb verb = Verb::Help;
  std::string text;  // help request, think-again feedback, user settings
  int step = 0;      // repeat-step ordinal
  StimulationMode stimulation_mode = StimulationMode::Actuate;
  CompletionMode completion_mode = CompletionMode::Partial;
};

// Typed or spoken form: optional "EMS" wake word, then e.g. "help me open
// this", "confirm", "repeat step 2", "slow down", "think again, it did not
// open", "mode nudge", "completion full", "user settings: weak grasp".
std::optional<Command> parse_command(std::string_view text, std::string* error = nullptr);
// {"verb": "...", "text"?, "step"?, "mode"?} as posted to the service.
std::optional<Command> command_from_json(const nlohmann::json& j, std::string* error = nullptr);
nlohmann::json to_json(const Command& c);

enum class CheckerKind : std::uint8_t { MovingExpected, Stalled, Opposed };
std::string_view to_string(CheckerKind k);

struct CheckerVerdict {
  CheckerKind kind = CheckerKind::MovingExpected;
  double delta = 0.0;      // signed movement since the anchor, + is the instruction direction
  double window_ms = 0.0;  // time since the anchor
};

// Classifies movement since the anchor. `stalled_ms` already includes the
// current tick.
CheckerVerdict classify_motion(double signed_delta, double threshold, double stalled_ms, double stall_window_ms);

// Result of the transition table for one (phase, verb) pair, before
// data-dependent guards (a previous plan for think-again, the full-mode
// unrealizable check for confirm).
struct TransitionRule {
  bool accepted = false;
  std::optional<Phase> next;  // nullopt: phase unchanged
};
TransitionRule transition_rule(Phase phase, Verb verb);

inline constexpr double kSpeedMin = 0.25;
inline constexpr double kSpeedMax = 4.0;

struct ActiveInstruction {
  MotionCommand motion;
  double anchor_angle = 0.0;
  double stalled_ms = 0.0;
  double elapsed_ms = 0.0;
  double duration_ms = 1000.0;
  bool sub_motor = false;
  CheckerKind last_verdict = CheckerKind::MovingExpected;
};

struct SessionState {
  Phase phase = Phase::Idle;
  std::vector<MovementStep> plan;
  std::size_t step = 0;
  std::size_t instruction = 0;
  bool step_started = false;
  std::vector<int> executions;  // per step
  StimulationMode stimulation_mode = StimulationMode::Actuate;
  CompletionMode completion_mode = CompletionMode::Partial;
  double speed = 1.0;
  BodyPose body;
  double clock_ms = 0.0;
  std::optional<ActiveInstruction> active;
  ContextBundle context;
  std::optional<GenerationResult> last_result;
  int plans = 0;  // plans generated so far
};

// Single-writer engine: tick() advances the simulation; submit() may be
// called from any thread. Commands are drained at the start of each tick;
// stop is applied immediately.
class Session {
 public:
  Session(Scenario scenario, std::shared_ptr<ModelClient> client);

  // Returns a ticket; the command has been applied once processed() >= it.
  std::uint64_t submit(Command cmd);
  void tick(double dt_ms);
  std::uint64_t processed() const { return processed_.load(); }

  SessionState state() const;
  Phase phase() const;
  nlohmann::json snapshot() const;
  const EventLog& events() const { return events_; }
  const Scenario& scenario() const { return scenario_; }
  std::string announce_plan() const;

 private:
  void apply(const Command& cmd);
  void apply_stop(const std::string& reason);
  void set_phase(Phase next, const std::string& reason);
  void emit(std::string type, nlohmann::json data);
  void noop(const Command& cmd, const std::string& reason);

  void plan_request(const std::string& request, std::optional<std::string> previous_output);
  void load_plan(GenerationResult result);
  bool plan_has_unrealizable() const;

  void advance(double dt_ms);
  void start_instruction();
  void finish_instruction(const std::string& how);
  void finish_step();
  void checkpoint();
  void step_failed(const std::string& why);
  void move_to_step(std::size_t index);
  BodyReaction reaction_for(const MovementStep& step) const;
  nlohmann::json settings_json() const;
  std::string summarize(const std::vector<MovementStep>& plan, CompletionMode mode) const;

  Scenario scenario_;
  std::shared_ptr<const KnowledgeBase> kb_;
  std::shared_ptr<ModelClient> client_;
  EventLog events_;

  mutable std::mutex state_mu_;
  SessionState st_;

  std::mutex queue_mu_;
  std::deque<Command> queue_;
  std::uint64_t submitted_ = 0;
  std::atomic<std::uint64_t> processed_{0};
};

}  // namespace gems
