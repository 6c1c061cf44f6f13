#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "core/body_model.hpp"
#include "core/instruction.hpp"
#include "core/kinematics.hpp"
#include "core/model_client.hpp"

namespace gems {

// What the system knows about the request. Scene facts stand in for the
// camera and object detectors.
struct ContextBundle {
  std::string request;
  std::optional<std::string> location;
  std::vector<std::string> pov_facts;
  std::optional<std::string> previous_output;
  std::string pose_text;
  std::string user_settings;

  bool operator==(const ContextBundle&) const = default;
};

struct AblationFlags {
  bool use_context = true;
  bool use_pose = true;
  bool use_ems_knowledge = true;
  bool naive = false;

  // full | no-context | no-pose | no-ems | naive
  static AblationFlags from_name(std::string_view name);
  std::string name() const;
  bool operator==(const AblationFlags&) const = default;
};

struct ConstraintLogEntry {
  int step = 0;  // ordinal
  EmsInstruction input;
  ConstraintOutcome outcome;
};

struct GenerationResult {
  std::string condition;
  std::string tutorial;
  std::vector<MovementStep> steps;  // after stimulation selection
  std::vector<MovementStep> plan;   // after the constraint pass
  FormatReport report;
  std::vector<ConstraintLogEntry> constraint_log;
  std::vector<TranscriptEntry> transcript;
};

// Shared per-run state for the stage functions: which client to call and
// where to record the exchange.
struct StageContext {
  ModelClient& client;
  std::string scenario;
  std::string condition;
  std::vector<TranscriptEntry>* transcript = nullptr;
};

std::string generate_tutorial(const ContextBundle& ctx, const AblationFlags& flags, StageContext& sc);

std::vector<MovementStep> generate_movement_steps(const std::string& tutorial, const ContextBundle& ctx,
                                                  const AblationFlags& flags, const KnowledgeBase& kb,
                                                  StageContext& sc);

// Fills each step's instructions from the model's gesture selection. Steps
// without any usable gesture are marked unrealizable.
std::vector<MovementStep> select_stimulations(const std::vector<MovementStep>& steps, const ContextBundle& ctx,
                                              const AblationFlags& flags, const KnowledgeBase& kb,
                                              StageContext& sc, FormatReport& report);

// Parsers for the model's answer formats.
std::vector<MovementStep> parse_movement_steps(std::string_view text);
void parse_stimulation_response(std::string_view text, std::vector<MovementStep>& steps, const KnowledgeBase& kb,
                                FormatReport& report);

// Applies constrain() to every instruction against a pose that is advanced
// as each accepted instruction is assumed to complete.
std::vector<MovementStep> constrain_plan(const std::vector<MovementStep>& steps, const BodyPose& pose,
                                         const KnowledgeBase& kb, std::vector<ConstraintLogEntry>& log);

GenerationResult run_pipeline(const std::string& scenario_id, const ContextBundle& ctx, const AblationFlags& flags,
                              const KnowledgeBase& kb, const BodyPose& pose, ModelClient& client);

// Human-readable plan text (also used as previous_output on think-again).
std::string plan_to_text(const std::vector<MovementStep>& plan);
// Instruction file form: "# step N: ..." comment headers plus canonical lines.
std::string plan_to_instruction_file(const std::vector<MovementStep>& plan);

nlohmann::json to_json(const GenerationResult& r);
nlohmann::json to_json(const ConstraintLogEntry& e);

}  // namespace gems
