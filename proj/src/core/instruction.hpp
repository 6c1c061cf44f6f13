#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "core/body_model.hpp"

namespace gems {

enum class InstructionSource : std::uint8_t { Generated, ConstrainedAdjusted, GroundTruth };

std::string_view to_string(InstructionSource s);

// One standardized stimulation step: [handedness][joint][movement][angle].
// `target_angle` is the displacement in degrees along `movement`.
struct EmsInstruction {
  Side handedness = Side::None;
  std::string joint;
  Dof movement = Dof::Flexion;
  double target_angle = 0.0;
  std::optional<StimParams> params;
  InstructionSource source = InstructionSource::Generated;

  bool operator==(const EmsInstruction&) const = default;
};

enum class ViolationKind : std::uint8_t { AngleRange, MissingLimb, UnknownToken, Other };

std::string_view to_string(ViolationKind k);

struct FormatViolation {
  ViolationKind kind = ViolationKind::Other;
  std::string raw;
  bool recovered = false;
  std::string detail;

  bool operator==(const FormatViolation&) const = default;
};

struct FormatReport {
  std::vector<FormatViolation> violations;

  bool empty() const { return violations.empty(); }
  std::size_t size() const { return violations.size(); }
  void append(const FormatReport& other);
  bool operator==(const FormatReport&) const = default;
};

struct MovementStep {
  int ordinal = 1;
  std::string description;
  std::vector<EmsInstruction> instructions;
  std::string checkpoint;     // free-text condition; empty means none
  bool unrealizable = false;  // no EMS counterpart was found for this step

  bool operator==(const MovementStep&) const = default;
};

struct ParsedLine {
  std::optional<EmsInstruction> instruction;
  FormatReport report;
};

// Total: never throws on any input. Recovery rules: an angle range becomes
// its midpoint; a missing side on a sided joint becomes `dominant_hand`; a
// side on an axial joint becomes none; trailing unit words are dropped.
ParsedLine parse_instruction_line(std::string_view line, const KinematicModel& model,
                                  Side dominant_hand = Side::Right);

std::string serialize_instruction(const EmsInstruction& instr);

struct InstructionList {
  std::vector<EmsInstruction> instructions;
  FormatReport report;
};

// One instruction per line; '#' starts a comment; blank lines are skipped.
InstructionList parse_instruction_text(std::string_view text, const KinematicModel& model,
                                       Side dominant_hand = Side::Right);
InstructionList load_instruction_file(const std::filesystem::path& path, const KinematicModel& model,
                                      Side dominant_hand = Side::Right);
std::string serialize_instructions(std::span<const EmsInstruction> instrs);

std::vector<EmsInstruction> flatten(std::span<const MovementStep> steps);

nlohmann::json to_json(const EmsInstruction& i);
nlohmann::json to_json(const FormatReport& r);
nlohmann::json to_json(const MovementStep& s);
nlohmann::json to_json(std::span<const MovementStep> steps);
FormatReport format_report_from_json(const nlohmann::json& j, const KinematicModel& model);
std::vector<MovementStep> steps_from_json(const nlohmann::json& j, const KinematicModel& model);

}  // namespace gems
