#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "core/body_model.hpp"
#include "core/instruction.hpp"

namespace gems {

struct CostConfig {
  double insertion = 1.0;
  double deletion = 6.0;
  double handedness = 2.0;
  double joint = 2.0;
  double dof = 1.0;
  double biomech_violation = 2.0;
  double format_violation = 2.0;
  // Default: an extra generated instruction is an insertion and a missing
  // ground-truth instruction is a deletion. Swapping flips both labels and
  // costs.
  bool swap_insert_delete = false;

  bool operator==(const CostConfig&) const = default;
};

enum class OpKind : std::uint8_t { Match, Substitute, Insert, Delete };

std::string_view to_string(OpKind k);

struct AlignOp {
  OpKind kind = OpKind::Match;
  std::optional<std::size_t> generated;     // index into the generated sequence
  std::optional<std::size_t> ground_truth;  // index into the ground truth
  double cost = 0.0;
  bool handedness_mismatch = false;
  bool joint_mismatch = false;
  bool dof_mismatch = false;

  bool operator==(const AlignOp&) const = default;
};

struct Alignment {
  std::vector<AlignOp> ops;
  double op_cost = 0.0;
  int biomech_violations = 0;
  int format_violations = 0;
  double violation_cost = 0.0;
  double weighted = 0.0;  // op_cost + violation_cost
  int unweighted = 0;     // non-match ops

  bool operator==(const Alignment&) const = default;
};

// Sum of the mismatched component costs; angles do not contribute.
double substitution_cost(const EmsInstruction& a, const EmsInstruction& b, const CostConfig& cfg);

// True when the displacement is larger than the joint axis's whole range, so
// no starting pose could realize it. Joints without a limit entry are not
// assessed.
bool biomech_violation(const EmsInstruction& instr, const JointLimitTable& limits);

Alignment distance(std::span<const EmsInstruction> generated, const FormatReport& report,
                   std::span<const EmsInstruction> ground_truth, const JointLimitTable& limits,
                   const CostConfig& cfg = {});

nlohmann::json to_json(const Alignment& a, std::span<const EmsInstruction> generated,
                       std::span<const EmsInstruction> ground_truth);
std::string alignment_table(const Alignment& a, std::span<const EmsInstruction> generated,
                            std::span<const EmsInstruction> ground_truth);

// condition -> task id -> alignment
using AblationResults = std::map<std::string, std::map<std::string, Alignment>>;

inline constexpr const char* kConditionOrder[] = {"full", "no-context", "no-pose", "no-ems", "naive"};

struct AblationRow {
  std::string condition;
  std::map<std::string, double> weighted;  // per task
  std::map<std::string, int> unweighted;
  double mean_weighted = 0.0;
  double mean_unweighted = 0.0;
};

struct AblationReport {
  std::vector<std::string> tasks;
  std::vector<AblationRow> rows;  // known conditions first in canonical order, then the rest by name
};

// Throws InvalidArgument when empty or when conditions cover different tasks.
AblationReport ablation_report(const AblationResults& results);
nlohmann::json to_json(const AblationReport& r);
std::string to_text(const AblationReport& r);

}  // namespace gems
