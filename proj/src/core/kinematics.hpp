#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "core/body_model.hpp"
#include "core/instruction.hpp"

namespace gems {

// Remaining travel (>= 0) from the current pose toward the directional limit
// of `dof`. Throws UnknownJoint when the joint or its limit entry is missing.
double headroom(const BodyPose& pose, const JointLimitTable& limits, Side side, std::string_view joint, Dof dof);

enum class Verdict : std::uint8_t { Accepted, Adjusted, StoppedImpossible, StoppedMaxed };

std::string_view to_string(Verdict v);

struct ConstraintOutcome {
  Verdict verdict = Verdict::Accepted;
  std::vector<EmsInstruction> instructions;  // empty for stopped verdicts
  std::string explanation;
};

// Rule 1: target larger than the joint's total range -> stopped-impossible.
// Rule 2: joint saturated and nothing upstream can help -> stopped-maxed.
// Rule 3: otherwise allocate headroom greedily, requested joint first, then
// along the configured compatible-DOF links toward the torso.
ConstraintOutcome constrain(const EmsInstruction& instr, const BodyPose& pose, const JointLimitTable& limits,
                            const KinematicModel& model);

// Predicted pose after an instruction has fully completed (clamped).
BodyPose apply_completed(const BodyPose& pose, const EmsInstruction& instr, const JointLimitTable& limits,
                         const KinematicModel& model);

// Egocentric per-limb description, bucketed to kPoseBucketDeg.
inline constexpr double kPoseBucketDeg = 15.0;
std::string pose_to_text(const BodyPose& pose, const KinematicModel& model);

struct SimResponseConfig {
  double velocity_deg_per_s = 30.0;
  double motor_threshold = 0.45;  // drive fraction below which muscles do not contract
  double reach_tolerance_deg = 2.0;

  bool operator==(const SimResponseConfig&) const = default;
};

// A resolved actuation: absolute goal angle on one axis, and the drive level
// (effective amplitude over calibrated maximum).
struct MotionCommand {
  Side side = Side::None;
  std::string joint;
  Dof dof = Dof::Flexion;
  double goal_angle = 0.0;
  double drive = 1.0;
};

MotionCommand motion_for(const EmsInstruction& instr, const BodyPose& pose, const JointLimitTable& limits,
                         const KinematicModel& model, double drive);

// Moves toward the goal at velocity * drive; no motion below the motor
// threshold; never overshoots the goal or leaves the joint limits.
BodyPose apply_simulated_motion(const BodyPose& pose, const MotionCommand& cmd, double dt_ms,
                                const SimResponseConfig& response, const JointLimitTable& limits);

}  // namespace gems
