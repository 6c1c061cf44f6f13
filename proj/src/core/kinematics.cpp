#include "core/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace gems {

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Accepted: return "accepted";
    case Verdict::Adjusted: return "adjusted";
    case Verdict::StoppedImpossible: return "stopped-impossible";
    case Verdict::StoppedMaxed: return "stopped-maxed";
  }
  return "";
}

double headroom(const BodyPose& pose, const JointLimitTable& limits, Side side, std::string_view joint, Dof dof) {
  const auto& range = limits.at(joint, axis_of(dof));
  const double current = pose.angle(side, joint, axis_of(dof));
  const double room = direction_of(dof) > 0 ? range.max - current : current - range.min;
  return std::max(0.0, room);
}

namespace {

struct Allocation {
  std::string joint;
  Side side;
  Dof dof;
  double angle;
};

std::string describe(const Allocation& a) {
  return a.joint + " " + format_number(a.angle);
}

}  // namespace

ConstraintOutcome constrain(const EmsInstruction& instr, const BodyPose& pose, const JointLimitTable& limits,
                            const KinematicModel& model) {
  const auto& spec = model.joint(instr.joint);
  if (!spec.dofs.contains(instr.movement))
    throw Error(ErrorKind::UnknownJoint,
                "joint '" + instr.joint + "' has no DOF '" + std::string(to_string(instr.movement)) + "'");
  const auto& range = limits.at(instr.joint, axis_of(instr.movement));
  const double target = instr.target_angle;

  ConstraintOutcome out;
  if (target > range.span()) {
    out.verdict = Verdict::StoppedImpossible;
    out.explanation = format_number(target) + " degrees exceeds the " + format_number(range.span()) +
                      "-degree range of " + instr.joint + " " + std::string(to_string(axis_of(instr.movement)));
    return out;
  }

  const Side side = model.resolve_side(instr.joint, instr.handedness);
  const double own = headroom(pose, limits, side, instr.joint, instr.movement);
  if (target <= own) {
    out.verdict = Verdict::Accepted;
    out.instructions.push_back(instr);
    out.explanation = "within headroom (" + format_number(own) + " degrees)";
    return out;
  }

  std::vector<Allocation> allocs;
  double allocated = 0.0;
  auto allocate = [&](const std::string& joint, Side s, Dof dof, double room) {
    const double remaining = target - allocated;
    if (room <= 0.0 || remaining <= 0.0) return;
    // The final allocation is the exact remainder so the parts sum back to
    // the requested angle.
    const double a = room >= remaining ? remaining : room;
    allocs.push_back(Allocation{joint, s, dof, a});
    allocated = room >= remaining ? target : allocated + a;
  };

  allocate(instr.joint, side, instr.movement, own);
  std::string cur_joint = instr.joint;
  Dof cur_dof = instr.movement;
  bool any_upstream_room = false;
  while (allocated < target) {
    auto cands = model.compatible(cur_joint, cur_dof);
    if (cands.empty()) break;
    const CompatTarget* pick = &cands.front();
    double pick_room = 0.0;
    for (const auto& c : cands) {
      const double room = headroom(pose, limits, model.resolve_side(c.joint, side), c.joint, c.dof);
      if (room > 0.0) {
        pick = &c;
        pick_room = room;
        break;
      }
    }
    if (pick_room > 0.0) any_upstream_room = true;
    allocate(pick->joint, model.resolve_side(pick->joint, side), pick->dof, pick_room);
    cur_joint = pick->joint;
    cur_dof = pick->dof;
  }

  if (allocated < target) {
    out.verdict = Verdict::StoppedMaxed;
    if (!any_upstream_room) {
      out.explanation = instr.joint + " has " + format_number(own) + " of " + format_number(target) +
                        " degrees left and no parent joint can contribute";
    } else {
      out.explanation = "kinematic chain exhausted after " + format_number(allocated) + " of " +
                        format_number(target) + " degrees";
    }
    return out;
  }

  out.verdict = Verdict::Adjusted;
  std::string parts;
  for (const auto& a : allocs) {
    EmsInstruction e;
    e.handedness = a.side;
    e.joint = a.joint;
    e.movement = a.dof;
    e.target_angle = a.angle;
    e.source = InstructionSource::ConstrainedAdjusted;
    if (a.joint == instr.joint && a.dof == instr.movement) e.params = instr.params;
    out.instructions.push_back(std::move(e));
    if (!parts.empty()) parts += ", ";
    parts += describe(a);
  }
  out.explanation = parts;
  return out;
}

BodyPose apply_completed(const BodyPose& pose, const EmsInstruction& instr, const JointLimitTable& limits,
                         const KinematicModel& model) {
  BodyPose next = pose;
  const auto cmd = motion_for(instr, pose, limits, model, 1.0);
  next.set(cmd.side, cmd.joint, axis_of(cmd.dof), cmd.goal_angle);
  return next;
}

namespace {

std::string_view participle(Dof d) {
  switch (d) {
    case Dof::Flexion: return "flexed";
    case Dof::Extension: return "extended";
    case Dof::Abduction: return "abducted";
    case Dof::Adduction: return "adducted";
    case Dof::Pronation: return "pronated";
    case Dof::Supination: return "supinated";
    case Dof::RotationCw: return "rotated clockwise";
    case Dof::RotationCcw: return "rotated counter-clockwise";
    case Dof::Eversion: return "everted";
    case Dof::Inversion: return "inverted";
  }
  return "";
}

constexpr double kPalmThresholdDeg = 60.0;

}  // namespace

std::string pose_to_text(const BodyPose& pose, const KinematicModel& model) {
  // Group key "<side> <group>" in order of first appearance along the chain.
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::string>> phrases;
  auto group_of = [&](Side side, const JointSpec& j) {
    std::string key = side == Side::None ? j.group : std::string(to_string(side)) + " " + j.group;
    if (!phrases.contains(key)) {
      phrases[key];
      order.push_back(key);
    }
    return key;
  };

  for (const auto& j : model.joints()) {
    const Side sides[] = {Side::Left, Side::Right};
    const std::span<const Side> side_list = j.sided ? std::span<const Side>(sides) : std::span<const Side>();
    auto describe_side = [&](Side side) {
      const auto key = group_of(side, j);
      for (Axis a : kAllAxes) {
        if (!j.dofs.contains(positive_dof(a))) continue;
        const double angle = pose.angle(side, j.id, a);
        const double bucket = std::round(angle / kPoseBucketDeg) * kPoseBucketDeg;
        if (bucket == 0.0) continue;
        const Dof d = bucket > 0 ? positive_dof(a) : negative_dof(a);
        phrases[key].push_back(j.id + " " + std::string(participle(d)) + " " + format_number(std::abs(bucket)) +
                               " degrees about " + j.dofs.at(d));
        if (a == Axis::PronationSupination) {
          if (angle <= -kPalmThresholdDeg) phrases[key].push_back("palm up");
          else if (angle >= kPalmThresholdDeg) phrases[key].push_back("palm down");
        }
      }
    };
    if (j.sided) {
      for (Side s : side_list) describe_side(s);
    } else {
      describe_side(Side::None);
    }
  }

  std::string out;
  for (const auto& key : order) {
    out += key + ": ";
    const auto& p = phrases[key];
    if (p.empty()) {
      out += "neutral";
    } else {
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (i) out += ", ";
        out += p[i];
      }
    }
    out += '\n';
  }
  return out;
}

MotionCommand motion_for(const EmsInstruction& instr, const BodyPose& pose, const JointLimitTable& limits,
                         const KinematicModel& model, double drive) {
  MotionCommand cmd;
  cmd.side = model.resolve_side(instr.joint, instr.handedness);
  cmd.joint = instr.joint;
  cmd.dof = instr.movement;
  cmd.drive = drive;
  const auto axis = axis_of(instr.movement);
  const auto& range = limits.at(instr.joint, axis);
  const double goal = pose.angle(cmd.side, instr.joint, axis) + direction_of(instr.movement) * instr.target_angle;
  cmd.goal_angle = std::clamp(goal, range.min, range.max);
  return cmd;
}

BodyPose apply_simulated_motion(const BodyPose& pose, const MotionCommand& cmd, double dt_ms,
                                const SimResponseConfig& response, const JointLimitTable& limits) {
  BodyPose next = pose;
  next.timestamp_ms += dt_ms;
  if (dt_ms <= 0.0 || cmd.drive <= 0.0 || cmd.drive < response.motor_threshold) return next;
  const auto axis = axis_of(cmd.dof);
  const double current = pose.angle(cmd.side, cmd.joint, axis);
  const double gap = cmd.goal_angle - current;
  if (gap == 0.0) return next;
  const double step = response.velocity_deg_per_s * cmd.drive * dt_ms / 1000.0;
  double moved = std::abs(gap) <= step ? cmd.goal_angle : current + (gap > 0 ? step : -step);
  if (auto r = limits.range(cmd.joint, axis)) moved = std::clamp(moved, r->min, r->max);
  next.set(cmd.side, cmd.joint, axis, moved);
  return next;
}

}  // namespace gems
