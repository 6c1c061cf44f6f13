#include "core/body_model.hpp"

#include <algorithm>
#include <set>

namespace gems {

KinematicModel::KinematicModel(std::vector<JointSpec> joints, std::map<CompatKey, std::vector<CompatTarget>> compat)
    : joints_(std::move(joints)), compat_(std::move(compat)) {
  std::set<std::string> ids;
  for (const auto& j : joints_) {
    if (j.id.empty()) throw Error(ErrorKind::Schema, "kinematic chain: joint with empty id");
    if (!ids.insert(j.id).second) throw Error(ErrorKind::Schema, "kinematic chain: duplicate joint '" + j.id + "'");
    if (j.parent.empty()) {
      if (!root_.empty())
        throw Error(ErrorKind::Schema, "kinematic chain: multiple roots ('" + root_ + "', '" + j.id + "')");
      root_ = j.id;
    }
    for (const auto& [dof, _] : j.dofs) {
      if (!j.dofs.contains(opposite(dof)))
        throw Error(ErrorKind::Schema, "kinematic chain: joint '" + j.id + "' declares " + std::string(to_string(dof)) +
                                           " without " + std::string(to_string(opposite(dof))));
    }
  }
  if (root_.empty()) throw Error(ErrorKind::Schema, "kinematic chain: no root joint");
  for (const auto& j : joints_) {
    if (!j.parent.empty() && !ids.contains(j.parent))
      throw Error(ErrorKind::Reference, "kinematic chain: joint '" + j.id + "' has unknown parent '" + j.parent + "'");
  }
  // Every parent walk must reach the root without revisiting a joint.
  for (const auto& j : joints_) {
    std::set<std::string> seen;
    const JointSpec* cur = &j;
    while (!cur->parent.empty()) {
      if (!seen.insert(cur->id).second)
        throw Error(ErrorKind::Schema, "kinematic chain: cycle through '" + cur->id + "'");
      cur = find(cur->parent);
    }
  }
  for (const auto& [key, targets] : compat_) {
    const auto& [child, dof] = key;
    if (!supports(child, dof))
      throw Error(ErrorKind::Reference,
                  "kinematic chain: compat source '" + child + " " + std::string(to_string(dof)) + "' is not a declared DOF");
    for (const auto& t : targets) {
      if (!is_ancestor(t.joint, child))
        throw Error(ErrorKind::Reference,
                    "kinematic chain: compat target '" + t.joint + "' is not an ancestor of '" + child + "'");
      if (!supports(t.joint, t.dof))
        throw Error(ErrorKind::Reference, "kinematic chain: compat target '" + t.joint + " " +
                                              std::string(to_string(t.dof)) + "' is not a declared DOF");
    }
  }
}

const JointSpec* KinematicModel::find(std::string_view id) const {
  auto it = std::find_if(joints_.begin(), joints_.end(), [&](const JointSpec& j) { return j.id == id; });
  return it == joints_.end() ? nullptr : &*it;
}

const JointSpec& KinematicModel::joint(std::string_view id) const {
  if (const auto* j = find(id)) return *j;
  throw Error(ErrorKind::UnknownJoint, "unknown joint '" + std::string(id) + "'");
}

bool KinematicModel::supports(std::string_view joint, Dof dof) const {
  const auto* j = find(joint);
  return j != nullptr && j->dofs.contains(dof);
}

std::vector<Axis> KinematicModel::axes(std::string_view joint) const {
  std::vector<Axis> out;
  const auto& j = this->joint(joint);
  for (Axis a : kAllAxes) {
    if (j.dofs.contains(positive_dof(a))) out.push_back(a);
  }
  return out;
}

bool KinematicModel::is_ancestor(std::string_view ancestor, std::string_view joint) const {
  const auto* cur = find(joint);
  while (cur != nullptr && !cur->parent.empty()) {
    if (cur->parent == ancestor) return true;
    cur = find(cur->parent);
  }
  return false;
}

int KinematicModel::depth(std::string_view joint) const {
  int d = 0;
  const auto* cur = &this->joint(joint);
  while (!cur->parent.empty()) {
    ++d;
    cur = find(cur->parent);
  }
  return d;
}

std::span<const CompatTarget> KinematicModel::compatible(std::string_view joint, Dof dof) const {
  auto it = compat_.find(CompatKey{std::string(joint), dof});
  if (it == compat_.end()) return {};
  return it->second;
}

Side KinematicModel::resolve_side(std::string_view joint, Side requested) const {
  return this->joint(joint).sided ? requested : Side::None;
}

void JointLimitTable::set(const std::string& joint, Axis axis, AngleRange range) {
  entries_[{joint, axis}] = range;
}

std::optional<AngleRange> JointLimitTable::range(std::string_view joint, Axis axis) const {
  auto it = entries_.find(std::pair<std::string, Axis>{std::string(joint), axis});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

const AngleRange& JointLimitTable::at(std::string_view joint, Axis axis) const {
  auto it = entries_.find(std::pair<std::string, Axis>{std::string(joint), axis});
  if (it == entries_.end())
    throw Error(ErrorKind::UnknownJoint,
                "no joint limit for '" + std::string(joint) + " " + std::string(to_string(axis)) + "'");
  return it->second;
}

double BodyPose::angle(Side side, std::string_view joint, Axis axis) const {
  auto it = angles.find(PoseKey{side, std::string(joint), axis});
  return it == angles.end() ? 0.0 : it->second;
}

void BodyPose::set(Side side, const std::string& joint, Axis axis, double value) {
  angles[PoseKey{side, joint, axis}] = value;
}

const GestureEntry* KnowledgeBase::find_gesture(Side side, std::string_view joint, Dof dof) const {
  for (const auto& g : gestures) {
    if (g.handedness == side && g.joint == joint && g.movement == dof) return &g;
  }
  return nullptr;
}

}  // namespace gems
