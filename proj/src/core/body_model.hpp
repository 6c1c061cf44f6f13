#pragma once

#include <compare>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "core/types.hpp"

namespace gems {

struct JointSpec {
  std::string id;
  std::string parent;  // empty only for the root
  bool sided = false;
  std::string group;   // limb group used by pose text and plan summaries
  // Supported DOFs with their egocentric axis label ("+x", "-z", ...).
  std::map<Dof, std::string> dofs;

  bool operator==(const JointSpec&) const = default;
};

// An ancestor joint/DOF that can contribute travel when a child joint is
// saturated.
struct CompatTarget {
  std::string joint;
  Dof dof;

  bool operator==(const CompatTarget&) const = default;
};

using CompatKey = std::pair<std::string, Dof>;

class KinematicModel {
 public:
  KinematicModel() = default;
  // Validates: single root, every parent known, acyclic, both directions of
  // an axis declared together, compat targets are proper ancestors that
  // support the target DOF.
  KinematicModel(std::vector<JointSpec> joints, std::map<CompatKey, std::vector<CompatTarget>> compat);

  const std::string& root() const { return root_; }
  const std::vector<JointSpec>& joints() const { return joints_; }
  const std::map<CompatKey, std::vector<CompatTarget>>& compat_map() const { return compat_; }

  const JointSpec* find(std::string_view id) const;
  const JointSpec& joint(std::string_view id) const;  // throws UnknownJoint
  bool contains(std::string_view id) const { return find(id) != nullptr; }
  bool supports(std::string_view joint, Dof dof) const;
  std::vector<Axis> axes(std::string_view joint) const;

  bool is_ancestor(std::string_view ancestor, std::string_view joint) const;
  int depth(std::string_view joint) const;
  std::span<const CompatTarget> compatible(std::string_view joint, Dof dof) const;

  // Side under which a joint is addressed: sided joints inherit the request
  // side, axial joints always use Side::None.
  Side resolve_side(std::string_view joint, Side requested) const;

  bool operator==(const KinematicModel&) const = default;

 private:
  std::vector<JointSpec> joints_;
  std::map<CompatKey, std::vector<CompatTarget>> compat_;
  std::string root_;
};

struct AngleRange {
  double min = 0.0;
  double max = 0.0;

  double span() const { return max - min; }
  bool contains(double v) const { return v >= min && v <= max; }
  bool operator==(const AngleRange&) const = default;
};

class JointLimitTable {
 public:
  void set(const std::string& joint, Axis axis, AngleRange range);
  std::optional<AngleRange> range(std::string_view joint, Axis axis) const;
  const AngleRange& at(std::string_view joint, Axis axis) const;  // throws UnknownJoint


  const std::map<std::pair<std::string, Axis>, AngleRange>& entries() const { return entries_; }
  bool operator==(const JointLimitTable&) const = default;

 private:
  std::map<std::pair<std::string, Axis>, AngleRange> entries_;
};

struct PoseKey {
  Side side = Side::None;
  std::string joint;
  Axis axis = Axis::FlexionExtension;

  auto operator<=>(const PoseKey&) const = default;
};

// Angles in degrees per (side, joint, axis). Unlisted entries are neutral (0).
struct BodyPose {
  std::map<PoseKey, double> angles;
  double timestamp_ms = 0.0;

  double angle(Side side, std::string_view joint, Axis axis) const;
  void set(Side side, const std::string& joint, Axis axis, double value);
  bool operator==(const BodyPose&) const = default;
};

struct GestureEntry {
  std::string id;
  std::string description;
  Side handedness = Side::None;
  std::string joint;
  Dof movement = Dof::Flexion;
  std::vector<std::string> channels;
  StimParams params;

  bool operator==(const GestureEntry&) const = default;
};

struct UserProfile {
  std::map<std::string, double> channel_max_ma;
  double nudge_fraction = 0.6;
  double tactile_fraction = 0.3;
  Side dominant_hand = Side::Right;
  std::string user_settings;
  double stall_threshold_deg = 0.5;

  bool operator==(const UserProfile&) const = default;
};

struct KnowledgeBase {
  std::vector<GestureEntry> gestures;
  JointLimitTable limits;
  KinematicModel model;
  UserProfile profile;

  // First gesture in file order realizing the movement on the given side.
  const GestureEntry* find_gesture(Side side, std::string_view joint, Dof dof) const;
  bool operator==(const KnowledgeBase&) const = default;
};

}  // namespace gems
