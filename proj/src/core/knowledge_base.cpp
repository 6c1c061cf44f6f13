#include "core/knowledge_base.hpp"

#include <cmath>
#include <set>

#include "core/json_util.hpp"

namespace gems {

using nlohmann::json;
using namespace json_util;

namespace {

Dof require_dof(const json& obj, std::string_view key, const std::string& where) {
  const auto name = get_string(obj, key, where);
  auto dof = dof_from_string(name);
  if (!dof) throw Error(ErrorKind::Schema, where + "." + std::string(key) + ": unknown DOF '" + name + "'");
  return *dof;
}

Side require_side(const json& obj, std::string_view key, const std::string& where) {
  const auto name = get_string(obj, key, where);
  auto side = side_from_string(name);
  if (!side) throw Error(ErrorKind::Schema, where + "." + std::string(key) + ": unknown side '" + name + "'");
  return *side;
}

const json& require_array(const json& doc, std::string_view key, const std::string& where) {
  const auto& arr = require(doc, key, where);
  if (!arr.is_array()) throw Error(ErrorKind::Schema, "key '" + where + "." + std::string(key) + "' must be an array");
  return arr;
}

std::string indexed(const std::string& where, std::string_view key, std::size_t i) {
  return where + "." + std::string(key) + "[" + std::to_string(i) + "]";
}

json load_part(const json& manifest, std::string_view key, const std::filesystem::path& base,
               const std::optional<std::filesystem::path>& override_path, std::string& origin) {
  if (override_path) {
    origin = override_path->string();
    return parse_file(*override_path);
  }
  const auto& entry = require(manifest, key, base.string());
  if (entry.is_string()) {
    auto p = base.parent_path() / entry.get<std::string>();
    origin = p.string();
    return parse_file(p);
  }
  if (entry.is_object()) {
    origin = base.string() + ":" + std::string(key);
    return entry;
  }
  throw Error(ErrorKind::Schema, "key '" + std::string(key) + "' in " + base.string() + " must be a path or an object");
}

}  // namespace

KinematicModel parse_kinematic_chain(const json& doc, const std::string& where) {
  check_schema_version(doc, kConfigSchemaVersion, where);
  std::vector<JointSpec> joints;
  const auto& arr = require_array(doc, "joints", where);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto w = indexed(where, "joints", i);
    JointSpec j;
    j.id = get_string(arr[i], "id", w);
    j.parent = get_string_or(arr[i], "parent", w, "");
    j.sided = get_bool(arr[i], "sided", w, false);
    j.group = get_string_or(arr[i], "group", w, j.id);
    const auto& dofs = require(arr[i], "dofs", w);
    if (!dofs.is_object()) throw Error(ErrorKind::Schema, "key '" + w + ".dofs' must be an object");
    for (const auto& [name, label] : dofs.items()) {
      auto dof = dof_from_string(name);
      if (!dof) throw Error(ErrorKind::Schema, w + ".dofs: unknown DOF '" + name + "'");
      if (!label.is_string()) throw Error(ErrorKind::Schema, w + ".dofs." + name + " must be an axis label string");
      j.dofs[*dof] = label.get<std::string>();
    }
    joints.push_back(std::move(j));
  }
  std::map<CompatKey, std::vector<CompatTarget>> compat;
  if (doc.contains("compatible")) {
    const auto& carr = require_array(doc, "compatible", where);
    for (std::size_t i = 0; i < carr.size(); ++i) {
      const auto w = indexed(where, "compatible", i);
      CompatKey key{get_string(carr[i], "joint", w), require_dof(carr[i], "dof", w)};
      const auto& targets = require_array(carr[i], "targets", w);
      auto& out = compat[key];
      for (std::size_t k = 0; k < targets.size(); ++k) {
        const auto tw = indexed(w, "targets", k);
        out.push_back(CompatTarget{get_string(targets[k], "joint", tw), require_dof(targets[k], "dof", tw)});
      }
    }
  }
  try {
    return KinematicModel(std::move(joints), std::move(compat));
  } catch (const Error& e) {
    throw Error(e.kind(), where + ": " + e.what());
  }
}

JointLimitTable parse_joint_limits(const json& doc, const KinematicModel& model, const std::string& where) {
  check_schema_version(doc, kConfigSchemaVersion, where);
  JointLimitTable table;
  const auto& arr = require_array(doc, "limits", where);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto w = indexed(where, "limits", i);
    const auto joint = get_string(arr[i], "joint", w);
    const auto dof = require_dof(arr[i], "dof", w);
    const double lo = get_number(arr[i], "min", w);
    const double hi = get_number(arr[i], "max", w);
    if (!model.contains(joint)) throw Error(ErrorKind::Reference, w + ": unknown joint '" + joint + "'");
    if (!model.supports(joint, dof))
      throw Error(ErrorKind::Reference, w + ": joint '" + joint + "' has no DOF '" + std::string(to_string(dof)) + "'");
    if (!(lo < hi))
      throw Error(ErrorKind::Limit, w + ": min " + format_number(lo) + " must be below max " + format_number(hi));
    // An entry keyed by the negative DOF is given in that DOF's own
    // direction; flip it onto the axis convention.
    AngleRange r = direction_of(dof) > 0 ? AngleRange{lo, hi} : AngleRange{-hi, -lo};
    table.set(joint, axis_of(dof), r);
  }
  return table;
}

std::vector<GestureEntry> parse_gestures(const json& doc, const std::string& where) {
  check_schema_version(doc, kConfigSchemaVersion, where);
  std::vector<GestureEntry> out;
  const auto& arr = require_array(doc, "gestures", where);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto w = indexed(where, "gestures", i);
    GestureEntry g;
    g.id = get_string(arr[i], "id", w);
    g.description = get_string_or(arr[i], "description", w, "");
    g.handedness = require_side(arr[i], "handedness", w);
    g.joint = get_string(arr[i], "joint", w);
    g.movement = require_dof(arr[i], "movement", w);
    const auto& ch = require_array(arr[i], "channels", w);
    for (const auto& c : ch) {
      if (!c.is_string()) throw Error(ErrorKind::Schema, w + ".channels: entries must be strings");
      g.channels.push_back(c.get<std::string>());
    }
    const auto& p = require(arr[i], "params", w);
    const auto pw = w + ".params";
    g.params.frequency_hz = get_number(p, "frequency_hz", pw);
    g.params.amplitude_ma = get_number(p, "amplitude_ma", pw);
    g.params.pulse_width_us = get_number(p, "pulse_width_us", pw);
    g.params.duration_ms = get_number(p, "duration_ms", pw);
    out.push_back(std::move(g));
  }
  return out;
}

UserProfile parse_profile(const json& doc, const std::string& where) {
  check_schema_version(doc, kConfigSchemaVersion, where);
  UserProfile p;
  p.dominant_hand = require_side(doc, "dominant_hand", where);
  p.nudge_fraction = get_number_or(doc, "nudge_fraction", where, p.nudge_fraction);
  p.tactile_fraction = get_number_or(doc, "tactile_fraction", where, p.tactile_fraction);
  p.stall_threshold_deg = get_number_or(doc, "stall_threshold_deg", where, p.stall_threshold_deg);
  p.user_settings = get_string_or(doc, "user_settings", where, "");
  const auto& ch = require(doc, "channels", where);
  if (!ch.is_object()) throw Error(ErrorKind::Schema, "key '" + where + ".channels' must be an object");
  for (const auto& [name, v] : ch.items()) {
    if (!v.is_number()) throw Error(ErrorKind::Schema, where + ".channels." + name + " must be a number (mA)");
    p.channel_max_ma[name] = v.get<double>();
  }
  return p;
}

void validate(const KnowledgeBase& kb) {
  const auto& p = kb.profile;
  if (p.dominant_hand == Side::None) throw Error(ErrorKind::Schema, "profile: dominant_hand must be left or right");
  if (!(0.0 < p.tactile_fraction && p.tactile_fraction < p.nudge_fraction && p.nudge_fraction < 1.0))
    throw Error(ErrorKind::Schema, "profile: fractions must satisfy 0 < tactile_fraction < nudge_fraction < 1");
  if (!(p.stall_threshold_deg > 0.0)) throw Error(ErrorKind::Schema, "profile: stall_threshold_deg must be positive");
  for (const auto& [ch, ma] : p.channel_max_ma) {
    if (!(ma >= 0.0)) throw Error(ErrorKind::Schema, "profile: channel '" + ch + "' max must be >= 0 mA");
  }

  std::set<std::string> ids;
  for (const auto& g : kb.gestures) {
    const std::string w = "gesture '" + g.id + "'";
    if (g.id.empty()) throw Error(ErrorKind::Schema, "gesture with empty id");
    if (!ids.insert(g.id).second) throw Error(ErrorKind::Schema, "duplicate gesture id '" + g.id + "'");
    const auto* joint = kb.model.find(g.joint);
    if (joint == nullptr) throw Error(ErrorKind::Reference, w + " names unknown joint '" + g.joint + "'");
    if (!joint->dofs.contains(g.movement))
      throw Error(ErrorKind::Reference,
                  w + ": joint '" + g.joint + "' has no DOF '" + std::string(to_string(g.movement)) + "'");
    if (joint->sided == (g.handedness == Side::None))
      throw Error(ErrorKind::Schema, w + ": handedness '" + std::string(to_string(g.handedness)) +
                                         "' does not fit joint '" + g.joint + "'");
    if (g.channels.empty()) throw Error(ErrorKind::Schema, w + " has no channels");
    for (const auto& ch : g.channels) {
      if (!p.channel_max_ma.contains(ch))
        throw Error(ErrorKind::Reference, w + " uses channel '" + ch + "' missing from the user profile");
    }
    const auto& sp = g.params;
    if (!(sp.frequency_hz > 0 && sp.pulse_width_us > 0 && sp.duration_ms > 0 && sp.amplitude_ma >= 0))
      throw Error(ErrorKind::Schema, w + ": stimulation params must be positive (amplitude >= 0)");
    if (!kb.limits.range(g.joint, axis_of(g.movement)))
      throw Error(ErrorKind::Limit, w + ": no joint limit for '" + g.joint + " " +
                                        std::string(to_string(axis_of(g.movement))) + "'");
  }
  for (const auto& [key, targets] : kb.model.compat_map()) {
    if (!kb.limits.range(key.first, axis_of(key.second)))
      throw Error(ErrorKind::Limit, "no joint limit for compat source '" + key.first + "'");
    for (const auto& t : targets) {
      if (!kb.limits.range(t.joint, axis_of(t.dof)))
        throw Error(ErrorKind::Limit, "no joint limit for compat target '" + t.joint + "'");
    }
  }
}

KnowledgeBase load_knowledge_base(const std::filesystem::path& manifest_path, const LoadOverrides& overrides) {
  const auto manifest = parse_file(manifest_path);
  check_schema_version(manifest, kConfigSchemaVersion, manifest_path.string());

  KnowledgeBase kb;
  std::string origin;
  auto chain = load_part(manifest, "kinematic_chain", manifest_path, std::nullopt, origin);
  kb.model = parse_kinematic_chain(chain, origin);
  auto limits = load_part(manifest, "joint_limits", manifest_path, overrides.joint_limits, origin);
  kb.limits = parse_joint_limits(limits, kb.model, origin);
  auto gestures = load_part(manifest, "gestures", manifest_path, std::nullopt, origin);
  kb.gestures = parse_gestures(gestures, origin);
  auto profile = load_part(manifest, "profile", manifest_path, overrides.profile, origin);
  kb.profile = parse_profile(profile, origin);
  validate(kb);
  return kb;
}

BodyPose parse_pose(const json& doc, const KinematicModel& model, const JointLimitTable& limits,
                    const std::string& where) {
  check_schema_version(doc, kConfigSchemaVersion, where);
  BodyPose pose;
  pose.timestamp_ms = get_number_or(doc, "timestamp_ms", where, 0.0);
  const auto& arr = require_array(doc, "angles", where);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto w = indexed(where, "angles", i);
    const auto joint = get_string(arr[i], "joint", w);
    const auto dof = require_dof(arr[i], "dof", w);
    const auto side = side_from_string(get_string_or(arr[i], "side", w, "none"));
    if (!side) throw Error(ErrorKind::Schema, w + ".side: unknown side");
    const double angle = get_number(arr[i], "angle", w);
    if (!model.supports(joint, dof))
      throw Error(ErrorKind::Reference, w + ": unknown joint/DOF '" + joint + " " + std::string(to_string(dof)) + "'");
    const bool sided = model.joint(joint).sided;
    if (sided == (*side == Side::None))
      throw Error(ErrorKind::Schema, w + ": side does not fit joint '" + joint + "'");
    const double axis_angle = direction_of(dof) * angle;
    const auto range = limits.range(joint, axis_of(dof));
    if (!range) throw Error(ErrorKind::Limit, w + ": no joint limit for '" + joint + "'");
    if (!range->contains(axis_angle))
      throw Error(ErrorKind::Limit, w + ": angle " + format_number(axis_angle) + " outside [" +
                                        format_number(range->min) + ", " + format_number(range->max) + "]");
    pose.set(*side, joint, axis_of(dof), axis_angle);
  }
  return pose;
}

BodyPose load_pose(const std::filesystem::path& path, const KinematicModel& model, const JointLimitTable& limits) {
  return parse_pose(parse_file(path), model, limits, path.string());
}

json pose_to_json(const BodyPose& pose) {
  json angles = json::array();
  for (const auto& [key, value] : pose.angles) {
    angles.push_back({{"side", to_string(key.side)},
                      {"joint", key.joint},
                      {"dof", to_string(positive_dof(key.axis))},
                      {"angle", value}});
  }
  return {{"schema_version", kConfigSchemaVersion}, {"timestamp_ms", pose.timestamp_ms}, {"angles", angles}};
}

json chain_to_json(const KinematicModel& model) {
  json joints = json::array();
  for (const auto& j : model.joints()) {
    json dofs = json::object();
    for (const auto& [dof, label] : j.dofs) dofs[std::string(to_string(dof))] = label;
    joints.push_back({{"id", j.id},
                      {"parent", j.parent.empty() ? json(nullptr) : json(j.parent)},
                      {"sided", j.sided},
                      {"group", j.group},
                      {"dofs", dofs}});
  }
  json compat = json::array();
  for (const auto& [key, targets] : model.compat_map()) {
    json t = json::array();
    for (const auto& c : targets) t.push_back({{"joint", c.joint}, {"dof", to_string(c.dof)}});
    compat.push_back({{"joint", key.first}, {"dof", to_string(key.second)}, {"targets", t}});
  }
  return {{"schema_version", kConfigSchemaVersion}, {"joints", joints}, {"compatible", compat}};
}

json limits_to_json(const JointLimitTable& limits) {
  json arr = json::array();
  for (const auto& [key, r] : limits.entries()) {
    arr.push_back({{"joint", key.first}, {"dof", to_string(positive_dof(key.second))}, {"min", r.min}, {"max", r.max}});
  }
  return {{"schema_version", kConfigSchemaVersion}, {"limits", arr}};
}

double effective_amplitude(const UserProfile& profile, std::string_view channel, StimulationMode mode) {
  auto it = profile.channel_max_ma.find(std::string(channel));
  if (it == profile.channel_max_ma.end())
    throw Error(ErrorKind::UnknownChannel, "channel '" + std::string(channel) + "' is not calibrated");
  switch (mode) {
    case StimulationMode::Actuate: return it->second;
    case StimulationMode::Nudge: return it->second * profile.nudge_fraction;
    case StimulationMode::Tactile: return it->second * profile.tactile_fraction;
  }
  return 0.0;
}

}  // namespace gems
