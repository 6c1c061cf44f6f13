#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "core/body_model.hpp"

namespace gems {

inline constexpr int kConfigSchemaVersion = 1;

struct LoadOverrides {
  std::optional<std::filesystem::path> joint_limits;
  std::optional<std::filesystem::path> profile;
};

// Loads the manifest (schema_version plus one entry per part; each entry is
// a path relative to the manifest or an inline object) and cross-validates
// the parts.
KnowledgeBase load_knowledge_base(const std::filesystem::path& manifest, const LoadOverrides& overrides = {});

// Per-part parsers. `where` prefixes error messages.
KinematicModel parse_kinematic_chain(const nlohmann::json& doc, const std::string& where);
JointLimitTable parse_joint_limits(const nlohmann::json& doc, const KinematicModel& model, const std::string& where);
std::vector<GestureEntry> parse_gestures(const nlohmann::json& doc, const std::string& where);
UserProfile parse_profile(const nlohmann::json& doc, const std::string& where);

// Runs every cross-file invariant; throws Schema/Reference/Limit errors.
void validate(const KnowledgeBase& kb);

BodyPose parse_pose(const nlohmann::json& doc, const KinematicModel& model, const JointLimitTable& limits,
                    const std::string& where);
BodyPose load_pose(const std::filesystem::path& path, const KinematicModel& model, const JointLimitTable& limits);
nlohmann::json pose_to_json(const BodyPose& pose);

nlohmann::json chain_to_json(const KinematicModel& model);
nlohmann::json limits_to_json(const JointLimitTable& limits);

double effective_amplitude(const UserProfile& profile, std::string_view channel, StimulationMode mode);

}  // namespace gems
