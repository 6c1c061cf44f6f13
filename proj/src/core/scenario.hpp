#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "core/knowledge_base.hpp"
#include "core/kinematics.hpp"
#include "core/pipeline.hpp"

namespace gems {

// Fact store standing in for the checkpoint photo. A rule sets a fact once
// steps whose description contains `step_contains` have completed `after`
// times.
struct WorldRule {
  std::string fact;
  bool value = true;
  int after = 1;
  std::string step_contains;  // case-insensitive; empty matches every step

  bool operator==(const WorldRule&) const = default;
};

class WorldOracle {
 public:
  WorldOracle() = default;
  WorldOracle(std::map<std::string, bool> facts, std::vector<WorldRule> rules);

  void on_step_completed(const MovementStep& step);
  const std::map<std::string, bool>& facts() const { return facts_; }
  std::optional<bool> fact(const std::string& name) const;
  std::string facts_text() const;  // "a=true, b=false" in name order
  void reset();

 private:
  std::map<std::string, bool> initial_;
  std::map<std::string, bool> facts_;
  std::vector<WorldRule> rules_;
  std::vector<int> counts_;
};

enum class BodyReaction : std::uint8_t { Comply, Freeze, Resist };

std::string_view to_string(BodyReaction r);

struct BodyRule {
  std::string step_contains;
  BodyReaction reaction = BodyReaction::Comply;
};

struct SessionConfig {
  StimulationMode stimulation_mode = StimulationMode::Actuate;
  CompletionMode completion_mode = CompletionMode::Partial;
  double tick_ms = 100.0;
  double stall_window_ms = 3000.0;
  int repeat_cap = 5;
  SimResponseConfig response;
  std::vector<BodyRule> body;  // first matching rule wins; default comply
};

struct Scenario {
  std::string id;
  std::filesystem::path dir;
  std::shared_ptr<const KnowledgeBase> kb;
  ContextBundle context;  // pose_text filled from `pose`
  BodyPose pose;
  AblationFlags flags;
  std::optional<std::filesystem::path> mock;
  std::optional<std::filesystem::path> ground_truth;
  WorldOracle world;
  SessionConfig session;
};

struct ScenarioOverrides {
  std::optional<std::filesystem::path> knowledge_base;
  LoadOverrides parts;
};

Scenario load_scenario(const std::filesystem::path& path, const ScenarioOverrides& overrides = {});

// Default data root compiled into the library; used when a scenario does not
// name its knowledge base.
std::filesystem::path default_data_dir();

}  // namespace gems
