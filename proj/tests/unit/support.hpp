#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>

#include "core/knowledge_base.hpp"
#include "core/scenario.hpp"

namespace testsupport {

inline std::filesystem::path data_dir() { return GEMS_DATA_DIR; }
inline std::filesystem::path tests_dir() { return GEMS_TESTS_DIR; }

inline const gems::KnowledgeBase& default_kb() {
  static const gems::KnowledgeBase kb = gems::load_knowledge_base(data_dir() / "default" / "bundle.json");
  return kb;
}

inline gems::Scenario scenario(const std::string& id) {
  return gems::load_scenario(data_dir() / "scenarios" / id / "scenario.json");
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

// Fresh directory under the build tree, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) {
    static std::mt19937_64 rng{std::random_device{}()};
    path = std::filesystem::temp_directory_path() / ("gems-" + name + "-" + std::to_string(rng()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& rel) const { return path / rel; }
};

inline gems::BodyPose pose_of(std::initializer_list<std::tuple<gems::Side, std::string, gems::Axis, double>> angles) {
  gems::BodyPose p;
  for (const auto& [s, j, a, v] : angles) p.set(s, j, a, v);
  return p;
}

inline gems::EmsInstruction instr(gems::Side side, const std::string& joint, gems::Dof dof, double angle) {
  gems::EmsInstruction i;
  i.handedness = side;
  i.joint = joint;
  i.movement = dof;
  i.target_angle = angle;
  return i;
}

}  // namespace testsupport
