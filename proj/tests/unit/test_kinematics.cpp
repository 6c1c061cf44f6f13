#include <doctest.h>

#include <chrono>
#include <random>

#include "core/kinematics.hpp"
#include "support.hpp"

using namespace gems;
using testsupport::instr;
using testsupport::pose_of;

namespace {

const KnowledgeBase& kb() { return testsupport::default_kb(); }

BodyPose load_fixture_pose(const std::string& name) {
  return load_pose(testsupport::data_dir() / "fixtures" / name, kb().model, kb().limits);
}

BodyPose random_pose(std::mt19937_64& rng) {
  BodyPose p;
  for (const auto& [key, range] : kb().limits.entries()) {
    const auto& j = kb().model.joint(key.first);
    std::uniform_real_distribution<double> d(range.min, range.max);
    // Snap a third of the axes onto a limit so saturation is common.
    auto pick = [&] {
      switch (rng() % 6) {
        case 0: return range.min;
        case 1: return range.max;
        default: return std::round(d(rng));
      }
    };
    if (j.sided) {
      p.set(Side::Left, key.first, key.second, pick());
      p.set(Side::Right, key.first, key.second, pick());
    } else {
      p.set(Side::None, key.first, key.second, pick());
    }
  }
  return p;
}

}  // namespace

TEST_CASE("headroom follows the DOF direction and floors at zero") {
  JointLimitTable t;
  t.set("wrist", Axis::AbductionAdduction, {0, 14});
  const auto neutral = BodyPose{};
  CHECK(headroom(neutral, t, Side::Right, "wrist", Dof::Abduction) == 14);
  CHECK(headroom(neutral, t, Side::Right, "wrist", Dof::Adduction) == 0);
  const auto p = pose_of({{Side::Right, "wrist", Axis::AbductionAdduction, 20}});
  CHECK(headroom(p, t, Side::Right, "wrist", Dof::Abduction) == 0);
  CHECK(headroom(p, t, Side::Right, "wrist", Dof::Adduction) == 20);
  CHECK_THROWS_AS(headroom(p, t, Side::Right, "elbow", Dof::Flexion), Error);
}

TEST_CASE("an overflowing wrist abduction is redistributed onto the elbow") {
  const auto pose = load_fixture_pose("wrist_overflow_pose.json");
  const auto start = std::chrono::steady_clock::now();
  const auto out = constrain(instr(Side::Right, "wrist", Dof::Abduction, 45), pose, kb().limits, kb().model);
  const auto elapsed = std::chrono::steady_clock::now() - start;
  CHECK(elapsed < std::chrono::seconds(1));
  REQUIRE(out.verdict == Verdict::Adjusted);
  REQUIRE(out.instructions.size() == 2);
  CHECK(out.instructions[0] == EmsInstruction{Side::Right, "wrist", Dof::Abduction, 14, std::nullopt,
                                              InstructionSource::ConstrainedAdjusted});
  CHECK(out.instructions[1] == EmsInstruction{Side::Right, "elbow", Dof::Flexion, 31, std::nullopt,
                                              InstructionSource::ConstrainedAdjusted});
  CHECK(out.explanation == "wrist 14, elbow 31");
}

TEST_CASE("neck requests beyond range or at the limit are stopped") {
  const auto at_limit = load_fixture_pose("neck_at_limit_pose.json");
  auto out = constrain(instr(Side::None, "neck", Dof::RotationCw, 180), BodyPose{}, kb().limits, kb().model);
  CHECK(out.verdict == Verdict::StoppedImpossible);
  CHECK(out.instructions.empty());
  CHECK(out.explanation.find("160-degree range") != std::string::npos);

  out = constrain(instr(Side::None, "neck", Dof::RotationCw, 10), at_limit, kb().limits, kb().model);
  CHECK(out.verdict == Verdict::StoppedMaxed);
  CHECK(out.instructions.empty());
  CHECK(out.explanation == "neck has 0 of 10 degrees left and no parent joint can contribute");

  out = constrain(instr(Side::None, "neck", Dof::RotationCcw, 30), at_limit, kb().limits, kb().model);
  CHECK(out.verdict == Verdict::Accepted);
}

TEST_CASE("exhausting a chain with partial room reports how far it got") {
  // Wrist flexion 150 fits the span but the whole arm only has so much room.
  const auto pose = pose_of({{Side::Right, "wrist", Axis::FlexionExtension, 0},
                             {Side::Right, "elbow", Axis::FlexionExtension, 140},
                             {Side::Right, "shoulder", Axis::FlexionExtension, 170}});
  const auto out = constrain(instr(Side::Right, "wrist", Dof::Flexion, 100), pose, kb().limits, kb().model);
  CHECK(out.verdict == Verdict::StoppedMaxed);
  CHECK(out.explanation == "kinematic chain exhausted after 95 of 100 degrees");
}

TEST_CASE("a saturated first candidate is passed through to its parent") {
  // Elbow fully flexed: wrist flexion overflow skips to the shoulder.
  const auto pose = pose_of({{Side::Right, "wrist", Axis::FlexionExtension, 80},
                             {Side::Right, "elbow", Axis::FlexionExtension, 145}});
  const auto out = constrain(instr(Side::Right, "wrist", Dof::Flexion, 30), pose, kb().limits, kb().model);
  REQUIRE(out.verdict == Verdict::Adjusted);
  REQUIRE(out.instructions.size() == 1);
  CHECK(out.instructions[0].joint == "shoulder");
  CHECK(out.instructions[0].target_angle == 30);
}

TEST_CASE("constraint outcomes conserve the requested angle") {
  std::mt19937_64 rng(7);
  int adjusted = 0, maxed = 0, impossible = 0;
  for (int n = 0; n < 3000; ++n) {
    const auto pose = random_pose(rng);
    const auto& gestures = kb().gestures;
    const auto& g = gestures[rng() % gestures.size()];
    const auto& range = kb().limits.at(g.joint, axis_of(g.movement));
    const double target = std::round(std::uniform_real_distribution<double>(0, range.span() * 1.2)(rng) * 10) / 10;
    const auto in = instr(g.handedness, g.joint, g.movement, target);
    const auto out = constrain(in, pose, kb().limits, kb().model);
    const double own = headroom(pose, kb().limits, g.handedness, g.joint, g.movement);
    INFO(serialize_instruction(in));
    CHECK((out.verdict == Verdict::StoppedImpossible) == (target > range.span()));
    switch (out.verdict) {
      case Verdict::Accepted:
        CHECK(target <= own);
        REQUIRE(out.instructions.size() == 1);
        CHECK(out.instructions[0] == in);
        break;
      case Verdict::Adjusted: {
        ++adjusted;
        CHECK(target > own);
        double sum = 0;
        std::string prev = g.joint;
        for (std::size_t k = 0; k < out.instructions.size(); ++k) {
          const auto& o = out.instructions[k];
          sum += o.target_angle;
          CHECK(o.target_angle > 0);
          CHECK(o.target_angle <= headroom(pose, kb().limits, o.handedness, o.joint, o.movement));
          if (k > 0) CHECK(kb().model.is_ancestor(o.joint, prev));
          if (k > 0 || own <= 0) CHECK(o.joint != g.joint);
          prev = o.joint;
        }
        CHECK(sum == doctest::Approx(target).epsilon(1e-12));
        break;
      }
      case Verdict::StoppedMaxed: ++maxed; CHECK(out.instructions.empty()); break;
      case Verdict::StoppedImpossible: ++impossible; CHECK(out.instructions.empty()); break;
    }
  }
  CHECK(adjusted > 50);
  CHECK(maxed > 50);
  CHECK(impossible > 50);
}

TEST_CASE("completed instructions move the pose and clamp at the limit") {
  const auto pose = pose_of({{Side::Right, "elbow", Axis::FlexionExtension, 90}});
  auto next = apply_completed(pose, instr(Side::Right, "elbow", Dof::Extension, 30), kb().limits, kb().model);
  CHECK(next.angle(Side::Right, "elbow", Axis::FlexionExtension) == 60);
  next = apply_completed(pose, instr(Side::Right, "elbow", Dof::Flexion, 90), kb().limits, kb().model);
  CHECK(next.angle(Side::Right, "elbow", Axis::FlexionExtension) == 145);
  next = apply_completed(pose, instr(Side::Left, "neck", Dof::RotationCcw, 20), kb().limits, kb().model);
  CHECK(next.angle(Side::None, "neck", Axis::Rotation) == -20);
}

TEST_CASE("simulated motion respects velocity, drive and threshold") {
  const SimResponseConfig cfg;
  const BodyPose start;
  auto cmd = motion_for(instr(Side::Right, "elbow", Dof::Flexion, 60), start, kb().limits, kb().model, 1.0);
  CHECK(cmd.goal_angle == 60);
  auto p = apply_simulated_motion(start, cmd, 1000, cfg, kb().limits);
  CHECK(p.angle(Side::Right, "elbow", Axis::FlexionExtension) == doctest::Approx(30));
  CHECK(p.timestamp_ms == 1000);
  p = apply_simulated_motion(p, cmd, 5000, cfg, kb().limits);
  CHECK(p.angle(Side::Right, "elbow", Axis::FlexionExtension) == 60);

  cmd.drive = 0.5;
  p = apply_simulated_motion(start, cmd, 1000, cfg, kb().limits);
  CHECK(p.angle(Side::Right, "elbow", Axis::FlexionExtension) == doctest::Approx(15));

  cmd.drive = 0.3;
  p = apply_simulated_motion(start, cmd, 1000, cfg, kb().limits);
  CHECK(p.angle(Side::Right, "elbow", Axis::FlexionExtension) == 0);

  cmd.drive = 1.0;
  cmd.goal_angle = 500;
  p = apply_simulated_motion(start, cmd, 100000, cfg, kb().limits);
  CHECK(p.angle(Side::Right, "elbow", Axis::FlexionExtension) == 145);
}

TEST_CASE("pose text describes limbs in coarse buckets") {
  const auto pose = pose_of({{Side::Right, "wrist", Axis::PronationSupination, -80},
                             {Side::Right, "elbow", Axis::FlexionExtension, 52},
                             {Side::Left, "shoulder", Axis::FlexionExtension, 5}});
  const auto text = pose_to_text(pose, kb().model);
  CHECK(text.find("right arm: ") != std::string::npos);
  CHECK(text.find("elbow flexed 45 degrees") != std::string::npos);
  CHECK(text.find("wrist supinated 75 degrees") != std::string::npos);
  CHECK(text.find("palm up") != std::string::npos);
  CHECK(text.find("left arm: neutral") != std::string::npos);
  CHECK(pose_to_text(BodyPose{}, kb().model).find("torso: neutral\n") == 0);
}
