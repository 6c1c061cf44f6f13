#include <doctest.h>

#include "core/pipeline.hpp"
#include "support.hpp"

using namespace gems;
using testsupport::instr;

namespace {

struct Run {
  Scenario sc;
  GenerationResult result;
};

Run run(const std::string& id, const std::string& condition) {
  Run r{testsupport::scenario(id), {}};
  auto mock = MockClient::from_file(*r.sc.mock);
  r.result = run_pipeline(r.sc.id, r.sc.context, AblationFlags::from_name(condition), *r.sc.kb, r.sc.pose, *mock);
  return r;
}

const TranscriptEntry& stage(const GenerationResult& r, const std::string& name) {
  for (const auto& t : r.transcript)
    if (t.stage == name) return t;
  FAIL("no stage " << name);
  return r.transcript.front();
}

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

}  // namespace

TEST_CASE("condition names round-trip") {
  for (const char* name : {"full", "no-context", "no-pose", "no-ems", "naive"})
    CHECK(AblationFlags::from_name(name).name() == name);
  CHECK_THROWS_AS(AblationFlags::from_name("half"), Error);
  CHECK(AblationFlags{false, false, true, false}.name() == "custom-no-context-no-pose");
}

TEST_CASE("full pipeline decomposes the window handle turn") {
  const auto r = run("window", "full").result;
  CHECK(r.transcript.size() == 3);
  REQUIRE(r.plan.size() == 3);
  CHECK(r.report.empty());
  const auto& turn = r.plan[1].instructions;
  REQUIRE(turn.size() == 3);
  CHECK(turn[0].joint == "wrist");
  CHECK(turn[0].target_angle == 60);
  CHECK(turn[1] == EmsInstruction{Side::Right, "elbow", Dof::Extension, 80, std::nullopt,
                                  InstructionSource::ConstrainedAdjusted});
  CHECK(turn[2].joint == "shoulder");
  CHECK(turn[2].movement == Dof::Abduction);
  CHECK(turn[2].target_angle == 40);
  CHECK(r.plan[1].checkpoint == "handle points up");
  bool saw_adjusted = false;
  for (const auto& e : r.constraint_log) saw_adjusted |= e.outcome.verdict == Verdict::Adjusted;
  CHECK(saw_adjusted);
}

TEST_CASE("each ablation removes its inputs from the prompts") {
  const auto full = run("window", "full").result;
  CHECK(contains(stage(full, "tutorial").user, "living room"));
  CHECK(contains(stage(full, "movements").user, "Current body pose"));
  CHECK(contains(stage(full, "stimulation").user, "Joint limits"));
  CHECK(contains(stage(full, "stimulation").user, "Kinematic chain"));

  const auto no_context = run("window", "no-context").result;
  CHECK_FALSE(contains(stage(no_context, "tutorial").user, "living room"));
  CHECK_FALSE(contains(stage(no_context, "tutorial").user, "window"));
  CHECK_FALSE(contains(stage(no_context, "movements").user, "Scene"));

  const auto no_pose = run("window", "no-pose").result;
  CHECK_FALSE(contains(stage(no_pose, "movements").user, "Current body pose"));
  CHECK_FALSE(contains(stage(no_pose, "stimulation").user, "Current body pose"));
  CHECK(contains(stage(no_pose, "stimulation").user, "Joint limits"));

  const auto no_ems = run("window", "no-ems").result;
  CHECK_FALSE(contains(stage(no_ems, "stimulation").user, "Joint limits"));
  CHECK_FALSE(contains(stage(no_ems, "stimulation").user, "Kinematic chain"));
  CHECK(no_ems.constraint_log.empty());
  // Without the constraint pass the raw selection survives.
  CHECK(no_ems.plan == no_ems.steps);
}

TEST_CASE("naive condition is one call without context") {
  const auto r = run("window", "naive").result;
  REQUIRE(r.transcript.size() == 1);
  CHECK(r.transcript[0].stage == "naive");
  CHECK_FALSE(contains(r.transcript[0].user, "window"));
  CHECK(r.tutorial.empty());
  CHECK(r.constraint_log.empty());
  CHECK(flatten(r.plan).size() == 2);
  CHECK(r.report.size() == 1);
}

TEST_CASE("movement parser reads numbered lines and until clauses") {
  const auto steps = parse_movement_steps("Sure:\n1. Grip the cap [until: cap gripped]\n2) Turn it\n\nnot a step\n3.\n");
  REQUIRE(steps.size() == 2);
  CHECK(steps[0].description == "Grip the cap");
  CHECK(steps[0].checkpoint == "cap gripped");
  CHECK(steps[1].ordinal == 2);
  CHECK(steps[1].checkpoint.empty());
}

TEST_CASE("stimulation parser assigns lines to steps and rejects unknown gestures") {
  const auto& kb = testsupport::default_kb();
  std::vector<MovementStep> steps(3);
  for (int i = 0; i < 3; ++i) steps[i].ordinal = i + 1;
  FormatReport rep;
  parse_stimulation_response("right elbow flexion 10\nstep 2:\nleft knee flexion 10\nright wrist flexion 5\n"
                             "step 3:\nstep 9:\nright elbow flexion 1\n",
                             steps, kb, rep);
  CHECK(steps[0].instructions == std::vector{instr(Side::Right, "elbow", Dof::Flexion, 10)});
  CHECK(steps[1].instructions == std::vector{instr(Side::Right, "wrist", Dof::Flexion, 5)});
  CHECK(steps[2].unrealizable);
  CHECK_FALSE(steps[1].unrealizable);
  // Unknown gesture, unknown step header and the orphaned line after it.
  CHECK(rep.size() == 3);
}

TEST_CASE("constraint pass advances the predicted pose between instructions") {
  const auto& kb = testsupport::default_kb();
  std::vector<MovementStep> steps(2);
  steps[0].instructions = {instr(Side::Right, "elbow", Dof::Flexion, 100)};
  steps[1].ordinal = 2;
  steps[1].instructions = {instr(Side::Right, "elbow", Dof::Flexion, 100), instr(Side::None, "neck", Dof::Flexion, 500)};
  std::vector<ConstraintLogEntry> log;
  const auto plan = constrain_plan(steps, BodyPose{}, kb, log);
  REQUIRE(log.size() == 3);
  CHECK(log[0].outcome.verdict == Verdict::Accepted);
  // 45 left at the elbow, the rest goes to the shoulder.
  CHECK(log[1].outcome.verdict == Verdict::Adjusted);
  CHECK(log[1].outcome.explanation == "elbow 45, shoulder 55");
  CHECK(log[2].outcome.verdict == Verdict::StoppedImpossible);
  CHECK(plan[1].instructions.size() == 2);
  CHECK_FALSE(plan[1].unrealizable);
}

TEST_CASE("a failing stage is reported with its name") {
  MockClient empty({});
  const auto sc = testsupport::scenario("window");
  try {
    run_pipeline("window", sc.context, AblationFlags{}, *sc.kb, sc.pose, empty);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyResponse);
    CHECK(std::string(e.what()).rfind("tutorial: ", 0) == 0);
  }
  MockClient no_steps({{"*", "tutorial", "*", "", "1. do it"}, {"*", "movements", "*", "", "just do it"}});
  try {
    run_pipeline("window", sc.context, AblationFlags{}, *sc.kb, sc.pose, no_steps);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Pipeline);
  }
}

TEST_CASE("replaying a transcript reproduces the result byte for byte") {
  for (const char* id : {"window", "pill_bottle", "golf", "camera"}) {
    for (const char* cond : {"full", "no-pose", "naive"}) {
      const auto first = run(id, cond);
      ReplayClient replay(first.result.transcript);
      const auto again = run_pipeline(first.sc.id, first.sc.context, AblationFlags::from_name(cond), *first.sc.kb,
                                      first.sc.pose, replay);
      CHECK_MESSAGE(to_json(again).dump() == to_json(first.result).dump(), id, " ", cond);
    }
  }
}

TEST_CASE("plan text forms") {
  std::vector<MovementStep> plan(2);
  plan[0].description = "grip";
  plan[0].checkpoint = "held";
  plan[0].instructions = {instr(Side::Right, "fingers", Dof::Flexion, 40)};
  plan[1].ordinal = 2;
  plan[1].description = "smile";
  plan[1].unrealizable = true;
  CHECK(plan_to_text(plan) ==
        "1. grip [until: held]\n   right fingers flexion 40\n2. smile (no EMS gesture; spoken only)\n");
  CHECK(plan_to_instruction_file(plan) == "# step 1: grip\nright fingers flexion 40\n# step 2: smile (unrealizable)\n");
}
