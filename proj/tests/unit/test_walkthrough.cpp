#include <doctest.h>

#include "session_support.hpp"

using namespace gems;
using namespace testsupport;

TEST_CASE("pill bottle walkthrough matches the recorded event stream") {
  const auto s = pill_bottle_walkthrough(scenario("pill_bottle"));
  CHECK(s->phase() == Phase::Done);

  // Plan 1 runs step 2 to the cap; plan 2 pushes and turns and succeeds.
  const auto plans = events_of(*s, "plan");
  REQUIRE(plans.size() == 2);
  int failed = 0, max_exec = 0;
  for (const auto& e : events_of(*s, "step")) {
    if (e.data["event"] == "failed") ++failed;
    if (e.data["event"] == "started") max_exec = std::max(max_exec, e.data["execution"].get<int>());
  }
  CHECK(failed == 1);
  CHECK(max_exec == 5);
  const auto last_cp = events_of(*s, "checkpoint").back();
  CHECK(last_cp.data["decision"] == "done");
  CHECK(last_cp.data["facts"] == "cap_gripped=true, cap_removed=true");
  const auto plan2 = plans[1].data["steps"].dump();
  CHECK(plan2.find("Push the cap down") != std::string::npos);
  CHECK(s->snapshot()["facts"]["cap_removed"] == true);

  const auto produced = transcript_without_pose(*s);
  const auto path = tests_dir() / "golden" / "pill_bottle_walkthrough.ndjson";
  if (std::getenv("GEMS_UPDATE_GOLDEN")) write_text(path, produced);
  CHECK(produced == read_text(path));
}

TEST_CASE("the walkthrough ends after one plan when the first attempt opens the bottle") {
  auto sc = scenario("pill_bottle");
  sc.world = WorldOracle({{"cap_gripped", false}, {"cap_removed", false}},
                         {{"cap_gripped", true, 1, "grip"}, {"cap_removed", true, 2, "turn"}});
  const auto s = pill_bottle_walkthrough(sc);
  CHECK(s->phase() == Phase::Done);
  CHECK(events_of(*s, "plan").size() == 1);
  // The second run of step 2 sees the cap come off.
  CHECK(s->state().executions == std::vector<int>{1, 2});
}

TEST_CASE("the walkthrough is deterministic") {
  const auto a = transcript_without_pose(*pill_bottle_walkthrough(scenario("pill_bottle")));
  const auto b = transcript_without_pose(*pill_bottle_walkthrough(scenario("pill_bottle")));
  CHECK(a == b);
}
