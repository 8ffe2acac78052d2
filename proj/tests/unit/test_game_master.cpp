#include <doctest.h>

#include "test_support.hpp"

using namespace testing;

namespace {

std::vector<std::string> repeat(const std::string& s, std::size_t n) { return std::vector<std::string>(n, s); }

void check_replay_agrees(const Transcript& t) {
  const auto r = replay(to_json(t));
  CHECK(r.user_turns == t.user_turn_count());
  CHECK(r.bookings == t.bookings);
  switch (t.outcome) {
    case Outcome::completed:
      CHECK(r.done);
      CHECK_FALSE(r.aborted);
      break;
    case Outcome::aborted_format_violation:
      CHECK(r.aborted);
      break;
    case Outcome::turn_limit_reached:
      CHECK_FALSE(r.done);
      CHECK_FALSE(r.aborted);
      CHECK(r.user_turns == 15);
      break;
  }
  CHECK(check_transcript(t).empty());
}

}  // namespace

TEST_CASE("done detection trims and compares exactly") {
  CHECK(detect_done("DONE"));
  CHECK(detect_done("  DONE\n"));
  CHECK_FALSE(detect_done("done"));
  CHECK_FALSE(detect_done("DONE."));
  CHECK_FALSE(detect_done("I am DONE"));
  CHECK(detect_done("END", "END"));
}

TEST_CASE("golden dialogues complete under every architecture") {
  for (auto arch : {Architecture::monolithic, Architecture::modular_prog, Architecture::modular_llm}) {
    for (const char* id : {"sng0001", "sng0002", "sng0003"}) {
      CAPTURE(to_string(arch));
      CAPTURE(id);
      const auto t = run_golden(id, arch);
      CHECK(t.outcome == Outcome::completed);
      REQUIRE(t.bookings.size() == 1);
      check_replay_agrees(t);
    }
  }
}

TEST_CASE("the user speaks first and the transcript is ordered") {
  const auto t = run_golden("sng0001", Architecture::monolithic);
  REQUIRE_FALSE(t.turns.empty());
  CHECK(t.turns.front().speaker == Speaker::user);
  for (std::size_t i = 0; i < t.turns.size(); ++i) CHECK(t.turns[i].index == i);
  for (std::size_t i = 1; i < t.turns.size(); ++i) CHECK(t.turns[i].wall_time_ms >= t.turns[i - 1].wall_time_ms);
}

TEST_CASE("a user that never says DONE stops at the turn limit") {
  const auto goal = golden_goal("sng0001");
  const auto t = run_scripted(goal, repeat("Still looking.", 40),
                              {{"monolithic", repeat(followup_call("Could you tell me more?"), 40)}},
                              Architecture::monolithic, 0);
  CHECK(t.outcome == Outcome::turn_limit_reached);
  CHECK(t.user_turn_count() == 15);
  check_replay_agrees(t);

  GameConfig short_game;
  short_game.max_user_turns = 4;
  const auto s = run_scripted(goal, repeat("Still looking.", 40),
                              {{"monolithic", repeat(followup_call("More?"), 40)}}, Architecture::monolithic, 0,
                              short_game);
  CHECK(s.user_turn_count() == 4);
}

TEST_CASE("two calls in one message abort the dialogue") {
  const auto goal = golden_goal("sng0001");
  const std::string two = followup_call("one") + followup_call("two");
  const auto t = run_scripted(goal, {"Hello", "DONE"}, {{"monolithic", {two}}}, Architecture::monolithic, 0);
  CHECK(t.outcome == Outcome::aborted_format_violation);
  REQUIRE(t.turns.size() == 3);
  CHECK(t.turns[1].speaker == Speaker::dialogue_system);
  CHECK_FALSE(t.turns[1].tool_call.has_value());
  CHECK(t.turns[2].speaker == Speaker::game_master);
  CHECK(t.turns[2].content.find("multiple_calls") != std::string::npos);
  check_replay_agrees(t);
}

TEST_CASE("violations in sub-modules abort modular dialogues") {
  const auto goal = golden_goal("sng0001");
  auto scripts = golden_system_scripts("sng0001", "modular_prog");
  scripts["slots"] = {"the area is east"};
  const auto t = run_scripted(goal, golden_user_script("sng0001"), scripts, Architecture::modular_prog, 0);
  CHECK(t.outcome == Outcome::aborted_format_violation);
  CHECK(t.turns.back().speaker == Speaker::game_master);
  CHECK(t.turns[t.turns.size() - 2].speaker == Speaker::subsystem);

  auto llm = golden_system_scripts("sng0001", "modular_llm");
  llm["manager"] = {R"({"name": "processnextsubsystem", "arguments": {"subsystem": "planner"}})"};
  const auto u = run_scripted(goal, golden_user_script("sng0001"), llm, Architecture::modular_llm, 0);
  CHECK(u.outcome == Outcome::aborted_format_violation);
}

TEST_CASE("too many tool steps in one turn abort the dialogue") {
  const auto goal = golden_goal("sng0001");
  const std::string query = R"({"name": "retrievefromrestaurantdb", "arguments": {"area": "east"}})";
  GameConfig config;
  config.max_tool_steps_per_turn = 3;
  const auto t = run_scripted(goal, {"Hello", "DONE"}, {{"monolithic", repeat(query, 10)}},
                              Architecture::monolithic, 0, config);
  CHECK(t.outcome == Outcome::aborted_format_violation);
  CHECK(t.turns.back().speaker == Speaker::game_master);
  CHECK(t.turns.back().content.find(std::string(kBudgetNote)) != std::string::npos);
  std::size_t calls = 0;
  for (const auto& turn : t.turns) calls += turn.speaker == Speaker::dialogue_system;
  CHECK(calls == 3);
}

TEST_CASE("same seed gives identical transcripts, other seeds other refnums") {
  for (auto arch : {Architecture::monolithic, Architecture::modular_prog, Architecture::modular_llm}) {
    const auto a = run_golden("sng0002", arch, 11);
    const auto b = run_golden("sng0002", arch, 11);
    CHECK(to_json(a).dump() == to_json(b).dump());
    const auto c = run_golden("sng0002", arch, 12);
    CHECK(a.bookings[0].reference_number != c.bookings[0].reference_number);
  }
}

TEST_CASE("the booking reference reaches the user") {
  const auto t = run_golden("sng0003", Architecture::modular_llm);
  REQUIRE(t.bookings.size() == 1);
  bool relayed = false;
  for (const auto& turn : t.turns) {
    if (turn.speaker == Speaker::dialogue_system && turn.tool_call && turn.tool_call->function == "followup") {
      relayed = relayed || turn.content.find(t.bookings[0].reference_number) != std::string::npos;
    }
  }
  CHECK(relayed);
}

TEST_CASE("query errors are reported back instead of thrown") {
  const auto goal = golden_goal("sng0001");
  const std::string bad = R"({"name": "retrievefromrestaurantdb", "arguments": {"colour": "red"}})";
  const auto t = run_scripted(goal, {"Hello", "DONE"}, {{"monolithic", {bad, followup_call("Sorry.")}}},
                              Architecture::monolithic, 0);
  CHECK(t.outcome == Outcome::completed);
  bool saw_error = false;
  for (const auto& turn : t.turns) {
    if (turn.speaker == Speaker::tool_result) saw_error = turn.content.find("\"error\"") != std::string::npos;
  }
  CHECK(saw_error);
}

TEST_CASE("token usage is metered for both sides") {
  const auto t = run_golden("sng0001", Architecture::modular_prog);
  CHECK(t.user_usage.calls == 3);
  CHECK(t.system_usage.calls == 6);
  CHECK(t.user_usage.prompt_tokens > 0);
  CHECK(t.system_usage.response_tokens > 0);
}

TEST_CASE("latency runs from the first user turn to the last turn") {
  const auto t = run_golden("sng0001", Architecture::monolithic);
  const double expected = (t.turns.back().wall_time_ms - t.turns.front().wall_time_ms) / 1000.0;
  CHECK(t.latency_s == doctest::Approx(expected).epsilon(1e-12));
  CHECK(t.latency_s > 0);
}

TEST_CASE("virtual clocks tick on every read") {
  VirtualClock c(25);
  CHECK(c.now_ms() == 0);
  CHECK(c.now_ms() == 25);
  CHECK(c.now_ms() == 50);
}

TEST_CASE("game config rejects nonsense bounds") {
  GameConfig c;
  c.max_user_turns = 0;
  CHECK_THROWS_AS(c.validate(), InvalidValue);
  CHECK_THROWS_AS(GameConfig::from_json({{"done_token", ""}}), InvalidValue);
  CHECK(GameConfig::from_json({{"max_user_turns", 7}}).max_user_turns == 7);
}

TEST_CASE("tool payloads serialise by kind") {
  const auto& store = fixture_store();
  const RefnumContext ctx{1, "d", 0};
  const auto r = payload_to_json(execute_tool(store, {"retrievefromrestaurantdb", {{"area", "east"}}}, ctx));
  CHECK(r["domain"] == "restaurant");
  CHECK(r["count"] == r["results"].size());
  const auto f = payload_to_json(execute_tool(store, {"validatehotelbooking", {{"name", "nowhere"}}}, ctx));
  CHECK(f["status"] == "failed");
  CHECK(f["reason"] == "no_matching_entity");
  const auto u = payload_to_json(execute_tool(store, {"followup", {{"message", "hi"}}}, ctx));
  CHECK(u["route"] == "user");
  CHECK_THROWS_AS(execute_tool(store, {"bookflight", {}}, ctx), InvalidValue);
}
