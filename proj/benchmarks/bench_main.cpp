#include <benchmark/benchmark.h>

#include <filesystem>
#include <fstream>

#include "todplay/dialogue_systems.hpp"
#include "todplay/entity_store.hpp"
#include "todplay/game_master.hpp"
#include "todplay/players.hpp"
#include "todplay/prompts.hpp"
#include "todplay/tool_schema.hpp"

using namespace todplay;
namespace fs = std::filesystem;

namespace {

const fs::path kData = TODPLAY_BENCH_DATA_DIR;

const EntityStore& store() {
  static const EntityStore s = load_store({{Domain::restaurant, (kData / "db" / "restaurant.jsonl").string()},
                                           {Domain::hotel, (kData / "db" / "hotel.jsonl").string()},
                                           {Domain::train, (kData / "db" / "train.jsonl").string()}});
  return s;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

void BM_ParseToolCall(benchmark::State& state) {
  const std::string raw =
      R"({"name": "validaterestaurantbooking", "arguments": {"name": "the amber bistro", "people": "4", "day": "tuesday", "time": "20:45"}})";
  const auto& registry = SchemaRegistry::monolithic();
  for (auto _ : state) benchmark::DoNotOptimize(parse_and_validate(raw, registry));
}
BENCHMARK(BM_ParseToolCall);

void BM_QueryTrain(benchmark::State& state) {
  const auto filter = QueryFilter::from_arguments(
      Domain::train, {{"departure", "cambridge"}, {"day", "monday"}, {"leaveat", "10:00"}});
  for (auto _ : state) benchmark::DoNotOptimize(store().query(filter));
}
BENCHMARK(BM_QueryTrain);

void BM_ScriptedDialogue(benchmark::State& state) {
  const auto arch = static_cast<Architecture>(state.range(0));
  const auto golden = kData / "examples" / "golden";
  Goal goal = load_goals((golden / "goals.jsonl").string()).front();
  const auto user_script = ScriptedPlayer::script_from_json(read_json(golden / "user_scripts.json").at(goal.id()));
  const auto entry = read_json(golden / "system_scripts.json").at(goal.id());
  const std::string arch_name(to_string(arch));
  const auto library = PromptLibrary::load(kData / "prompts");
  for (auto _ : state) {
    ScriptedPlayer user(user_script, PlayerRole::user);
    PlayerMap players;
    for (const char* role : {"monolithic", "manager", "intent", "slots", "response"}) {
      const auto& src = entry.contains(arch_name) && entry[arch_name].contains(role) ? entry[arch_name][role]
                        : entry.contains(role) && entry[role].is_array() ? entry[role]
                                               : nlohmann::json::array();
      players[role] = std::make_shared<ScriptedPlayer>(ScriptedPlayer::script_from_json(src), PlayerRole::system);
    }
    auto system = make_dialogue_system(arch, std::move(players), build_system_prompts(library, arch), {});
    VirtualClock clock;
    RunOptions options;
    options.clock = &clock;
    benchmark::DoNotOptimize(run_dialogue(goal, user, *system, store(), {}, 0, options));
  }
}
BENCHMARK(BM_ScriptedDialogue)->DenseRange(0, 2);

}  // namespace

BENCHMARK_MAIN();
