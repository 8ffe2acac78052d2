#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "todplay/domain_model.hpp"
#include "todplay/entity_store.hpp"
#include "todplay/game_master.hpp"
#include "todplay/prompts.hpp"
#include "todplay/players.hpp"
#include "todplay/tool_schema.hpp"

namespace testing {

using namespace todplay;
namespace fs = std::filesystem;

inline fs::path data_dir() { return fs::path(TODPLAY_TEST_DATA_DIR); }
inline fs::path golden_dir() { return data_dir() / "examples" / "golden"; }

inline const EntityStore& fixture_store() {
  static const EntityStore store = load_store({{Domain::restaurant, (data_dir() / "db/restaurant.jsonl").string()},
                                               {Domain::hotel, (data_dir() / "db/hotel.jsonl").string()},
                                               {Domain::train, (data_dir() / "db/train.jsonl").string()}});
  return store;
}

inline nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  return nlohmann::json::parse(in);
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("todplay-test-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

// ---------------------------------------------------------------------------
// Brute-force query oracle

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline std::optional<std::string> field_of(const EntityRecord& r, const std::string& column) {
  for (const auto& [k, v] : r.fields()) {
    if (lower(k) == lower(column)) return v;
  }
  return std::nullopt;
}

inline bool compare_holds(const std::string& have, const std::string& op, const std::string& want) {
  if (op == "=") return have == want;
  if (op == ">=") return have >= want;
  if (op == "<=") return have <= want;
  if (op == ">") return have > want;
  if (op == "<") return have < want;
  return false;
}

/// Scan every record in file order, keep the matches, then truncate to five.
inline std::vector<EntityRecord> brute_force_query(const EntityStore& store, const QueryFilter& f) {
  std::vector<EntityRecord> all;
  for (const auto& r : store.records(f.domain)) {
    bool ok = true;
    for (const auto& [k, v] : f.equals) {
      auto have = field_of(r, k);
      ok = ok && have && lower(*have) == lower(v);
    }
    for (const auto& [k, c] : f.compares) {
      auto have = field_of(r, k);
      ok = ok && have && compare_holds(*have, c.op, c.value);
    }
    if (ok) all.push_back(r);
  }
  if (all.size() > 5) all.erase(all.begin() + 5, all.end());
  return all;
}

/// Random filter over existing column values (mostly) and unseen values (sometimes).
inline QueryFilter random_filter(std::mt19937_64& rng, const EntityStore& store) {
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  QueryFilter f;
  f.domain = kAllDomains[pick(3)];
  const auto& records = store.records(f.domain);
  std::vector<std::string> columns;
  for (const auto& [k, v] : records.front().fields()) columns.push_back(k);
  const std::size_t n_equals = pick(4);
  for (std::size_t i = 0; i < n_equals; ++i) {
    const std::string col = columns[pick(columns.size())];
    if (is_time_column(col) || is_star_column(col)) continue;
    std::string value = *field_of(records[pick(records.size())], col);
    if (pick(10) == 0) value = "no such " + col;
    if (pick(4) == 0) std::transform(value.begin(), value.end(), value.begin(), ::toupper);
    f.equals[col] = value;
  }
  static const char* ops[] = {"=", ">=", "<=", ">", "<"};
  if (f.domain == Domain::train && pick(2) == 0) {
    const std::string col = pick(2) == 0 ? "leaveat" : "arriveby";
    const int minutes = static_cast<int>(pick(24 * 60));
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02d:%02d", minutes / 60, minutes % 60);
    f.compares[col] = {ops[pick(5)], buf};
  }
  if (f.domain == Domain::hotel && pick(2) == 0) {
    f.compares["stars"] = {ops[pick(5)], std::to_string(1 + pick(5))};
  }
  return f;
}

// ---------------------------------------------------------------------------
// Hand-labelled model outputs

struct LabeledOutput {
  std::string label;
  std::string raw;
  std::optional<ViolationKind> expected;  // nullopt: a valid call
};

inline std::vector<LabeledOutput> violation_corpus() {
  using K = ViolationKind;
  const std::string followup = R"({"name": "followup", "arguments": {"message": "Which area?"}})";
  const std::string booking_missing_time =
      R"({"name": "validaterestaurantbooking", "arguments": {"food": "spanish", "area": "east", )"
      R"("pricerange": "cheap", "name": "the jade bistro", "people": "4", "day": "tuesday"}})";
  return {
      {"followup", followup, std::nullopt},
      {"restaurant retrieval", R"({"name": "retrievefromrestaurantdb", "arguments": {"area": "centre", "food": "thai"}})",
       std::nullopt},
      {"train retrieval with operator",
       R"({"name": "retrievefromtraindb", "arguments": {"departure": "cambridge", "arriveby": {"operator": "<=", "value": "18:00"}}})",
       std::nullopt},
      {"hotel stars operator",
       R"({"name": "retrievefromhoteldb", "arguments": {"area": "west", "stars": {"operator": ">=", "value": "3"}}})",
       std::nullopt},
      {"full restaurant booking",
       R"({"name": "validaterestaurantbooking", "arguments": {"food": "spanish", "area": "east", "pricerange": "cheap", )"
       R"("name": "the jade bistro", "people": "4", "day": "tuesday", "time": "20:45"}})",
       std::nullopt},
      {"fenced call", "```json\n" + followup + "\n```", std::nullopt},
      {"parameters key", R"({"name": "followup", "parameters": {"message": "Hello"}})", std::nullopt},
      {"stringified arguments", R"({"name": "followup", "arguments": "{\"message\": \"Hello\"}"})", std::nullopt},

      {"plain prose", "Sure, I can help you find a restaurant.", K::not_json},
      {"empty output", "", K::not_json},
      {"truncated object", R"({"name": "followup", "arguments": {"message": "Hi")", K::not_json},

      {"two objects back to back", followup + followup, K::multiple_calls},
      {"array of two calls", "[" + followup + ", " + followup + "]", K::multiple_calls},
      {"two calls on separate lines",
       R"({"name": "retrievefromrestaurantdb", "arguments": {"area": "east"}})"
       "\n" +
           followup,
       K::multiple_calls},

      {"unknown function", R"({"name": "bookflight", "arguments": {"to": "paris"}})", K::unknown_function},
      {"manager-only function", R"({"name": "processnextsubsystem", "arguments": {"subsystem": "intent_detection"}})",
       K::unknown_function},

      {"followup without message", R"({"name": "followup", "arguments": {}})", K::missing_required},
      {"booking missing time", booking_missing_time, K::missing_required},
      {"call without name", R"({"arguments": {"message": "Hello"}})", K::missing_required},

      {"area outside enum", R"({"name": "retrievefromrestaurantdb", "arguments": {"area": "downtown"}})",
       K::enum_violation},
      {"party too large",
       R"({"name": "validaterestaurantbooking", "arguments": {"food": "spanish", "area": "east", "pricerange": "cheap", )"
       R"("name": "the jade bistro", "people": "12", "day": "tuesday", "time": "20:45"}})",
       K::enum_violation},
      {"unknown operator",
       R"({"name": "retrievefromtraindb", "arguments": {"leaveat": {"operator": "~=", "value": "10:00"}}})",
       K::enum_violation},

      {"time in prose",
       R"({"name": "validaterestaurantbooking", "arguments": {"food": "spanish", "area": "east", "pricerange": "cheap", )"
       R"("name": "the jade bistro", "people": "4", "day": "tuesday", "time": "7pm"}})",
       K::pattern_violation},
      {"hour out of range",
       R"({"name": "validatetrainbooking", "arguments": {"destination": "ely", "departure": "cambridge", "day": "monday", )"
       R"("arriveby": "11:00", "leaveat": "25:00", "people": "1", "trainid": "TR1234"}})",
       K::pattern_violation},

      {"extra argument", R"({"name": "followup", "arguments": {"message": "Hi", "mood": "happy"}})", K::extra_property},
      {"extra top-level key", R"({"name": "followup", "arguments": {"message": "Hi"}, "id": "call_1"})",
       K::extra_property},

      {"prose before call", "Here is my answer: " + followup, K::free_text_outside_call},
      {"prose after call", followup + " Let me know if that works.", K::free_text_outside_call},

      {"message is a number", R"({"name": "followup", "arguments": {"message": 42}})", K::type_mismatch},
      {"arguments is an array", R"({"name": "followup", "arguments": ["Hi"]})", K::type_mismatch},
  };
}

// ---------------------------------------------------------------------------
// Transcript replay oracle

struct Replayed {
  std::size_t user_turns = 0;
  bool done = false;
  bool aborted = false;
  std::vector<BookingResult> bookings;
};

/// Re-derives the outcome and bookings from the raw turn list alone.
inline Replayed replay(const nlohmann::json& transcript, const std::string& done_token = "DONE") {
  Replayed r;
  for (const auto& turn : transcript.at("turns")) {
    const std::string speaker = turn.at("speaker");
    const std::string content = turn.at("content");
    if (speaker == "user") {
      ++r.user_turns;
      std::string t = content;
      t.erase(0, t.find_first_not_of(" \t\r\n"));
      t.erase(t.find_last_not_of(" \t\r\n") + 1);
      r.done = t == done_token;
    } else if (speaker == "game_master") {
      r.aborted = true;
    } else if (speaker == "tool_result") {
      const auto j = nlohmann::json::parse(content, nullptr, false);
      if (j.is_object() && j.value("status", "") == "confirmed") {
        BookingResult b;
        b.domain = domain_from_string(j.at("domain").get<std::string>());
        b.reference_number = j.at("reference_number");
        b.confirmed_slots = j.at("confirmed_slots").get<SlotMap>();
        r.bookings.push_back(b);
      }
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Scripted fixtures

inline Goal golden_goal(const std::string& id) {
  for (const auto& g : load_goals((golden_dir() / "goals.jsonl").string())) {
    if (g.id() == id) return g;
  }
  throw Error("no golden goal " + id);
}

inline std::vector<std::string> golden_user_script(const std::string& goal_id) {
  return ScriptedPlayer::script_from_json(read_json_file(golden_dir() / "user_scripts.json").at(goal_id));
}

/// System scripts of one golden goal for an architecture, keyed by role.
inline std::map<std::string, std::vector<std::string>> golden_system_scripts(const std::string& goal_id,
                                                                             const std::string& architecture) {
  const auto entry = read_json_file(golden_dir() / "system_scripts.json").at(goal_id);
  std::map<std::string, std::vector<std::string>> out;
  for (const char* role : {"monolithic", "manager", "intent", "slots", "response"}) {
    if (entry.contains(architecture) && entry[architecture].contains(role)) {
      out[role] = ScriptedPlayer::script_from_json(entry[architecture][role]);
    } else if (entry.contains(role) && entry[role].is_array()) {
      out[role] = ScriptedPlayer::script_from_json(entry[role]);
    }
  }
  return out;
}

inline std::string followup_call(const std::string& message) {
  return nlohmann::json{{"name", "followup"}, {"arguments", {{"message", message}}}}.dump();
}

inline const PromptLibrary& fixture_prompts() {
  static const PromptLibrary library = PromptLibrary::load(data_dir() / "prompts");
  return library;
}

inline std::vector<std::string> roles_of(Architecture architecture) {
  switch (architecture) {
    case Architecture::monolithic: return {"monolithic"};
    case Architecture::modular_prog: return {"intent", "slots", "response"};
    case Architecture::modular_llm: return {"manager", "intent", "slots", "response"};
  }
  return {};
}

inline Transcript run_scripted(const Goal& goal, std::vector<std::string> user_script,
                               std::map<std::string, std::vector<std::string>> system_scripts,
                               Architecture architecture, std::uint64_t seed, const GameConfig& config = {}) {
  ScriptedPlayer user(std::move(user_script), PlayerRole::user, config.done_token);
  PlayerMap players;
  for (const auto& role : roles_of(architecture)) {
    players[role] = std::make_shared<ScriptedPlayer>(system_scripts[role], PlayerRole::system);
  }
  auto system = make_dialogue_system(architecture, std::move(players),
                                     build_system_prompts(fixture_prompts(), architecture), config.generation);
  VirtualClock clock;
  RunOptions options;
  options.clock = &clock;
  options.user_prompt = build_user_sim_prompt(fixture_prompts(), goal);
  return run_dialogue(goal, user, *system, fixture_store(), config, seed, options);
}

inline Transcript run_golden(const std::string& goal_id, Architecture architecture, std::uint64_t seed = 0) {
  return run_scripted(golden_goal(goal_id), golden_user_script(goal_id),
                      golden_system_scripts(goal_id, std::string(to_string(architecture))), architecture, seed);
}

}  // namespace testing
