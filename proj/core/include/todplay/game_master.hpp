#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "todplay/dialogue_systems.hpp"
#include "todplay/entity_store.hpp"

namespace todplay {

struct GameConfig {
  int max_user_turns = 15;
  int max_tool_steps_per_turn = 10;
  std::string done_token = "DONE";
  GenerationParams generation;
  std::string tokenizer = "whitespace";

  /// Throws InvalidValue when a bound is below 1 or the done token is empty.
  void validate() const;
  static GameConfig from_json(const nlohmann::json& j);
};

class Clock {
 public:
  virtual ~Clock() = default;
  /// Milliseconds since an arbitrary fixed origin; never decreases.
  virtual std::int64_t now_ms() = 0;
};

class SteadyClock : public Clock {
 public:
  SteadyClock() : origin_(std::chrono::steady_clock::now()) {}
  std::int64_t now_ms() override;

 private:
  std::chrono::steady_clock::time_point origin_;
};

/// Advances by a fixed tick on every read, so timings are reproducible.
class VirtualClock : public Clock {
 public:
  explicit VirtualClock(std::int64_t tick_ms = 100) : tick_ms_(tick_ms) {}
  std::int64_t now_ms() override;

 private:
  std::int64_t tick_ms_;
  std::int64_t now_ = 0;
};

/// True iff the trimmed utterance equals the done token exactly.
bool detect_done(std::string_view utterance, std::string_view done_token = "DONE");

struct RouteToUser {
  std::string message;
};

struct RouteToSubsystem {
  std::string subsystem;
  std::string input_data;
};

struct RetrievalResult {
  Domain domain = Domain::restaurant;
  std::vector<EntityRecord> records;
  std::optional<std::string> error;  // query error, reported back to the caller
};

using ToolPayload =
    std::variant<RouteToUser, RouteToSubsystem, RetrievalResult, BookingResult, BookingFailure>;

struct RefnumContext {
  std::uint64_t seed = 0;
  std::string dialogue_id;
  std::size_t counter = 0;
};

ToolPayload execute_tool(const EntityStore& store, const ToolCall& call, const RefnumContext& refnum);
nlohmann::json payload_to_json(const ToolPayload& payload);

inline constexpr std::string_view kBudgetNote = "tool budget exceeded";

struct RunOptions {
  Clock* clock = nullptr;       // SteadyClock when null
  std::string dialogue_id;      // "<goal id>#<seed>" when empty
  std::optional<ChatMessage> user_prompt;  // rendered from the default templates when unset
};

/// Runs one dialogue to DONE, an abort, or the user-turn limit. The user speaks first.
Transcript run_dialogue(const Goal& goal, Player& user, DialogueSystem& system,
                        const EntityStore& store, const GameConfig& config, std::uint64_t seed,
                        const RunOptions& options = {});

}  // namespace todplay
