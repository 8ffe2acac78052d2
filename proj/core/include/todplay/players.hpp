#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "todplay/domain_model.hpp"

namespace todplay {

enum class ChatRole { system, user, assistant };

std::string_view to_string(ChatRole role);

struct ChatMessage {
  ChatRole role = ChatRole::user;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

nlohmann::json to_json(const ChatMessage& message);

/// What a player sees when asked to speak. history[0] is the system prompt.
struct PlayerContext {
  std::vector<ChatMessage> history;
  GenerationParams generation;
  nlohmann::json tools = nlohmann::json::array();  // tool documents offered to remote models
};

/// Throws InvalidValue unless the history starts with exactly one non-empty system message.
void check_context(const PlayerContext& context);

class Player {
 public:
  virtual ~Player() = default;
  /// Must not modify the context; the caller appends the reply to its own history.
  virtual std::string respond(const PlayerContext& context) = 0;
};

enum class PlayerRole { user, system };

/// Replays a fixed list of outputs. "{{refnum}}" in an entry is replaced by the
/// most recent booking reference number visible in the context.
class ScriptedPlayer : public Player {
 public:
  static constexpr std::string_view kExhausted = "<<script exhausted>>";

  ScriptedPlayer(std::vector<std::string> script, PlayerRole role, std::string done_token = "DONE");

  std::string respond(const PlayerContext& context) override;
  std::size_t remaining() const { return script_.size() - next_; }

  /// Script entries may be strings or JSON values (dumped compactly).
  static std::vector<std::string> script_from_json(const nlohmann::json& entries);

 private:
  std::vector<std::string> script_;
  std::size_t next_ = 0;
  PlayerRole role_;
  std::string done_token_;
};

/// Shows the last message on `out` and reads one line from `in`. A debugging aid.
class InteractivePlayer : public Player {
 public:
  InteractivePlayer(std::istream& in, std::ostream& out, std::string label);
  std::string respond(const PlayerContext& context) override;

 private:
  std::istream& in_;
  std::ostream& out_;
  std::string label_;
};

/// Latest reference number found in a `"reference_number": "..."` field or as a
/// bare 8-character token after the word "reference" in the context.
std::string latest_reference_number(const PlayerContext& context);

}  // namespace todplay
