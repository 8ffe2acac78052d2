#include "todplay/players.hpp"

#include <istream>
#include <ostream>
#include <regex>

namespace todplay {

std::string_view to_string(ChatRole role) {
  switch (role) {
    case ChatRole::system: return "system";
    case ChatRole::user: return "user";
    case ChatRole::assistant: return "assistant";
  }
  return "?";
}

nlohmann::json to_json(const ChatMessage& message) {
  return {{"role", to_string(message.role)}, {"content", message.content}};
}

void check_context(const PlayerContext& context) {
  if (context.history.empty() || context.history.front().role != ChatRole::system) {
    throw InvalidValue("player context must start with a system message");
  }
  if (context.history.front().content.empty()) {
    throw InvalidValue("system message must not be empty");
  }
  for (std::size_t i = 1; i < context.history.size(); ++i) {
    if (context.history[i].role == ChatRole::system) {
      throw InvalidValue("player context holds more than one system message");
    }
  }
}

ScriptedPlayer::ScriptedPlayer(std::vector<std::string> script, PlayerRole role,
                               std::string done_token)
    : script_(std::move(script)), role_(role), done_token_(std::move(done_token)) {}

std::string ScriptedPlayer::respond(const PlayerContext& context) {
  if (next_ >= script_.size()) {
    return role_ == PlayerRole::user ? done_token_ : std::string(kExhausted);
  }
  std::string out = script_[next_++];
  static constexpr std::string_view macro = "{{refnum}}";
  for (auto pos = out.find(macro); pos != std::string::npos; pos = out.find(macro, pos)) {
    const std::string ref = latest_reference_number(context);
    out.replace(pos, macro.size(), ref);
    pos += ref.size();
  }
  return out;
}

std::vector<std::string> ScriptedPlayer::script_from_json(const nlohmann::json& entries) {
  if (!entries.is_array()) throw InvalidValue("script must be a JSON array");
  std::vector<std::string> out;
  for (const auto& e : entries) out.push_back(e.is_string() ? e.get<std::string>() : e.dump());
  return out;
}

InteractivePlayer::InteractivePlayer(std::istream& in, std::ostream& out, std::string label)
    : in_(in), out_(out), label_(std::move(label)) {}

std::string InteractivePlayer::respond(const PlayerContext& context) {
  if (context.history.size() > 1) out_ << context.history.back().content << '\n';
  out_ << label_ << "> " << std::flush;
  std::string line;
  if (!std::getline(in_, line)) throw Error("interactive input closed");
  return line;
}

std::string latest_reference_number(const PlayerContext& context) {
  static const std::regex field(R"re("reference_number"\s*:\s*"([A-Z0-9]{8})")re");
  static const std::regex prose(R"re(reference(?: number)?(?: is)?:?\s+([A-Z0-9]{8})\b)re",
                                std::regex::icase);
  for (auto it = context.history.rbegin(); it != context.history.rend(); ++it) {
    std::string found;
    for (const auto* re : {&field, &prose}) {
      for (std::sregex_iterator m(it->content.begin(), it->content.end(), *re), end; m != end; ++m) {
        found = (*m)[1].str();
      }
      if (!found.empty()) return found;
    }
  }
  return {};
}

}  // namespace todplay
