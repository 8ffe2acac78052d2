#include "todplay/game_master.hpp"

#include "todplay/cost_model.hpp"
#include "todplay/prompts.hpp"

namespace todplay {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::int64_t context_tokens(const PlayerContext& context, std::string_view tokenizer) {
  std::int64_t n = 0;
  for (const auto& m : context.history) n += count_tokens(m.content, tokenizer);
  return n;
}

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

class Session : public TurnEnvironment {
 public:
  Session(Transcript& transcript, const EntityStore& store, const GameConfig& config,
          std::uint64_t seed, Clock& clock)
      : transcript_(transcript), store_(store), config_(config), seed_(seed), clock_(clock) {}

  std::string ask(Player& player, const PlayerContext& context) override {
    std::string out = player.respond(context);
    meter(transcript_.system_usage, context, out);
    return out;
  }

  std::string ask_user(Player& player, const PlayerContext& context) {
    std::string out = player.respond(context);
    meter(transcript_.user_usage, context, out);
    return out;
  }

  void record(Speaker speaker, const std::string& content,
              const std::optional<ToolCall>& call) override {
    Turn t;
    t.index = transcript_.turns.size();
    t.speaker = speaker;
    t.content = content;
    t.tool_call = call;
    t.wall_time_ms = clock_.now_ms() - origin_;
    transcript_.turns.push_back(std::move(t));
  }

  nlohmann::json execute(const ToolCall& call) override {
    const RefnumContext ref{seed_, transcript_.dialogue_id, transcript_.bookings.size()};
    ToolPayload payload = execute_tool(store_, call, ref);
    if (auto* booking = std::get_if<BookingResult>(&payload)) transcript_.bookings.push_back(*booking);
    nlohmann::json j = payload_to_json(payload);
    record(Speaker::tool_result, j.dump(), std::nullopt);
    return j;
  }

  bool take_step() override { return steps_++ < config_.max_tool_steps_per_turn; }

  void start_clock() { origin_ = clock_.now_ms(); }
  void new_turn() { steps_ = 0; }

 private:
  void meter(TokenUsage& usage, const PlayerContext& context, const std::string& out) const {
    usage.prompt_tokens += context_tokens(context, config_.tokenizer);
    usage.response_tokens += count_tokens(out, config_.tokenizer);
    usage.calls += 1;
  }

  Transcript& transcript_;
  const EntityStore& store_;
  const GameConfig& config_;
  std::uint64_t seed_;
  Clock& clock_;
  std::int64_t origin_ = 0;
  int steps_ = 0;
};

}  // namespace

void GameConfig::validate() const {
  if (max_user_turns < 1) throw InvalidValue("game.max_user_turns must be >= 1");
  if (max_tool_steps_per_turn < 1) throw InvalidValue("game.max_tool_steps_per_turn must be >= 1");
  if (done_token.empty()) throw InvalidValue("game.done_token must not be empty");
  if (generation.max_new_tokens < 1) throw InvalidValue("game.max_new_tokens must be >= 1");
}

GameConfig GameConfig::from_json(const nlohmann::json& j) {
  GameConfig c;
  if (j.is_null()) return c;
  if (!j.is_object()) throw InvalidValue("game must be an object");
  c.max_user_turns = j.value("max_user_turns", c.max_user_turns);
  c.max_tool_steps_per_turn = j.value("max_tool_steps_per_turn", c.max_tool_steps_per_turn);
  c.done_token = j.value("done_token", c.done_token);
  c.generation.temperature = j.value("temperature", c.generation.temperature);
  c.generation.max_new_tokens = j.value("max_new_tokens", c.generation.max_new_tokens);
  c.tokenizer = j.value("tokenizer", c.tokenizer);
  c.validate();
  count_tokens("", c.tokenizer);
  return c;
}

std::int64_t SteadyClock::now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                               origin_)
      .count();
}

std::int64_t VirtualClock::now_ms() {
  const std::int64_t t = now_;
  now_ += tick_ms_;
  return t;
}

bool detect_done(std::string_view utterance, std::string_view done_token) {
  return trim(utterance) == done_token;
}

ToolPayload execute_tool(const EntityStore& store, const ToolCall& call, const RefnumContext& refnum) {
  if (call.function == "followup") {
    const auto& m = call.arguments.at("message");
    return RouteToUser{m.is_string() ? m.get<std::string>() : m.dump()};
  }
  if (call.function == "processnextsubsystem") {
    return RouteToSubsystem{call.arguments.value("subsystem", ""),
                            call.arguments.value("input_data", "")};
  }
  if (auto domain = retrieval_function_domain(call.function)) {
    RetrievalResult result;
    result.domain = *domain;
    try {
      result.records = store.query(QueryFilter::from_arguments(*domain, call.arguments));
    } catch (const QueryError& e) {
      result.error = e.what();
    }
    return result;
  }
  if (auto domain = booking_function_domain(call.function)) {
    auto outcome = store.validate_booking(*domain, call.arguments, refnum.seed, refnum.dialogue_id,
                                          refnum.counter);
    if (auto* ok = std::get_if<BookingResult>(&outcome)) return *ok;
    return std::get<BookingFailure>(outcome);
  }
  throw InvalidValue("cannot execute unknown function '" + call.function + "'");
}

nlohmann::json payload_to_json(const ToolPayload& payload) {
  return std::visit(
      overloaded{
          [](const RouteToUser& p) -> nlohmann::json {
            return {{"route", "user"}, {"message", p.message}};
          },
          [](const RouteToSubsystem& p) -> nlohmann::json {
            return {{"route", "subsystem"}, {"subsystem", p.subsystem}, {"input_data", p.input_data}};
          },
          [](const RetrievalResult& p) -> nlohmann::json {
            nlohmann::json j = {{"domain", to_string(p.domain)}};
            if (p.error) {
              j["error"] = *p.error;
              return j;
            }
            j["count"] = p.records.size();
            j["results"] = nlohmann::json::array();
            for (const auto& r : p.records) j["results"].push_back(r.to_json());
            return j;
          },
          [](const BookingResult& p) -> nlohmann::json {
            nlohmann::json j = to_json(p);
            j["status"] = "confirmed";
            return j;
          },
          [](const BookingFailure& p) -> nlohmann::json {
            nlohmann::json j = to_json(p);
            j["status"] = "failed";
            return j;
          },
      },
      payload);
}

Transcript run_dialogue(const Goal& goal, Player& user, DialogueSystem& system,
                        const EntityStore& store, const GameConfig& config, std::uint64_t seed,
                        const RunOptions& options) {
  config.validate();
  SteadyClock steady;
  Clock& clock = options.clock != nullptr ? *options.clock : steady;

  Transcript transcript;
  transcript.goal_id = goal.id();
  transcript.dialogue_id = options.dialogue_id.empty() ? goal.id() + "#" + std::to_string(seed)
                                                       : options.dialogue_id;
  Session session(transcript, store, config, seed, clock);
  session.start_clock();

  PlayerContext user_context;
  user_context.generation = config.generation;
  if (options.user_prompt) {
    user_context.history.push_back(*options.user_prompt);
  } else {
    static const PromptLibrary library = PromptLibrary::load_default();
    user_context.history.push_back(build_user_sim_prompt(library, goal));
  }

  std::optional<Outcome> outcome;
  for (int turn = 0; turn < config.max_user_turns && !outcome; ++turn) {
    const std::string utterance = session.ask_user(user, user_context);
    user_context.history.push_back({ChatRole::assistant, utterance});
    session.record(Speaker::user, utterance, std::nullopt);
    if (detect_done(utterance, config.done_token)) {
      outcome = Outcome::completed;
      break;
    }
    session.new_turn();
    std::visit(overloaded{
                   [&](const SystemReply& r) {
                     user_context.history.push_back({ChatRole::user, r.message});
                   },
                   [&](const SystemAbort& a) {
                     session.record(Speaker::game_master, a.violation.abort_message(), std::nullopt);
                     outcome = Outcome::aborted_format_violation;
                   },
                   [&](const BudgetExceeded&) {
                     session.record(Speaker::game_master,
                                    std::string(kBudgetNote) + " (" +
                                        std::to_string(config.max_tool_steps_per_turn) +
                                        " steps in one turn)",
                                    std::nullopt);
                     outcome = Outcome::aborted_format_violation;
                   },
               },
               system.handle_turn(utterance, session));
  }
  transcript.outcome = outcome.value_or(Outcome::turn_limit_reached);

  std::optional<std::int64_t> first_user;
  for (const auto& t : transcript.turns) {
    if (t.speaker == Speaker::user) {
      first_user = t.wall_time_ms;
      break;
    }
  }
  if (first_user) {
    transcript.latency_s =
        static_cast<double>(transcript.turns.back().wall_time_ms - *first_user) / 1000.0;
  }
  return transcript;
}

}  // namespace todplay
