#include "todplay/dialogue_systems.hpp"

#include <algorithm>

#include "todplay/entity_store.hpp"

namespace todplay {

namespace {

std::string function_for(std::string_view prefix, Domain domain, std::string_view suffix) {
  return std::string(prefix) + std::string(to_string(domain)) + std::string(suffix);
}

std::string default_operator(std::string_view slot) {
  if (slot == "leaveat") return ">=";
  if (slot == "arriveby") return "<=";
  return "=";
}

const SchemaRegistry& registry_for(const std::string& role) {
  static const SchemaRegistry intent = SchemaRegistry::intent();
  static const SchemaRegistry slots = SchemaRegistry::slots();
  static const SchemaRegistry response = SchemaRegistry::response();
  if (role == "intent") return intent;
  if (role == "slots") return slots;
  return response;
}

std::shared_ptr<Player> require_player(const PlayerMap& players, const std::string& role) {
  auto it = players.find(role);
  if (it == players.end() || !it->second) throw InvalidValue("no player for role '" + role + "'");
  return it->second;
}

const ChatMessage& require_prompt(const PromptMap& prompts, const std::string& role) {
  auto it = prompts.find(role);
  if (it == prompts.end()) throw InvalidValue("no system prompt for role '" + role + "'");
  return it->second;
}

nlohmann::json tools_of(const SchemaRegistry& registry) {
  return nlohmann::json::parse(registry.tools_json().dump());
}

std::string followup_message(const ToolCall& call) {
  const auto& m = call.arguments.at("message");
  return m.is_string() ? m.get<std::string>() : m.dump();
}

}  // namespace

void DialogueState::merge(Domain domain, const SlotMap& update) {
  auto& target = slots[domain];
  for (const auto& [slot, value] : update) {
    if (value.empty()) {
      target.erase(slot);
    } else {
      target[slot] = is_time_column(slot) ? normalize_time(value) : value;
    }
  }
}

std::optional<Domain> resolve_domain(const DetectedIntent& intent, const DialogueState& state) {
  if (auto d = parse_domain(intent.domain)) return d;
  return state.active_domain;
}

std::optional<ToolCall> decide_action(const DetectedIntent& intent, const DialogueState& state) {
  const auto domain = resolve_domain(intent, state);
  if (!domain) return std::nullopt;
  static const SlotMap no_slots;
  auto found = state.slots.find(*domain);
  const SlotMap& slots = found == state.slots.end() ? no_slots : found->second;

  if (intent.intent == "dbretrieval-request") {
    const auto& schema = builtin_schema(function_for("retrievefrom", *domain, "db"));
    ToolCall call{schema.name, nlohmann::json::object()};
    for (const auto& [param, spec] : schema.parameters) {
      auto it = slots.find(param);
      if (it == slots.end()) continue;
      if (spec.kind == ParamKind::operator_object) {
        call.arguments[param] = {{"operator", default_operator(param)}, {"value", it->second}};
      } else {
        call.arguments[param] = it->second;
      }
    }
    return call;
  }

  if (intent.intent == "booking-request") {
    const auto& schema = builtin_schema(function_for("validate", *domain, "booking"));
    ToolCall call{schema.name, nlohmann::json::object()};
    for (const auto& [param, spec] : schema.parameters) {
      if (auto it = slots.find(param); it != slots.end()) call.arguments[param] = it->second;
    }
    const std::string key(identity_column(*domain));
    auto results = state.last_results.find(*domain);
    if (call.arguments.contains(key) && results != state.last_results.end()) {
      const std::string id = call.arguments[key].get<std::string>();
      for (const auto& record : results->second) {
        auto value = record.get(key);
        if (!value || !iequals(*value, id)) continue;
        for (const auto& [param, spec] : schema.parameters) {
          if (call.arguments.contains(param) || is_ignored_booking_argument(param)) continue;
          if (auto field = record.get(param)) call.arguments[param] = std::string(*field);
        }
        break;
      }
    }
    for (const auto& required : schema.required) {
      if (!call.arguments.contains(required)) return std::nullopt;
    }
    return call;
  }
  return std::nullopt;
}

std::optional<std::string> subsystem_role(std::string_view subsystem) {
  if (subsystem == "intent_detection") return "intent";
  if (subsystem == "slot_extraction") return "slots";
  if (subsystem == "response_generation") return "response";
  return std::nullopt;
}

// ---------------------------------------------------------------------------

MonolithicSystem::MonolithicSystem(std::shared_ptr<Player> player, ChatMessage prompt,
                                   GenerationParams generation)
    : player_(std::move(player)), registry_(SchemaRegistry::monolithic()) {
  if (!player_) throw InvalidValue("monolithic system needs a player");
  context_.history.push_back(std::move(prompt));
  context_.generation = generation;
  context_.tools = tools_of(registry_);
}

SystemTurnResult MonolithicSystem::handle_turn(const std::string& utterance, TurnEnvironment& env) {
  context_.history.push_back({ChatRole::user, utterance});
  while (true) {
    if (!env.take_step()) return BudgetExceeded{};
    const std::string raw = env.ask(*player_, context_);
    context_.history.push_back({ChatRole::assistant, raw});
    auto parsed = parse_and_validate(raw, registry_);
    if (auto* v = std::get_if<FormatViolation>(&parsed)) {
      env.record(Speaker::dialogue_system, raw, std::nullopt);
      return SystemAbort{*v};
    }
    const auto& call = std::get<ToolCall>(parsed);
    env.record(Speaker::dialogue_system, raw, call);
    if (call.function == "followup") return SystemReply{followup_message(call)};
    context_.history.push_back({ChatRole::user, env.execute(call).dump()});
  }
}

// ---------------------------------------------------------------------------

ModularBase::ModularBase(PlayerMap players, PromptMap prompts, GenerationParams generation)
    : players_(std::move(players)), prompts_(std::move(prompts)), generation_(generation) {
  for (const char* role : {"intent", "slots", "response"}) {
    require_player(players_, role);
    require_prompt(prompts_, role);
  }
}

std::variant<ToolCall, FormatViolation> ModularBase::run_subsystem(const std::string& role,
                                                                   const std::string& input,
                                                                   TurnEnvironment& env) {
  const auto& registry = registry_for(role);
  PlayerContext context;
  context.generation = generation_;
  context.tools = tools_of(registry);
  context.history.push_back(require_prompt(prompts_, role));
  std::string body = "Dialogue history:\n";
  for (const auto& line : history_) body += line + "\n";
  body += "\nInput:\n" + input;
  context.history.push_back({ChatRole::user, body});

  const std::string raw = env.ask(*require_player(players_, role), context);
  auto parsed = parse_and_validate(raw, registry);
  if (auto* v = std::get_if<FormatViolation>(&parsed)) {
    env.record(Speaker::subsystem, raw, std::nullopt);
    return *v;
  }
  const auto& call = std::get<ToolCall>(parsed);
  env.record(Speaker::subsystem, raw, call);
  return call;
}

void ModularBase::apply_slots(const ToolCall& slots_call,
                              const std::optional<DetectedIntent>& intent) {
  std::optional<Domain> domain;
  SlotMap update;
  for (const auto& [key, value] : slots_call.arguments.items()) {
    const std::string text = value.is_string() ? value.get<std::string>() : value.dump();
    if (key == "domain") {
      domain = parse_domain(text);
    } else {
      update[key] = text;
    }
  }
  if (!domain && intent) domain = parse_domain(intent->domain);
  if (!domain) domain = state_.active_domain;
  if (!domain) return;
  state_.merge(*domain, update);
  state_.active_domain = domain;
}

// ---------------------------------------------------------------------------

ModularProgSystem::ModularProgSystem(PlayerMap players, PromptMap prompts,
                                     GenerationParams generation)
    : ModularBase(std::move(players), std::move(prompts), generation) {}

SystemTurnResult ModularProgSystem::handle_turn(const std::string& utterance, TurnEnvironment& env) {
  if (!env.take_step()) return BudgetExceeded{};

  auto intent_out = run_subsystem("intent", utterance, env);
  if (auto* v = std::get_if<FormatViolation>(&intent_out)) return SystemAbort{*v};
  const auto& intent_call = std::get<ToolCall>(intent_out);
  const DetectedIntent intent{intent_call.arguments.at("intent").get<std::string>(),
                              intent_call.arguments.at("domain").get<std::string>()};

  auto slots_out = run_subsystem("slots", utterance, env);
  if (auto* v = std::get_if<FormatViolation>(&slots_out)) return SystemAbort{*v};
  apply_slots(std::get<ToolCall>(slots_out), intent);
  if (auto d = parse_domain(intent.domain)) state_.active_domain = d;
  state_.last_intent = intent.intent;

  nlohmann::json result = nullptr;
  if (auto action = decide_action(intent, state_)) {
    const auto& schema = builtin_schema(action->function);
    auto checked = validate_arguments(*action, schema);
    if (auto* v = std::get_if<FormatViolation>(&checked)) {
      env.record(Speaker::dialogue_system, action->to_json().dump(), std::nullopt);
      return SystemAbort{*v};
    }
    env.record(Speaker::dialogue_system, action->to_json().dump(), *action);
    result = env.execute(*action);
    if (auto d = retrieval_function_domain(action->function); d && result.contains("results")) {
      auto& kept = state_.last_results[*d];
      kept.clear();
      for (const auto& r : result["results"]) {
        std::vector<std::pair<std::string, std::string>> fields;
        for (const auto& [k, v] : r.items()) fields.emplace_back(k, v.get<std::string>());
        kept.emplace_back(*d, std::move(fields));
      }
    }
  }

  const auto domain = resolve_domain(intent, state_);
  nlohmann::json input = {{"domain", domain ? std::string(to_string(*domain)) : intent.domain},
                          {"intent", intent.intent},
                          {"slots", nlohmann::json::object()},
                          {"result", result}};
  if (domain) {
    if (auto it = state_.slots.find(*domain); it != state_.slots.end()) input["slots"] = it->second;
  }
  auto response_out = run_subsystem("response", input.dump(), env);
  if (auto* v = std::get_if<FormatViolation>(&response_out)) return SystemAbort{*v};
  const std::string message = followup_message(std::get<ToolCall>(response_out));
  history_.push_back("User: " + utterance);
  history_.push_back("System: " + message);
  return SystemReply{message};
}

// ---------------------------------------------------------------------------

ModularLlmSystem::ModularLlmSystem(PlayerMap players, PromptMap prompts,
                                   GenerationParams generation)
    : ModularBase(std::move(players), std::move(prompts), generation),
      registry_(SchemaRegistry::manager()) {
  require_player(players_, "manager");
  manager_context_.history.push_back(require_prompt(prompts_, "manager"));
  manager_context_.generation = generation;
  manager_context_.tools = tools_of(registry_);
}

SystemTurnResult ModularLlmSystem::handle_turn(const std::string& utterance, TurnEnvironment& env) {
  manager_context_.history.push_back({ChatRole::user, utterance});
  const auto manager = require_player(players_, "manager");
  while (true) {
    if (!env.take_step()) return BudgetExceeded{};
    const std::string raw = env.ask(*manager, manager_context_);
    manager_context_.history.push_back({ChatRole::assistant, raw});
    auto parsed = parse_and_validate(raw, registry_);
    if (auto* v = std::get_if<FormatViolation>(&parsed)) {
      env.record(Speaker::dialogue_system, raw, std::nullopt);
      return SystemAbort{*v};
    }
    const auto& call = std::get<ToolCall>(parsed);
    env.record(Speaker::dialogue_system, raw, call);

    if (call.function == "followup") {
      const std::string message = followup_message(call);
      history_.push_back("User: " + utterance);
      history_.push_back("System: " + message);
      return SystemReply{message};
    }
    if (call.function != "processnextsubsystem") {
      manager_context_.history.push_back({ChatRole::user, env.execute(call).dump()});
      continue;
    }

    const std::string subsystem = call.arguments.at("subsystem").get<std::string>();
    const std::string role = *subsystem_role(subsystem);  // enum already checked by the schema
    const std::string input = call.arguments.contains("input_data")
                                  ? call.arguments["input_data"].get<std::string>()
                                  : utterance;
    auto out = run_subsystem(role, input, env);
    if (auto* v = std::get_if<FormatViolation>(&out)) return SystemAbort{*v};
    const auto& sub_call = std::get<ToolCall>(out);
    if (role == "intent") {
      last_intent_ = DetectedIntent{sub_call.arguments.at("intent").get<std::string>(),
                                    sub_call.arguments.at("domain").get<std::string>()};
      state_.last_intent = last_intent_->intent;
      if (auto d = parse_domain(last_intent_->domain)) state_.active_domain = d;
    } else if (role == "slots") {
      apply_slots(sub_call, last_intent_);
    }
    const nlohmann::json feedback = {{"subsystem", subsystem}, {"output", sub_call.to_json()}};
    manager_context_.history.push_back({ChatRole::user, feedback.dump()});
  }
}

// ---------------------------------------------------------------------------

std::unique_ptr<DialogueSystem> make_dialogue_system(Architecture architecture, PlayerMap players,
                                                     const PromptMap& prompts,
                                                     GenerationParams generation) {
  switch (architecture) {
    case Architecture::monolithic:
      return std::make_unique<MonolithicSystem>(require_player(players, "monolithic"),
                                                require_prompt(prompts, "monolithic"), generation);
    case Architecture::modular_prog:
      return std::make_unique<ModularProgSystem>(std::move(players), prompts, generation);
    case Architecture::modular_llm:
      return std::make_unique<ModularLlmSystem>(std::move(players), prompts, generation);
  }
  throw InvalidValue("unknown architecture");
}

}  // namespace todplay
