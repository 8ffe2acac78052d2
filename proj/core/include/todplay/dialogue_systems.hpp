#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "todplay/domain_model.hpp"
#include "todplay/players.hpp"
#include "todplay/prompts.hpp"
#include "todplay/tool_schema.hpp"

namespace todplay {

/// Services the game master offers a dialogue system during one user turn.
class TurnEnvironment {
 public:
  virtual ~TurnEnvironment() = default;
  /// Asks a system-side player and meters its token usage.
  virtual std::string ask(Player& player, const PlayerContext& context) = 0;
  /// Appends a dialogue_system or subsystem turn to the transcript.
  virtual void record(Speaker speaker, const std::string& content,
                      const std::optional<ToolCall>& call) = 0;
  /// Runs a validated retrieval or booking call, records the tool_result turn
  /// and returns its payload.
  virtual nlohmann::json execute(const ToolCall& call) = 0;
  /// Consumes one top-level step; false once the per-turn budget is spent.
  virtual bool take_step() = 0;
};

struct SystemReply {
  std::string message;
};

struct SystemAbort {
  FormatViolation violation;
};

struct BudgetExceeded {};

using SystemTurnResult = std::variant<SystemReply, SystemAbort, BudgetExceeded>;

class DialogueSystem {
 public:
  virtual ~DialogueSystem() = default;
  virtual Architecture architecture() const = 0;
  /// Handles one user utterance through to the followup delivered back.
  virtual SystemTurnResult handle_turn(const std::string& utterance, TurnEnvironment& env) = 0;
};

// ---------------------------------------------------------------------------
// Modular pipeline state

inline constexpr const char* kIntents[] = {
    "booking-request",     "booking-success",     "booking-failure",  "dbretrieval-request",
    "dbretrieval-success", "dbretrieval-failure", "detection-unknown"};

struct DetectedIntent {
  std::string intent;
  std::string domain;  // restaurant | hotel | train | donotcare
};

struct DialogueState {
  std::map<Domain, SlotMap> slots;
  std::optional<Domain> active_domain;
  std::optional<std::string> last_intent;
  std::map<Domain, std::vector<EntityRecord>> last_results;

  /// Later values overwrite earlier ones; an empty value removes the slot.
  void merge(Domain domain, const SlotMap& update);
  friend bool operator==(const DialogueState&, const DialogueState&) = default;
};

/// Domain the intent refers to: its own domain, or the active one for donotcare.
std::optional<Domain> resolve_domain(const DetectedIntent& intent, const DialogueState& state);

/// Fixed action rule of the programmatic manager:
///   dbretrieval-request → query with the domain's slots that the retrieval schema accepts
///   booking-request     → booking validation once every required booking argument is known
///                          (missing entity details are filled from the last retrieved record
///                          with the same name or trainid)
///   anything else       → no call
std::optional<ToolCall> decide_action(const DetectedIntent& intent, const DialogueState& state);

/// Role → player. Monolithic needs "monolithic"; modular_prog needs intent, slots and
/// response; modular_llm additionally needs "manager".
using PlayerMap = std::map<std::string, std::shared_ptr<Player>>;
using PromptMap = std::map<std::string, ChatMessage>;

class MonolithicSystem : public DialogueSystem {
 public:
  MonolithicSystem(std::shared_ptr<Player> player, ChatMessage prompt, GenerationParams generation);
  Architecture architecture() const override { return Architecture::monolithic; }
  SystemTurnResult handle_turn(const std::string& utterance, TurnEnvironment& env) override;

 private:
  std::shared_ptr<Player> player_;
  SchemaRegistry registry_;
  PlayerContext context_;
};

/// Shared plumbing of the two modular systems: sub-module calls and the text
/// history the sub-modules see.
class ModularBase : public DialogueSystem {
 public:
  const DialogueState& state() const { return state_; }

 protected:
  ModularBase(PlayerMap players, PromptMap prompts, GenerationParams generation);

  /// Runs one sub-module on `input`, validates and records its output.
  std::variant<ToolCall, FormatViolation> run_subsystem(const std::string& role,
                                                        const std::string& input,
                                                        TurnEnvironment& env);
  void apply_slots(const ToolCall& slots_call, const std::optional<DetectedIntent>& intent);

  PlayerMap players_;
  PromptMap prompts_;
  GenerationParams generation_;
  std::vector<std::string> history_;  // "User: ..." / "System: ..."
  DialogueState state_;
};

class ModularProgSystem : public ModularBase {
 public:
  ModularProgSystem(PlayerMap players, PromptMap prompts, GenerationParams generation);
  Architecture architecture() const override { return Architecture::modular_prog; }
  SystemTurnResult handle_turn(const std::string& utterance, TurnEnvironment& env) override;
};

class ModularLlmSystem : public ModularBase {
 public:
  ModularLlmSystem(PlayerMap players, PromptMap prompts, GenerationParams generation);
  Architecture architecture() const override { return Architecture::modular_llm; }
  SystemTurnResult handle_turn(const std::string& utterance, TurnEnvironment& env) override;

 private:
  SchemaRegistry registry_;
  PlayerContext manager_context_;
  std::optional<DetectedIntent> last_intent_;
};

std::unique_ptr<DialogueSystem> make_dialogue_system(Architecture architecture, PlayerMap players,
                                                     const PromptMap& prompts,
                                                     GenerationParams generation = {});

/// Sub-module role for a processnextsubsystem value, e.g. intent_detection → intent.
std::optional<std::string> subsystem_role(std::string_view subsystem);

}  // namespace todplay
