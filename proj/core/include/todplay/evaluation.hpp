#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "todplay/domain_model.hpp"
#include "todplay/entity_store.hpp"
#include "todplay/prompts.hpp"

namespace todplay {

struct EvaluationReport {
  std::string goal_id;
  std::string dialogue_id;
  Outcome outcome = Outcome::completed;
  std::map<Domain, int> inform;
  std::map<Domain, int> booking;
  int dialogue_inform = 0;
  int dialogue_booking = 0;
  double latency_s = 0;

  friend bool operator==(const EvaluationReport&, const EvaluationReport&) = default;
};

nlohmann::json to_json(const EvaluationReport& report);
EvaluationReport report_from_json(const nlohmann::json& j);

/// The followup message the user actually received after each system turn:
/// the last followup call before the next user turn (or the end).
std::vector<std::string> delivered_followups(const Transcript& transcript);

/// Whether the record meets every informable constraint: case-insensitive
/// equality, except leaveat (record not earlier) and arriveby (record not later).
bool satisfies_informables(const EntityRecord& record, const SlotMap& informables);

std::map<Domain, int> compute_inform(const Transcript& transcript, const Goal& goal,
                                     const EntityStore& store);
std::map<Domain, int> compute_booking(const Transcript& transcript, const Goal& goal);

/// Per-domain scores, their conjunction, and latency. Aborted dialogues score 0.
EvaluationReport evaluate(const Transcript& transcript, const Goal& goal, const EntityStore& store);

struct RateSummary {
  std::size_t dialogues = 0;
  std::size_t completed = 0;
  std::size_t aborted = 0;
  std::size_t turn_limited = 0;
  double inform_rate = 0;
  double booking_rate = 0;
  double success_rate = 0;  // equals inform_rate: no extra requestables in these domains
  double mean_latency_s = 0;
};

RateSummary summarize(const std::vector<EvaluationReport>& reports);
nlohmann::json to_json(const RateSummary& summary);

/// max − min of the rates, rounded to 10 decimal places. Throws InvalidValue on an empty map.
double us_spread(const std::map<std::string, double>& success_by_simulator);

class JudgeParseError : public Error {
 public:
  using Error::Error;
};

struct JudgeScores {
  bool task_completion = false;
  int naturalness_user = 0;
  int naturalness_system = 0;
  int coherence_user = 0;
  int coherence_system = 0;
  int diversity_user = 0;

  friend bool operator==(const JudgeScores&, const JudgeScores&) = default;
};

/// Exactly "Yes|No,n,n,n,n,n" (surrounding whitespace tolerated) with ranges
/// 1-5, 1-5, 1-3, 1-3, 1-3.
JudgeScores parse_judge_output(std::string_view raw);

struct ExchangeLine {
  Speaker speaker = Speaker::user;  // user or dialogue_system
  std::string text;
};

/// What the two players saw of each other: user utterances and delivered followups.
std::vector<ExchangeLine> visible_exchange(const Transcript& transcript);

/// Judge prompt with the goal text and the user/system exchange filled in.
std::string build_judge_prompt(const PromptLibrary& library, const Goal& goal,
                               const Transcript& transcript);

enum class Preference { generated, ground_truth };

std::string_view to_string(Preference preference);
Preference preference_from_string(std::string_view text);

struct Judgment {
  std::string pair_id;
  Preference preferred = Preference::generated;
};

/// Fraction of judgments preferring the generated dialogue. Throws InvalidValue
/// on an empty list or a repeated pair id.
double turing_rate(const std::vector<Judgment>& judgments);

/// Seconds from the first user turn to the last recorded turn.
double measure_latency(const Transcript& transcript);

}  // namespace todplay
