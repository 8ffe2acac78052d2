#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace todplay {

/// Base class of every error the engine throws. Format violations are not
/// errors; they are ordinary values (see tool_schema.hpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidValue : public Error {
 public:
  using Error::Error;
};

enum class Domain { restaurant, hotel, train };

inline constexpr Domain kAllDomains[] = {Domain::restaurant, Domain::hotel, Domain::train};

std::string_view to_string(Domain domain);
std::optional<Domain> parse_domain(std::string_view text);
Domain domain_from_string(std::string_view text);  // throws InvalidValue

/// Slot/column → value. Ordered so that serialization is deterministic.
using SlotMap = std::map<std::string, std::string>;

/// Informable slots a goal may constrain for a domain.
const std::vector<std::string>& informable_slots(Domain domain);
/// Booking slots a goal may request for a domain.
const std::vector<std::string>& booking_slots(Domain domain);

/// Zero-pads "9:05" to "09:05"; returns the input unchanged when it is not H:MM/HH:MM.
std::string normalize_time(std::string_view value);
bool is_hhmm(std::string_view value);

std::string to_lower(std::string_view text);
/// Directory holding schemas, prompts, databases and templates: $TODPLAY_DATA_DIR,
/// else the source tree, else the install prefix.
std::filesystem::path default_data_dir();
bool iequals(std::string_view a, std::string_view b);

// ---------------------------------------------------------------------------
// Goal

struct DomainSpec {
  Domain domain = Domain::restaurant;
  SlotMap informables;
  SlotMap booking_slots;

  friend bool operator==(const DomainSpec&, const DomainSpec&) = default;
};

enum class GoalProvenance { corpus, synthetic_multiwoz_style, synthetic_unrealistic };

std::string_view to_string(GoalProvenance provenance);
GoalProvenance provenance_from_string(std::string_view text);

class InvalidGoal : public InvalidValue {
 public:
  using InvalidValue::InvalidValue;
};

/// A user objective. Immutable; the constructor enforces 1-3 distinct domains,
/// known slot names, and non-empty text.
class Goal {
 public:
  Goal(std::string id, std::vector<DomainSpec> specs, std::string text,
       GoalProvenance provenance = GoalProvenance::corpus);

  const std::string& id() const { return id_; }
  const std::vector<DomainSpec>& domain_specs() const { return specs_; }
  const std::string& text() const { return text_; }
  GoalProvenance provenance() const { return provenance_; }

  const DomainSpec* spec_for(Domain domain) const;

  friend bool operator==(const Goal&, const Goal&) = default;

 private:
  std::string id_;
  std::vector<DomainSpec> specs_;
  std::string text_;
  GoalProvenance provenance_;
};

/// Domains of the goal in declaration order.
std::vector<Domain> goal_domains(const Goal& goal);

/// Removes HTML tags and decodes the common entities found in corpus goal text.
std::string strip_html(std::string_view text);

// ---------------------------------------------------------------------------
// Tool calls and transcripts

struct ToolCall {
  std::string function;
  nlohmann::json arguments = nlohmann::json::object();

  nlohmann::json to_json() const;
  friend bool operator==(const ToolCall&, const ToolCall&) = default;
};

enum class Speaker { user, dialogue_system, subsystem, tool_result, game_master };

std::string_view to_string(Speaker speaker);
Speaker speaker_from_string(std::string_view text);

struct Turn {
  std::size_t index = 0;
  Speaker speaker = Speaker::user;
  std::string content;
  std::optional<ToolCall> tool_call;
  std::int64_t wall_time_ms = 0;

  friend bool operator==(const Turn&, const Turn&) = default;
};

struct BookingResult {
  Domain domain = Domain::restaurant;
  std::string reference_number;
  SlotMap confirmed_slots;

  friend bool operator==(const BookingResult&, const BookingResult&) = default;
};

bool is_reference_number(std::string_view text);

enum class Outcome { completed, aborted_format_violation, turn_limit_reached };

std::string_view to_string(Outcome outcome);
Outcome outcome_from_string(std::string_view text);

struct TokenUsage {
  std::int64_t prompt_tokens = 0;
  std::int64_t response_tokens = 0;
  std::int64_t calls = 0;

  TokenUsage& operator+=(const TokenUsage& other);
  friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

struct Transcript {
  std::string goal_id;
  std::string dialogue_id;
  std::vector<Turn> turns;
  Outcome outcome = Outcome::completed;
  std::vector<BookingResult> bookings;
  double latency_s = 0.0;
  TokenUsage user_usage;
  TokenUsage system_usage;

  std::size_t user_turn_count() const;
  friend bool operator==(const Transcript&, const Transcript&) = default;
};

/// Checks the structural invariants of a transcript; returns one message per
/// problem found (empty when valid).
std::vector<std::string> check_transcript(const Transcript& transcript,
                                          std::size_t max_user_turns = 15,
                                          std::string_view done_token = "DONE");

// ---------------------------------------------------------------------------
// Entities

/// One database row. Column names are unique case-insensitively; time columns
/// hold zero-padded HH:MM and star columns hold 1..5.
class EntityRecord {
 public:
  EntityRecord(Domain domain, std::vector<std::pair<std::string, std::string>> fields);

  Domain domain() const { return domain_; }
  const std::vector<std::pair<std::string, std::string>>& fields() const { return fields_; }
  std::optional<std::string_view> get(std::string_view column) const;

  nlohmann::json to_json() const;
  friend bool operator==(const EntityRecord&, const EntityRecord&) = default;

 private:
  Domain domain_;
  std::vector<std::pair<std::string, std::string>> fields_;
};

bool is_time_column(std::string_view column);
bool is_star_column(std::string_view column);

struct GenerationParams {
  double temperature = 0.0;
  int max_new_tokens = 500;

  friend bool operator==(const GenerationParams&, const GenerationParams&) = default;
};

// ---------------------------------------------------------------------------
// JSON shapes (one object per line in persisted files)

nlohmann::json to_json(const Goal& goal);
Goal goal_from_json(const nlohmann::json& j);

nlohmann::json to_json(const BookingResult& booking);
BookingResult booking_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Turn& turn);
Turn turn_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Transcript& transcript);
Transcript transcript_from_json(const nlohmann::json& j);

ToolCall tool_call_from_json(const nlohmann::json& j);

/// Loads goals from a line-JSON file. Corpus goals have HTML stripped from their text.
std::vector<Goal> load_goals(const std::string& path);
void save_goals(const std::string& path, const std::vector<Goal>& goals);

}  // namespace todplay
