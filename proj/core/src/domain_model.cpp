#include "todplay/domain_model.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <set>

namespace todplay {

namespace {

template <typename Enum, std::size_t N>
Enum enum_from_string(std::string_view text, const std::pair<Enum, std::string_view> (&table)[N],
                      std::string_view what) {
  for (const auto& [value, name] : table) {
    if (name == text) return value;
  }
  throw InvalidValue("unknown " + std::string(what) + " '" + std::string(text) + "'");
}

template <typename Enum, std::size_t N>
std::string_view enum_to_string(Enum value, const std::pair<Enum, std::string_view> (&table)[N]) {
  for (const auto& [v, name] : table) {
    if (v == value) return name;
  }
  return "?";
}

constexpr std::pair<Domain, std::string_view> kDomainNames[] = {
    {Domain::restaurant, "restaurant"}, {Domain::hotel, "hotel"}, {Domain::train, "train"}};

constexpr std::pair<GoalProvenance, std::string_view> kProvenanceNames[] = {
    {GoalProvenance::corpus, "corpus"},
    {GoalProvenance::synthetic_multiwoz_style, "synthetic_multiwoz_style"},
    {GoalProvenance::synthetic_unrealistic, "synthetic_unrealistic"}};

constexpr std::pair<Speaker, std::string_view> kSpeakerNames[] = {
    {Speaker::user, "user"},
    {Speaker::dialogue_system, "dialogue_system"},
    {Speaker::subsystem, "subsystem"},
    {Speaker::tool_result, "tool_result"},
    {Speaker::game_master, "game_master"}};

constexpr std::pair<Outcome, std::string_view> kOutcomeNames[] = {
    {Outcome::completed, "completed"},
    {Outcome::aborted_format_violation, "aborted_format_violation"},
    {Outcome::turn_limit_reached, "turn_limit_reached"}};

bool contains(const std::vector<std::string>& names, const std::string& name) {
  return std::find(names.begin(), names.end(), name) != names.end();
}

SlotMap slot_map_from_json(const nlohmann::json& j, std::string_view what) {
  SlotMap out;
  if (j.is_null()) return out;
  if (!j.is_object()) throw InvalidValue(std::string(what) + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!value.is_string()) throw InvalidValue(std::string(what) + "." + key + " must be a string");
    out.emplace(key, value.get<std::string>());
  }
  return out;
}

}  // namespace

std::string_view to_string(Domain domain) { return enum_to_string(domain, kDomainNames); }

std::optional<Domain> parse_domain(std::string_view text) {
  for (const auto& [value, name] : kDomainNames) {
    if (name == text) return value;
  }
  return std::nullopt;
}

Domain domain_from_string(std::string_view text) {
  return enum_from_string(text, kDomainNames, "domain");
}

const std::vector<std::string>& informable_slots(Domain domain) {
  static const std::vector<std::string> restaurant = {"area", "pricerange", "food", "name"};
  static const std::vector<std::string> hotel = {"area",     "pricerange", "type", "name",
                                                 "internet", "parking",    "stars"};
  static const std::vector<std::string> train = {"departure", "destination", "day", "leaveat",
                                                 "arriveby"};
  switch (domain) {
    case Domain::restaurant: return restaurant;
    case Domain::hotel: return hotel;
    case Domain::train: return train;
  }
  return restaurant;
}

const std::vector<std::string>& booking_slots(Domain domain) {
  static const std::vector<std::string> restaurant = {"people", "day", "time"};
  static const std::vector<std::string> hotel = {"people", "day", "stay"};
  static const std::vector<std::string> train = {"people"};
  switch (domain) {
    case Domain::restaurant: return restaurant;
    case Domain::hotel: return hotel;
    case Domain::train: return train;
  }
  return restaurant;
}

bool is_hhmm(std::string_view v) {
  auto digit = [](char c) { return c >= '0' && c <= '9'; };
  if (v.size() != 5 || v[2] != ':') return false;
  if (!digit(v[0]) || !digit(v[1]) || !digit(v[3]) || !digit(v[4])) return false;
  const int hours = (v[0] - '0') * 10 + (v[1] - '0');
  const int minutes = (v[3] - '0') * 10 + (v[4] - '0');
  return hours < 24 && minutes < 60;
}

std::string normalize_time(std::string_view value) {
  if (value.size() == 4 && value[1] == ':') {
    std::string padded = "0" + std::string(value);
    if (is_hhmm(padded)) return padded;
  }
  return std::string(value);
}

std::string to_lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("TODPLAY_DATA_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
#ifdef TODPLAY_SOURCE_DATA_DIR
  if (std::filesystem::exists(TODPLAY_SOURCE_DATA_DIR)) return TODPLAY_SOURCE_DATA_DIR;
#endif
#ifdef TODPLAY_INSTALL_DATA_DIR
  return TODPLAY_INSTALL_DATA_DIR;
#else
  return "data";
#endif
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](unsigned char x, unsigned char y) {
           return std::tolower(x) == std::tolower(y);
         });
}

// ---------------------------------------------------------------------------

std::string_view to_string(GoalProvenance provenance) {
  return enum_to_string(provenance, kProvenanceNames);
}

GoalProvenance provenance_from_string(std::string_view text) {
  return enum_from_string(text, kProvenanceNames, "provenance");
}

Goal::Goal(std::string id, std::vector<DomainSpec> specs, std::string text,
           GoalProvenance provenance)
    : id_(std::move(id)), specs_(std::move(specs)), text_(std::move(text)), provenance_(provenance) {
  if (specs_.empty() || specs_.size() > 3) {
    throw InvalidGoal("goal '" + id_ + "' must have between 1 and 3 domains, got " +
                      std::to_string(specs_.size()));
  }
  std::set<Domain> seen;
  for (const auto& spec : specs_) {
    if (!seen.insert(spec.domain).second) {
      throw InvalidGoal("goal '" + id_ + "' lists domain " + std::string(to_string(spec.domain)) +
                        " twice");
    }
    for (const auto& [slot, value] : spec.informables) {
      if (!contains(informable_slots(spec.domain), slot)) {
        throw InvalidGoal("goal '" + id_ + "': '" + slot + "' is not an informable slot of " +
                          std::string(to_string(spec.domain)));
      }
    }
    for (const auto& [slot, value] : spec.booking_slots) {
      if (!contains(booking_slots(spec.domain), slot)) {
        throw InvalidGoal("goal '" + id_ + "': '" + slot + "' is not a booking slot of " +
                          std::string(to_string(spec.domain)));
      }
    }
  }
  if (text_.empty()) throw InvalidGoal("goal '" + id_ + "' has empty text");
}

const DomainSpec* Goal::spec_for(Domain domain) const {
  for (const auto& spec : specs_) {
    if (spec.domain == domain) return &spec;
  }
  return nullptr;
}

std::vector<Domain> goal_domains(const Goal& goal) {
  std::vector<Domain> out;
  out.reserve(goal.domain_specs().size());
  for (const auto& spec : goal.domain_specs()) out.push_back(spec.domain);
  return out;
}

std::string strip_html(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_tag = false;
  for (char c : text) {
    if (c == '<') {
      in_tag = true;
    } else if (c == '>' && in_tag) {
      in_tag = false;
    } else if (!in_tag) {
      out.push_back(c);
    }
  }
  static const std::pair<std::string_view, std::string_view> entities[] = {
      {"&amp;", "&"}, {"&lt;", "<"}, {"&gt;", ">"}, {"&quot;", "\""}, {"&#39;", "'"}, {"&nbsp;", " "}};
  for (const auto& [entity, replacement] : entities) {
    for (auto pos = out.find(entity); pos != std::string::npos;
         pos = out.find(entity, pos + replacement.size())) {
      out.replace(pos, entity.size(), replacement);
    }
  }
  // collapse runs of whitespace left behind by removed markup
  std::string collapsed;
  collapsed.reserve(out.size());
  for (char c : out) {
    const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (space && (collapsed.empty() || collapsed.back() == ' ')) continue;
    collapsed.push_back(space ? ' ' : c);
  }
  while (!collapsed.empty() && collapsed.back() == ' ') collapsed.pop_back();
  return collapsed;
}

// ---------------------------------------------------------------------------

nlohmann::json ToolCall::to_json() const {
  return nlohmann::json{{"name", function}, {"arguments", arguments}};
}

std::string_view to_string(Speaker speaker) { return enum_to_string(speaker, kSpeakerNames); }

Speaker speaker_from_string(std::string_view text) {
  return enum_from_string(text, kSpeakerNames, "speaker");
}

std::string_view to_string(Outcome outcome) { return enum_to_string(outcome, kOutcomeNames); }

Outcome outcome_from_string(std::string_view text) {
  return enum_from_string(text, kOutcomeNames, "outcome");
}

bool is_reference_number(std::string_view text) {
  return text.size() == 8 && std::all_of(text.begin(), text.end(), [](char c) {
           return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
         });
}

TokenUsage& TokenUsage::operator+=(const TokenUsage& other) {
  prompt_tokens += other.prompt_tokens;
  response_tokens += other.response_tokens;
  calls += other.calls;
  return *this;
}

std::size_t Transcript::user_turn_count() const {
  return static_cast<std::size_t>(std::count_if(
      turns.begin(), turns.end(), [](const Turn& t) { return t.speaker == Speaker::user; }));
}

namespace {

std::string_view trimmed(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  return text.substr(first, text.find_last_not_of(" \t\r\n") - first + 1);
}

}  // namespace

std::vector<std::string> check_transcript(const Transcript& transcript,
                                          std::size_t max_user_turns,
                                          std::string_view done_token) {
  std::vector<std::string> problems;
  for (std::size_t i = 1; i < transcript.turns.size(); ++i) {
    if (transcript.turns[i].index <= transcript.turns[i - 1].index) {
      problems.push_back("turn indices not strictly increasing at position " + std::to_string(i));
    }
  }
  for (const auto& turn : transcript.turns) {
    const bool may_call =
        turn.speaker == Speaker::dialogue_system || turn.speaker == Speaker::subsystem;
    if (turn.tool_call && !may_call) {
      problems.push_back("turn " + std::to_string(turn.index) + " (" +
                         std::string(to_string(turn.speaker)) + ") carries a tool call");
    }
    if (turn.wall_time_ms < 0) {
      problems.push_back("turn " + std::to_string(turn.index) + " has negative wall time");
    }
  }
  const std::size_t users = transcript.user_turn_count();
  if (users > max_user_turns) {
    problems.push_back("transcript has " + std::to_string(users) + " user turns (limit " +
                       std::to_string(max_user_turns) + ")");
  }
  const Turn* last_user = nullptr;
  for (const auto& turn : transcript.turns) {
    if (turn.speaker == Speaker::user) last_user = &turn;
  }
  switch (transcript.outcome) {
    case Outcome::completed:
      if (last_user == nullptr || trimmed(last_user->content) != done_token) {
        problems.push_back("completed transcript does not end with the done token");
      }
      break;
    case Outcome::turn_limit_reached:
      if (users != max_user_turns) {
        problems.push_back("turn-limited transcript has " + std::to_string(users) +
                           " user turns, expected " + std::to_string(max_user_turns));
      }
      break;
    case Outcome::aborted_format_violation:
      if (std::none_of(transcript.turns.begin(), transcript.turns.end(),
                       [](const Turn& t) { return t.speaker == Speaker::game_master; })) {
        problems.push_back("aborted transcript has no game_master turn recording the violation");
      }
      break;
  }
  for (const auto& booking : transcript.bookings) {
    if (!is_reference_number(booking.reference_number)) {
      problems.push_back("malformed reference number '" + booking.reference_number + "'");
    }
  }
  if (transcript.latency_s < 0) problems.push_back("negative latency");
  return problems;
}

// ---------------------------------------------------------------------------

bool is_time_column(std::string_view column) {
  return iequals(column, "leaveat") || iequals(column, "arriveby") || iequals(column, "time");
}

bool is_star_column(std::string_view column) { return iequals(column, "stars"); }

EntityRecord::EntityRecord(Domain domain, std::vector<std::pair<std::string, std::string>> fields)
    : domain_(domain), fields_(std::move(fields)) {
  std::set<std::string> seen;
  for (const auto& [column, value] : fields_) {
    if (!seen.insert(to_lower(column)).second) {
      throw InvalidValue("duplicate column '" + column + "' (columns are case-insensitive)");
    }
    if (is_time_column(column) && !is_hhmm(value)) {
      throw InvalidValue("column '" + column + "' must be HH:MM, got '" + value + "'");
    }
    if (is_star_column(column) &&
        (value.size() != 1 || value[0] < '1' || value[0] > '5')) {
      throw InvalidValue("column '" + column + "' must be 1..5, got '" + value + "'");
    }
  }
}

std::optional<std::string_view> EntityRecord::get(std::string_view column) const {
  for (const auto& [name, value] : fields_) {
    if (iequals(name, column)) return std::string_view(value);
  }
  return std::nullopt;
}

nlohmann::json EntityRecord::to_json() const {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [column, value] : fields_) out[column] = value;
  return out;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const Goal& goal) {
  nlohmann::json domains = nlohmann::json::array();
  for (const auto& spec : goal.domain_specs()) {
    domains.push_back({{"domain", to_string(spec.domain)},
                       {"informables", spec.informables},
                       {"booking", spec.booking_slots}});
  }
  return {{"id", goal.id()},
          {"domains", domains},
          {"text", goal.text()},
          {"provenance", to_string(goal.provenance())}};
}

Goal goal_from_json(const nlohmann::json& j) {
  std::vector<DomainSpec> specs;
  for (const auto& d : j.at("domains")) {
    DomainSpec spec;
    spec.domain = domain_from_string(d.at("domain").get<std::string>());
    spec.informables = slot_map_from_json(d.value("informables", nlohmann::json()), "informables");
    spec.booking_slots = slot_map_from_json(d.value("booking", nlohmann::json()), "booking");
    specs.push_back(std::move(spec));
  }
  const auto provenance = provenance_from_string(j.value("provenance", std::string("corpus")));
  std::string text = j.at("text").get<std::string>();
  if (provenance == GoalProvenance::corpus) text = strip_html(text);
  return Goal(j.at("id").get<std::string>(), std::move(specs), std::move(text), provenance);
}

nlohmann::json to_json(const BookingResult& booking) {
  return {{"domain", to_string(booking.domain)},
          {"reference_number", booking.reference_number},
          {"confirmed_slots", booking.confirmed_slots}};
}

BookingResult booking_from_json(const nlohmann::json& j) {
  return {domain_from_string(j.at("domain").get<std::string>()),
          j.at("reference_number").get<std::string>(),
          slot_map_from_json(j.at("confirmed_slots"), "confirmed_slots")};
}

ToolCall tool_call_from_json(const nlohmann::json& j) {
  ToolCall call;
  call.function = j.at("name").get<std::string>();
  call.arguments = j.value("arguments", nlohmann::json::object());
  return call;
}

nlohmann::json to_json(const Turn& turn) {
  nlohmann::json j{{"index", turn.index},
                   {"speaker", to_string(turn.speaker)},
                   {"content", turn.content},
                   {"wall_time_ms", turn.wall_time_ms}};
  if (turn.tool_call) j["tool_call"] = turn.tool_call->to_json();
  return j;
}

Turn turn_from_json(const nlohmann::json& j) {
  Turn turn;
  turn.index = j.at("index").get<std::size_t>();
  turn.speaker = speaker_from_string(j.at("speaker").get<std::string>());
  turn.content = j.at("content").get<std::string>();
  turn.wall_time_ms = j.at("wall_time_ms").get<std::int64_t>();
  if (j.contains("tool_call")) turn.tool_call = tool_call_from_json(j.at("tool_call"));
  return turn;
}

namespace {

nlohmann::json usage_json(const TokenUsage& u) {
  return {{"prompt_tokens", u.prompt_tokens},
          {"response_tokens", u.response_tokens},
          {"calls", u.calls}};
}

TokenUsage usage_from_json(const nlohmann::json& j) {
  TokenUsage u;
  if (j.is_null()) return u;
  u.prompt_tokens = j.value("prompt_tokens", std::int64_t{0});
  u.response_tokens = j.value("response_tokens", std::int64_t{0});
  u.calls = j.value("calls", std::int64_t{0});
  return u;
}

}  // namespace

nlohmann::json to_json(const Transcript& t) {
  nlohmann::json turns = nlohmann::json::array();
  for (const auto& turn : t.turns) turns.push_back(to_json(turn));
  nlohmann::json bookings = nlohmann::json::array();
  for (const auto& b : t.bookings) bookings.push_back(to_json(b));
  return {{"goal_id", t.goal_id},
          {"dialogue_id", t.dialogue_id},
          {"outcome", to_string(t.outcome)},
          {"latency_s", t.latency_s},
          {"turns", turns},
          {"bookings", bookings},
          {"usage", {{"user", usage_json(t.user_usage)}, {"system", usage_json(t.system_usage)}}}};
}

Transcript transcript_from_json(const nlohmann::json& j) {
  Transcript t;
  t.goal_id = j.at("goal_id").get<std::string>();
  t.dialogue_id = j.value("dialogue_id", std::string());
  t.outcome = outcome_from_string(j.at("outcome").get<std::string>());
  t.latency_s = j.value("latency_s", 0.0);
  for (const auto& turn : j.at("turns")) t.turns.push_back(turn_from_json(turn));
  for (const auto& b : j.value("bookings", nlohmann::json::array())) {
    t.bookings.push_back(booking_from_json(b));
  }
  if (j.contains("usage")) {
    t.user_usage = usage_from_json(j["usage"].value("user", nlohmann::json()));
    t.system_usage = usage_from_json(j["usage"].value("system", nlohmann::json()));
  }
  return t;
}

std::vector<Goal> load_goals(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open goal file " + path);
  std::vector<Goal> goals;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      goals.push_back(goal_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw Error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return goals;
}

void save_goals(const std::string& path, const std::vector<Goal>& goals) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write goal file " + path);
  for (const auto& goal : goals) out << to_json(goal).dump() << '\n';
}

}  // namespace todplay
