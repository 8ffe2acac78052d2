#include "todplay/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace todplay {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

bool icontains(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return false;
  return to_lower(haystack).find(to_lower(needle)) != std::string::npos;
}

std::optional<std::string> followup_text(const Turn& turn) {
  if (!turn.tool_call || turn.tool_call->function != "followup") return std::nullopt;
  const auto& args = turn.tool_call->arguments;
  if (!args.is_object() || !args.contains("message")) return std::nullopt;
  const auto& m = args["message"];
  return m.is_string() ? m.get<std::string>() : m.dump();
}

bool slot_equal(std::string_view slot, std::string_view a, std::string_view b) {
  if (is_time_column(slot)) return normalize_time(a) == normalize_time(b);
  return iequals(a, b);
}

int parse_score(std::string_view field, int low, int high, std::string_view name) {
  if (field.empty() || !std::all_of(field.begin(), field.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw JudgeParseError(std::string(name) + " is not an integer: '" + std::string(field) + "'");
  }
  if (field.size() > 2) throw JudgeParseError(std::string(name) + " out of range");
  const int v = std::stoi(std::string(field));
  if (v < low || v > high) {
    throw JudgeParseError(std::string(name) + " must be in " + std::to_string(low) + ".." +
                          std::to_string(high) + ", got " + std::to_string(v));
  }
  return v;
}

nlohmann::json domain_scores_json(const std::map<Domain, int>& scores) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [d, v] : scores) j[std::string(to_string(d))] = v;
  return j;
}

std::map<Domain, int> domain_scores_from_json(const nlohmann::json& j) {
  std::map<Domain, int> out;
  for (const auto& [k, v] : j.items()) out[domain_from_string(k)] = v.get<int>();
  return out;
}

}  // namespace

nlohmann::json to_json(const EvaluationReport& r) {
  return {{"goal_id", r.goal_id},
          {"dialogue_id", r.dialogue_id},
          {"outcome", to_string(r.outcome)},
          {"inform", domain_scores_json(r.inform)},
          {"booking", domain_scores_json(r.booking)},
          {"dialogue_inform", r.dialogue_inform},
          {"dialogue_booking", r.dialogue_booking},
          {"latency_s", r.latency_s}};
}

EvaluationReport report_from_json(const nlohmann::json& j) {
  EvaluationReport r;
  r.goal_id = j.at("goal_id").get<std::string>();
  r.dialogue_id = j.value("dialogue_id", "");
  r.outcome = outcome_from_string(j.at("outcome").get<std::string>());
  r.inform = domain_scores_from_json(j.at("inform"));
  r.booking = domain_scores_from_json(j.at("booking"));
  r.dialogue_inform = j.at("dialogue_inform").get<int>();
  r.dialogue_booking = j.at("dialogue_booking").get<int>();
  r.latency_s = j.value("latency_s", 0.0);
  return r;
}

std::vector<std::string> delivered_followups(const Transcript& transcript) {
  std::vector<std::string> out;
  std::optional<std::string> pending;
  for (const auto& turn : transcript.turns) {
    if (turn.speaker == Speaker::user) {
      if (pending) out.push_back(*pending);
      pending.reset();
    } else if (auto text = followup_text(turn)) {
      pending = std::move(text);
    }
  }
  if (pending) out.push_back(*pending);
  return out;
}

bool satisfies_informables(const EntityRecord& record, const SlotMap& informables) {
  for (const auto& [slot, wanted] : informables) {
    auto have = record.get(slot);
    if (!have) return false;
    if (slot == "leaveat") {
      if (normalize_time(*have) < normalize_time(wanted)) return false;
    } else if (slot == "arriveby") {
      if (normalize_time(*have) > normalize_time(wanted)) return false;
    } else if (!iequals(*have, wanted)) {
      return false;
    }
  }
  return true;
}

std::map<Domain, int> compute_inform(const Transcript& transcript, const Goal& goal,
                                     const EntityStore& store) {
  std::map<Domain, int> out;
  for (const auto& spec : goal.domain_specs()) out[spec.domain] = 0;
  if (transcript.outcome == Outcome::aborted_format_violation) return out;

  const auto followups = delivered_followups(transcript);
  for (const auto& spec : goal.domain_specs()) {
    const auto key = identity_column(spec.domain);
    for (const auto& record : store.records(spec.domain)) {
      auto id = record.get(key);
      if (!id) continue;
      bool referenced = std::any_of(followups.begin(), followups.end(),
                                    [&](const std::string& f) { return icontains(f, *id); });
      for (const auto& b : transcript.bookings) {
        if (referenced) break;
        auto it = b.confirmed_slots.find(std::string(key));
        referenced = b.domain == spec.domain && it != b.confirmed_slots.end() && iequals(it->second, *id);
      }
      if (referenced && satisfies_informables(record, spec.informables)) {
        out[spec.domain] = 1;
        break;
      }
    }
  }
  return out;
}

std::map<Domain, int> compute_booking(const Transcript& transcript, const Goal& goal) {
  std::map<Domain, int> out;
  for (const auto& spec : goal.domain_specs()) out[spec.domain] = 0;
  if (transcript.outcome == Outcome::aborted_format_violation) return out;

  const auto followups = delivered_followups(transcript);
  for (const auto& spec : goal.domain_specs()) {
    for (const auto& b : transcript.bookings) {
      if (b.domain != spec.domain) continue;
      bool ok = true;
      for (const auto& [slot, wanted] : spec.booking_slots) {
        auto it = b.confirmed_slots.find(slot);
        if (it == b.confirmed_slots.end() || !slot_equal(slot, it->second, wanted)) {
          ok = false;
          break;
        }
      }
      for (const char* slot : {"leaveat", "arriveby"}) {
        if (!ok || spec.domain != Domain::train) break;
        auto wanted = spec.informables.find(slot);
        if (wanted == spec.informables.end()) continue;
        auto it = b.confirmed_slots.find(slot);
        if (it == b.confirmed_slots.end()) {
          ok = false;
        } else {
          const auto have = normalize_time(it->second);
          const auto goal_time = normalize_time(wanted->second);
          ok = std::string_view(slot) == "leaveat" ? have >= goal_time : have <= goal_time;
        }
      }
      const bool relayed = std::any_of(followups.begin(), followups.end(), [&](const std::string& f) {
        return f.find(b.reference_number) != std::string::npos;
      });
      if (ok && relayed) {
        out[spec.domain] = 1;
        break;
      }
    }
  }
  return out;
}

EvaluationReport evaluate(const Transcript& transcript, const Goal& goal, const EntityStore& store) {
  EvaluationReport r;
  r.goal_id = goal.id();
  r.dialogue_id = transcript.dialogue_id;
  r.outcome = transcript.outcome;
  r.inform = compute_inform(transcript, goal, store);
  r.booking = compute_booking(transcript, goal);
  auto all = [](const std::map<Domain, int>& m) {
    return !m.empty() && std::all_of(m.begin(), m.end(), [](const auto& kv) { return kv.second == 1; });
  };
  r.dialogue_inform = all(r.inform) ? 1 : 0;
  r.dialogue_booking = all(r.booking) ? 1 : 0;
  r.latency_s = transcript.turns.empty() ? 0.0 : measure_latency(transcript);
  return r;
}

RateSummary summarize(const std::vector<EvaluationReport>& reports) {
  RateSummary s;
  s.dialogues = reports.size();
  if (reports.empty()) return s;
  double inform = 0;
  double booking = 0;
  double latency = 0;
  for (const auto& r : reports) {
    inform += r.dialogue_inform;
    booking += r.dialogue_booking;
    latency += r.latency_s;
    switch (r.outcome) {
      case Outcome::completed: ++s.completed; break;
      case Outcome::aborted_format_violation: ++s.aborted; break;
      case Outcome::turn_limit_reached: ++s.turn_limited; break;
    }
  }
  const auto n = static_cast<double>(reports.size());
  s.inform_rate = inform / n;
  s.booking_rate = booking / n;
  s.success_rate = s.inform_rate;
  s.mean_latency_s = latency / n;
  return s;
}

nlohmann::json to_json(const RateSummary& s) {
  return {{"dialogues", s.dialogues},         {"completed", s.completed},
          {"aborted", s.aborted},             {"turn_limited", s.turn_limited},
          {"inform_rate", s.inform_rate},     {"booking_rate", s.booking_rate},
          {"success_rate", s.success_rate},   {"mean_latency_s", s.mean_latency_s}};
}

double us_spread(const std::map<std::string, double>& success_by_simulator) {
  if (success_by_simulator.empty()) throw InvalidValue("us_spread needs at least one simulator");
  auto [lo, hi] = std::minmax_element(
      success_by_simulator.begin(), success_by_simulator.end(),
      [](const auto& a, const auto& b) { return a.second < b.second; });
  for (const auto& [id, rate] : success_by_simulator) {
    if (!(rate >= 0.0 && rate <= 1.0)) throw InvalidValue("success rate of '" + id + "' is outside [0,1]");
  }
  return std::round((hi->second - lo->second) * 1e10) / 1e10;
}

JudgeScores parse_judge_output(std::string_view raw) {
  const std::string_view body = trim(raw);
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = body.find(',', start);
    fields.push_back(trim(body.substr(start, comma == std::string_view::npos ? body.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (fields.size() != 6) {
    throw JudgeParseError("expected 6 comma-separated fields, got " + std::to_string(fields.size()));
  }
  JudgeScores s;
  if (fields[0] == "Yes") {
    s.task_completion = true;
  } else if (fields[0] != "No") {
    throw JudgeParseError("task completion must be Yes or No, got '" + std::string(fields[0]) + "'");
  }
  s.naturalness_user = parse_score(fields[1], 1, 5, "naturalness_user");
  s.naturalness_system = parse_score(fields[2], 1, 5, "naturalness_system");
  s.coherence_user = parse_score(fields[3], 1, 3, "coherence_user");
  s.coherence_system = parse_score(fields[4], 1, 3, "coherence_system");
  s.diversity_user = parse_score(fields[5], 1, 3, "diversity_user");
  return s;
}

std::vector<ExchangeLine> visible_exchange(const Transcript& transcript) {
  std::vector<ExchangeLine> out;
  std::optional<std::string> pending;
  for (const auto& turn : transcript.turns) {
    if (turn.speaker == Speaker::user) {
      if (pending) out.push_back({Speaker::dialogue_system, *pending});
      pending.reset();
      out.push_back({Speaker::user, turn.content});
    } else if (auto text = followup_text(turn)) {
      pending = std::move(text);
    }
  }
  if (pending) out.push_back({Speaker::dialogue_system, *pending});
  return out;
}

std::string build_judge_prompt(const PromptLibrary& library, const Goal& goal,
                               const Transcript& transcript) {
  std::string dialogue;
  for (const auto& line : visible_exchange(transcript)) {
    dialogue += (line.speaker == Speaker::user ? "USER: " : "SYSTEM: ") + line.text + "\n";
  }
  return render(library.get("dialogue_quality"), {{"user_goal", goal.text()}, {"dialogue", dialogue}});
}

std::string_view to_string(Preference preference) {
  return preference == Preference::generated ? "generated" : "ground_truth";
}

Preference preference_from_string(std::string_view text) {
  if (text == "generated") return Preference::generated;
  if (text == "ground_truth") return Preference::ground_truth;
  throw InvalidValue("unknown preference '" + std::string(text) + "'");
}

double turing_rate(const std::vector<Judgment>& judgments) {
  if (judgments.empty()) throw InvalidValue("turing_rate needs at least one judgment");
  std::set<std::string> seen;
  std::size_t generated = 0;
  for (const auto& j : judgments) {
    if (!seen.insert(j.pair_id).second) throw InvalidValue("duplicate judgment for pair '" + j.pair_id + "'");
    if (j.preferred == Preference::generated) ++generated;
  }
  return static_cast<double>(generated) / static_cast<double>(judgments.size());
}

double measure_latency(const Transcript& transcript) {
  if (transcript.turns.empty()) throw InvalidValue("cannot measure latency of an empty transcript");
  auto first = std::find_if(transcript.turns.begin(), transcript.turns.end(),
                            [](const Turn& t) { return t.speaker == Speaker::user; });
  const std::int64_t start = first == transcript.turns.end() ? transcript.turns.front().wall_time_ms
                                                             : first->wall_time_ms;
  return static_cast<double>(transcript.turns.back().wall_time_ms - start) / 1000.0;
}

}  // namespace todplay
