#include <doctest.h>

#include <set>

#include "test_support.hpp"
#include "todplay/evaluation.hpp"

using namespace testing;

namespace {

/// Messages the user received, re-derived from the serialised turns.
std::vector<std::string> oracle_delivered(const nlohmann::json& transcript) {
  std::vector<std::string> out;
  std::optional<std::string> pending;
  for (const auto& turn : transcript["turns"]) {
    if (turn["speaker"] == "user") {
      if (pending) out.push_back(*pending);
      pending.reset();
    } else if (turn.contains("tool_call") && turn["tool_call"].is_object() &&
               turn["tool_call"]["name"] == "followup") {
      pending = turn["tool_call"]["arguments"]["message"].get<std::string>();
    }
  }
  if (pending) out.push_back(*pending);
  return out;
}

bool oracle_matches(const EntityRecord& r, const SlotMap& informables) {
  for (const auto& [slot, want] : informables) {
    auto have = field_of(r, slot);
    if (!have) return false;
    if (slot == "leaveat" ? normalize_time(*have) < normalize_time(want)
        : slot == "arriveby" ? normalize_time(*have) > normalize_time(want)
                             : lower(*have) != lower(want)) {
      return false;
    }
  }
  return true;
}

/// Set-membership oracle: the set of entities the user was told about (or that
/// were booked) must intersect the set of entities meeting the goal.
std::map<Domain, int> oracle_inform(const Transcript& t, const Goal& g) {
  std::map<Domain, int> out;
  const auto j = to_json(t);
  const auto delivered = oracle_delivered(j);
  for (const auto& spec : g.domain_specs()) {
    out[spec.domain] = 0;
    if (t.outcome == Outcome::aborted_format_violation) continue;
    const std::string key = spec.domain == Domain::train ? "trainid" : "name";
    std::set<std::string> mentioned;
    std::set<std::string> satisfying;
    for (const auto& r : fixture_store().records(spec.domain)) {
      const std::string id = lower(*field_of(r, key));
      for (const auto& m : delivered) {
        if (lower(m).find(id) != std::string::npos) mentioned.insert(id);
      }
      for (const auto& b : t.bookings) {
        if (b.domain == spec.domain && b.confirmed_slots.count(key) && lower(b.confirmed_slots.at(key)) == id) {
          mentioned.insert(id);
        }
      }
      if (oracle_matches(r, spec.informables)) satisfying.insert(id);
    }
    for (const auto& id : mentioned) {
      if (satisfying.count(id)) out[spec.domain] = 1;
    }
  }
  return out;
}

std::map<Domain, int> oracle_booking(const Transcript& t, const Goal& g) {
  std::map<Domain, int> out;
  const auto delivered = oracle_delivered(to_json(t));
  for (const auto& spec : g.domain_specs()) {
    out[spec.domain] = 0;
    if (t.outcome == Outcome::aborted_format_violation) continue;
    for (const auto& b : t.bookings) {
      if (b.domain != spec.domain) continue;
      bool ok = true;
      for (const auto& [slot, want] : spec.booking_slots) {
        ok = ok && b.confirmed_slots.count(slot) &&
             normalize_time(lower(b.confirmed_slots.at(slot))) == normalize_time(lower(want));
      }
      if (spec.domain == Domain::train) {
        if (spec.informables.count("leaveat")) {
          ok = ok && b.confirmed_slots.count("leaveat") &&
               normalize_time(b.confirmed_slots.at("leaveat")) >= normalize_time(spec.informables.at("leaveat"));
        }
        if (spec.informables.count("arriveby")) {
          ok = ok && b.confirmed_slots.count("arriveby") &&
               normalize_time(b.confirmed_slots.at("arriveby")) <= normalize_time(spec.informables.at("arriveby"));
        }
      }
      bool relayed = false;
      for (const auto& m : delivered) relayed = relayed || m.find(b.reference_number) != std::string::npos;
      if (ok && relayed) out[spec.domain] = 1;
    }
  }
  return out;
}

void set_followups(Transcript& t, const std::function<std::string(const std::string&)>& edit) {
  for (auto& turn : t.turns) {
    if (turn.tool_call && turn.tool_call->function == "followup") {
      auto msg = edit(turn.tool_call->arguments["message"].get<std::string>());
      turn.tool_call->arguments["message"] = msg;
      turn.content = turn.tool_call->to_json().dump();
    }
  }
}

std::string describe(const std::map<Domain, int>& scores) {
  std::string out;
  for (const auto& [d, v] : scores) out += std::string(to_string(d)) + "=" + std::to_string(v) + " ";
  return out;
}

std::vector<Transcript> mutations(const Transcript& base) {
  std::vector<Transcript> out{base};
  Transcript silent = base;
  set_followups(silent, [](const std::string&) { return "Okay."; });
  out.push_back(silent);
  Transcript no_ref = base;
  const auto ref = base.bookings.empty() ? std::string("NOREF") : base.bookings[0].reference_number;
  set_followups(no_ref, [&](std::string m) {
    for (auto p = m.find(ref); p != std::string::npos; p = m.find(ref)) m.replace(p, ref.size(), "XXXXXXXX");
    return m;
  });
  out.push_back(no_ref);
  Transcript shouting = base;
  set_followups(shouting, [](std::string m) {
    for (auto& c : m) c = static_cast<char>(std::toupper(c));
    return m;
  });
  out.push_back(shouting);
  if (!base.bookings.empty()) {
    Transcript wrong_people = base;
    wrong_people.bookings[0].confirmed_slots["people"] = "8";
    out.push_back(wrong_people);
    Transcript unbooked = base;
    unbooked.bookings.clear();
    out.push_back(unbooked);
    Transcript early_train = base;
    early_train.bookings[0].confirmed_slots["arriveby"] = "23:59";
    out.push_back(early_train);
  }
  Transcript aborted = base;
  aborted.outcome = Outcome::aborted_format_violation;
  out.push_back(aborted);
  return out;
}

}  // namespace

TEST_CASE("golden transcripts score one everywhere") {
  for (auto arch : {Architecture::monolithic, Architecture::modular_prog, Architecture::modular_llm}) {
    for (const char* id : {"sng0001", "sng0002", "sng0003"}) {
      const auto r = evaluate(run_golden(id, arch), golden_goal(id), fixture_store());
      CHECK(r.dialogue_inform == 1);
      CHECK(r.dialogue_booking == 1);
    }
  }
}

TEST_CASE("inform and booking agree with independent oracles on mutated transcripts") {
  std::size_t zeros = 0;
  std::size_t cases = 0;
  for (auto arch : {Architecture::monolithic, Architecture::modular_prog, Architecture::modular_llm}) {
    for (const char* id : {"sng0001", "sng0002", "sng0003"}) {
      const auto goal = golden_goal(id);
      const auto variants = mutations(run_golden(id, arch));
      for (std::size_t m = 0; m < variants.size(); ++m) {
        const auto& t = variants[m];
        const std::string goal_id = id;
        CAPTURE(goal_id);
        CAPTURE(m);
        const auto r = evaluate(t, goal, fixture_store());
        CHECK(describe(r.inform) == describe(oracle_inform(t, goal)));
        CHECK(describe(r.booking) == describe(oracle_booking(t, goal)));
        zeros += r.dialogue_booking == 0;
        ++cases;
      }
    }
  }
  CHECK(zeros > cases / 3);
}

TEST_CASE("a withheld reference number fails booking but not inform") {
  auto t = run_golden("sng0001", Architecture::monolithic);
  const auto ref = t.bookings[0].reference_number;
  set_followups(t, [&](std::string m) {
    auto p = m.find(ref);
    if (p != std::string::npos) m.replace(p, ref.size(), "(withheld)");
    return m;
  });
  const auto r = evaluate(t, golden_goal("sng0001"), fixture_store());
  CHECK(r.dialogue_inform == 1);
  CHECK(r.dialogue_booking == 0);
}

TEST_CASE("aborted dialogues score zero") {
  auto t = run_golden("sng0002", Architecture::modular_llm);
  t.outcome = Outcome::aborted_format_violation;
  const auto r = evaluate(t, golden_goal("sng0002"), fixture_store());
  CHECK(r.inform.at(Domain::hotel) == 0);
  CHECK(r.booking.at(Domain::hotel) == 0);
}

TEST_CASE("multi-domain goals need every domain") {
  const auto r = golden_goal("sng0001");
  const auto tr = golden_goal("sng0003");
  const Goal both("multi", {r.domain_specs()[0], tr.domain_specs()[0]}, "restaurant then train");
  auto ur = golden_user_script("sng0001");
  auto ut = golden_user_script("sng0003");
  auto sr = golden_system_scripts("sng0001", "monolithic")["monolithic"];
  auto st = golden_system_scripts("sng0003", "monolithic")["monolithic"];

  const auto half = run_scripted(both, {ur[0], ur[1], "DONE"}, {{"monolithic", sr}}, Architecture::monolithic, 0);
  const auto hr = evaluate(half, both, fixture_store());
  CHECK(hr.booking.at(Domain::restaurant) == 1);
  CHECK(hr.booking.at(Domain::train) == 0);
  CHECK(hr.dialogue_booking == 0);

  std::vector<std::string> sys = sr;
  sys.insert(sys.end(), st.begin(), st.end());
  const auto full = run_scripted(both, {ur[0], ur[1], ut[0], ut[1], "DONE"}, {{"monolithic", sys}},
                                 Architecture::monolithic, 0);
  REQUIRE(full.bookings.size() == 2);
  CHECK(full.bookings[0].reference_number != full.bookings[1].reference_number);
  const auto fr = evaluate(full, both, fixture_store());
  CHECK(fr.dialogue_inform == 1);
  CHECK(fr.dialogue_booking == 1);
}

TEST_CASE("rates summarise reports") {
  std::vector<EvaluationReport> reports(4);
  reports[0].dialogue_booking = 1;
  reports[0].dialogue_inform = 1;
  reports[1].dialogue_inform = 1;
  reports[2].outcome = Outcome::aborted_format_violation;
  reports[3].outcome = Outcome::turn_limit_reached;
  reports[3].latency_s = 4;
  const auto s = summarize(reports);
  CHECK(s.dialogues == 4);
  CHECK(s.inform_rate == 0.5);
  CHECK(s.booking_rate == 0.25);
  CHECK(s.aborted == 1);
  CHECK(s.turn_limited == 1);
  CHECK(s.mean_latency_s == 1.0);
  CHECK(summarize({}).dialogues == 0);
}

TEST_CASE("reports round-trip through JSON") {
  const auto r = evaluate(run_golden("sng0003", Architecture::modular_prog), golden_goal("sng0003"), fixture_store());
  CHECK(report_from_json(to_json(r)) == r);
}

TEST_CASE("us_spread is the range of rates") {
  CHECK(us_spread({{"a", 0.42}, {"b", 0.75}, {"c", 0.47}, {"d", 0.77}, {"e", 0.95}, {"f", 1.00}}) == 0.58);
  CHECK(us_spread({{"only", 0.3}}) == 0.0);
  CHECK_THROWS_AS(us_spread({}), InvalidValue);
  CHECK_THROWS_AS(us_spread({{"a", 1.2}}), InvalidValue);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 0.5);
  for (int i = 0; i < 200; ++i) {
    std::map<std::string, double> rates;
    double lo = 1;
    double hi = 0;
    for (int k = 0; k < 6; ++k) {
      const double v = u(rng);
      rates["us" + std::to_string(k)] = v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double spread = us_spread(rates);
    CHECK(spread == doctest::Approx(hi - lo).epsilon(1e-9));
    std::map<std::string, double> shifted;
    for (const auto& [k, v] : rates) shifted[k] = v + 0.25;
    CHECK(us_spread(shifted) == doctest::Approx(spread).epsilon(1e-9));
    std::map<std::string, double> scaled;
    for (const auto& [k, v] : rates) scaled[k] = v * 2;
    CHECK(us_spread(scaled) == doctest::Approx(2 * spread).epsilon(1e-9));
  }
}

TEST_CASE("judge output parses only in the documented shape") {
  const auto s = parse_judge_output("Yes,5,3,3,1,2");
  CHECK(s == JudgeScores{true, 5, 3, 3, 1, 2});
  CHECK(parse_judge_output(" No, 1, 1, 1, 1, 1 \n") == JudgeScores{false, 1, 1, 1, 1, 1});
  for (const char* bad : {"Answer: Yes,5,3,3,1,2", "Yes,5,3,3,1,2,1", "Yes,5,3,3,1", "yes,5,3,3,1,2",
                          "Yes,6,3,3,1,2", "Yes,5,3,4,1,2", "Yes,5,3,3,0,2", "Yes,5,3,3,1,2.0", "",
                          "Yes,5,3,3,1,-2"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(parse_judge_output(bad), JudgeParseError);
  }
}

TEST_CASE("the judge prompt shows the visible exchange") {
  const auto t = run_golden("sng0001", Architecture::modular_llm);
  const auto prompt = build_judge_prompt(fixture_prompts(), golden_goal("sng0001"), t);
  CHECK(prompt.find("USER: " + golden_user_script("sng0001")[0]) != std::string::npos);
  CHECK(prompt.find("SYSTEM: ") != std::string::npos);
  CHECK(prompt.find("detectintent") == std::string::npos);
  CHECK(prompt.find("$dialogue") == std::string::npos);
  const auto lines = visible_exchange(t);
  CHECK(lines.size() == 5);
}

TEST_CASE("turing rate counts generated preferences") {
  std::vector<Judgment> js;
  for (int i = 0; i < 50; ++i) {
    js.push_back({"p" + std::to_string(i), i < 19 ? Preference::generated : Preference::ground_truth});
  }
  CHECK(turing_rate(js) == 0.38);
  CHECK_THROWS_AS(turing_rate({}), InvalidValue);
  js.push_back({"p3", Preference::generated});
  CHECK_THROWS_AS(turing_rate(js), InvalidValue);
  CHECK(preference_from_string(to_string(Preference::ground_truth)) == Preference::ground_truth);
}
