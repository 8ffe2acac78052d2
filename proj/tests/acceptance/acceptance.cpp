// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>

#include "test_support.hpp"
#include "todplay/cost_model.hpp"
#include "todplay/evaluation.hpp"
#include "todplay/goal_synthesis.hpp"

using namespace testing;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using WallClock = std::chrono::steady_clock;

double seconds_since(WallClock::time_point t0) {
  return std::chrono::duration<double>(WallClock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Verdict spread() {
  const auto t0 = WallClock::now();
  const double qwen = us_spread({{"l1", 0.42}, {"l3", 0.75}, {"q7", 0.47}, {"l8", 0.77}, {"q32", 0.95}, {"l70", 1.00}});
  const double llama = us_spread({{"l1", 0.28}, {"l3", 0.62}, {"q7", 0.45}, {"l8", 0.67}, {"q32", 0.83}, {"l70", 0.90}});
  const double dt = seconds_since(t0);
  return {qwen == 0.58 && llama == 0.62 && dt < 1.0,
          "qwen=" + fmt("%.17g", qwen) + " llama=" + fmt("%.17g", llama) + " t=" + fmt("%.3fs", dt)};
}

Verdict cost() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> tokens(0, 2'000'000);
  std::uniform_real_distribution<double> price(1e-9, 1e-4);
  std::uniform_real_distribution<double> log_params(8.0, 11.5);
  std::uniform_real_distribution<double> cpf(0.001, 1.0);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const CostInputs in{static_cast<double>(tokens(rng)), static_cast<double>(tokens(rng)), price(rng), price(rng),
                        std::round(std::pow(10.0, log_params(rng))), cpf(rng)};
    const long double tok = static_cast<long double>(in.p) * in.c_i + static_cast<long double>(in.r) * in.c_o;
    const long double fp = 2.0L * in.params;
    const long double flop = (in.p * fp + in.r * fp) / 1e15L * in.c_pf;
    for (auto [got, want] : {std::pair<double, long double>{token_cost(in), tok}, {flop_cost(in), flop}}) {
      const double err = want == 0 ? std::fabs(got) : static_cast<double>(std::fabs((got - want) / want));
      worst = std::max(worst, err);
    }
  }
  CostInputs worked;
  worked.p = 1000;
  worked.params = 8e9;
  worked.c_pf = 0.05;
  const double f = flop_cost(worked);
  return {worst <= 1e-12 && f == 8e-4, "max_rel_err=" + fmt("%.2e", worst) + " worked=" + fmt("%.17g", f)};
}

Verdict schemas() {
  const auto& all = builtin_schemas();
  std::size_t matched = 0;
  for (const auto& s : all) {
    matched += s.to_tool_json().dump(4) + "\n" == read_text(data_dir() / "schemas" / (s.name + ".json"));
  }
  std::size_t correct = 0;
  const auto corpus = violation_corpus();
  for (const auto& item : corpus) {
    const auto r = parse_and_validate(item.raw, SchemaRegistry::monolithic());
    if (!item.expected) {
      correct += !is_violation(r);
    } else {
      correct += is_violation(r) && std::get<FormatViolation>(r).kind == *item.expected;
    }
  }
  return {all.size() == 8 && matched == 8 && corpus.size() == 30 && correct == 30,
          "schemas=" + std::to_string(matched) + "/" + std::to_string(all.size()) + " corpus=" +
              std::to_string(correct) + "/" + std::to_string(corpus.size())};
}

Verdict query_oracle() {
  const auto t0 = WallClock::now();
  const auto& store = fixture_store();
  std::mt19937_64 rng(99);
  const int n = 600;
  int agree = 0;
  for (int i = 0; i < n; ++i) {
    const auto f = random_filter(rng, store);
    agree += store.query(f) == brute_force_query(store, f);
  }
  const double dt = seconds_since(t0);
  const bool big = store.size(Domain::restaurant) >= 50 && store.size(Domain::hotel) >= 50 &&
                   store.size(Domain::train) >= 50;
  return {big && agree == n && dt < 10.0,
          std::to_string(agree) + "/" + std::to_string(n) + " filters t=" + fmt("%.2fs", dt)};
}

std::vector<std::string> repeat(const std::string& s, int n) { return std::vector<std::string>(n, s); }

Verdict golden_e2e() {
  const auto goal = golden_goal("sng0001");
  const auto t = run_golden("sng0001", Architecture::monolithic);
  const auto again = run_golden("sng0001", Architecture::monolithic);
  std::vector<std::string> calls;
  for (const auto& turn : t.turns) {
    if (turn.tool_call) calls.push_back(turn.tool_call->function);
  }
  const std::vector<std::string> plan{"retrievefromrestaurantdb", "followup", "validaterestaurantbooking",
                                      "followup"};
  const auto report = evaluate(t, goal, fixture_store());
  const auto ref_relayed = !t.bookings.empty() && !delivered_followups(t).empty() &&
                           delivered_followups(t).back().find(t.bookings[0].reference_number) != std::string::npos;

  const auto never = run_scripted(goal, repeat("Still looking.", 40),
                                  {{"monolithic", repeat(followup_call("Anything else?"), 40)}},
                                  Architecture::monolithic, 0);
  const auto two = run_scripted(goal, {"Hello", "DONE"},
                                {{"monolithic", {followup_call("one") + followup_call("two")}}},
                                Architecture::monolithic, 0);
  const bool identical = to_json(t).dump() == to_json(again).dump();
  std::ostringstream d;
  d << "plan=" << (calls == plan ? "ok" : "mismatch") << " inform=" << report.dialogue_inform
    << " booking=" << report.dialogue_booking << " refnum_relayed=" << ref_relayed
    << " never_done_turns=" << never.user_turn_count() << " two_calls=" << to_string(two.outcome)
    << " identical=" << identical;
  return {calls == plan && t.outcome == Outcome::completed && report.dialogue_inform == 1 &&
              report.dialogue_booking == 1 && ref_relayed && never.user_turn_count() == 15 &&
              never.outcome == Outcome::turn_limit_reached &&
              two.outcome == Outcome::aborted_format_violation && identical,
          d.str()};
}

Verdict architectures() {
  std::size_t same = 0;
  std::size_t goals = 0;
  for (const char* id : {"sng0001", "sng0002", "sng0003"}) {
    const auto m = run_golden(id, Architecture::monolithic).bookings;
    const auto p = run_golden(id, Architecture::modular_prog).bookings;
    const auto l = run_golden(id, Architecture::modular_llm).bookings;
    same += m.size() == 1 && m == p && m == l;
    ++goals;
  }
  return {same == goals, std::to_string(same) + "/" + std::to_string(goals) + " goals with identical bookings"};
}

Verdict judge() {
  bool ok = parse_judge_output("Yes,5,3,3,1,2") == JudgeScores{true, 5, 3, 3, 1, 2};
  int rejected = 0;
  for (const char* bad : {"Answer: Yes,5,3,3,1,2", "Yes,5,3,3,1,2,1"}) {
    try {
      parse_judge_output(bad);
    } catch (const JudgeParseError&) {
      ++rejected;
    }
  }
  return {ok && rejected == 2, std::string("parsed=") + (ok ? "ok" : "wrong") + " rejected=" + std::to_string(rejected) + "/2"};
}

Verdict synthesis() {
  const auto dir = data_dir();
  const auto corpus = load_goals((dir / "goals" / "corpus.jsonl").string());
  const auto templates = GoalTemplates::load((dir / "templates" / "goal_templates.json").string());
  const auto mw = Ontology::load((dir / "ontology" / "multiwoz_style.json").string());
  const auto un = Ontology::load((dir / "ontology" / "unrealistic.json").string());

  auto lowered = [](const SlotMap& m) {
    SlotMap out;
    for (const auto& [k, v] : m) out[lower(k)] = lower(v);
    return out;
  };
  auto collisions = [&](const std::vector<Goal>& goals) {
    std::size_t n = 0;
    for (const auto& g : goals) {
      for (const auto& s : g.domain_specs()) {
        for (const auto& c : corpus) {
          for (const auto& cs : c.domain_specs()) {
            n += s.domain == cs.domain && lowered(s.informables) == lowered(cs.informables) &&
                 lowered(s.booking_slots) == lowered(cs.booking_slots);
          }
        }
      }
    }
    return n;
  };
  auto split_ok = [](const std::vector<Goal>& goals) {
    if (goals.size() != 120) return false;
    for (std::size_t i = 0; i < goals.size(); ++i) {
      if ((goals[i].domain_specs().size() == 1) != (i < 60)) return false;
    }
    return true;
  };
  const auto a = generate_multiwoz_style(mw, corpus, templates);
  const auto b = generate_unrealistic(un, templates);
  const bool det = a == generate_multiwoz_style(mw, corpus, templates) && b == generate_unrealistic(un, templates);
  const auto ca = collisions(a);
  const auto cb = collisions(b);
  return {split_ok(a) && split_ok(b) && ca == 0 && cb == 0 && det,
          "multiwoz=" + std::to_string(a.size()) + " unrealistic=" + std::to_string(b.size()) +
              " collisions=" + std::to_string(ca + cb) + " deterministic=" + (det ? "yes" : "no")};
}

Verdict turing() {
  std::vector<Judgment> log;
  for (int i = 0; i < 50; ++i) {
    log.push_back({"pair-" + std::to_string(i), i < 19 ? Preference::generated : Preference::ground_truth});
  }
  const double rate = turing_rate(log);
  return {rate == 0.38, "rate=" + fmt("%.17g", rate)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"user_spread", spread},
      {"cost_formulas", cost},
      {"schema_conformance", schemas},
      {"query_oracle_equivalence", query_oracle},
      {"golden_end_to_end", golden_e2e},
      {"architecture_equivalence", architectures},
      {"judge_parser", judge},
      {"goal_synthesis", synthesis},
      {"turing_rate", turing},
  };
  const auto t0 = WallClock::now();
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Verdict r;
    try {
      r = check();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    failed += !r.pass;
    std::printf("%s %s: %s\n", r.pass ? "PASS" : "FAIL", name.c_str(), r.detail.c_str());
  }
  std::printf("%zu criteria, %d failed, %.2fs\n", criteria.size(), failed, seconds_since(t0));
  return failed == 0 ? 0 : 1;
}
