#include <doctest.h>

#include <set>

#include "test_support.hpp"
#include "todplay/goal_synthesis.hpp"

using namespace testing;

namespace {

const Ontology& multiwoz_ontology() {
  static const Ontology o = Ontology::load((data_dir() / "ontology" / "multiwoz_style.json").string());
  return o;
}

const Ontology& unreal_ontology() {
  static const Ontology o = Ontology::load((data_dir() / "ontology" / "unrealistic.json").string());
  return o;
}

const GoalTemplates& templates() {
  static const GoalTemplates t = GoalTemplates::load((data_dir() / "templates" / "goal_templates.json").string());
  return t;
}

const std::vector<Goal>& corpus() {
  static const std::vector<Goal> c = load_goals((data_dir() / "goals" / "corpus.jsonl").string());
  return c;
}

SlotMap lowered(const SlotMap& m) {
  SlotMap out;
  for (const auto& [k, v] : m) out[lower(k)] = lower(v);
  return out;
}

bool same_spec(const DomainSpec& a, const DomainSpec& b) {
  return a.domain == b.domain && lowered(a.informables) == lowered(b.informables) &&
         lowered(a.booking_slots) == lowered(b.booking_slots);
}

std::size_t collisions(const std::vector<Goal>& goals, const std::vector<Goal>& reference) {
  std::size_t n = 0;
  for (const auto& g : goals) {
    for (const auto& s : g.domain_specs()) {
      for (const auto& c : reference) {
        for (const auto& cs : c.domain_specs()) n += same_spec(s, cs);
      }
    }
  }
  return n;
}

std::size_t corpus_collisions(const std::vector<Goal>& goals) { return collisions(goals, corpus()); }

bool in_pool(const Ontology& o, Domain d, const std::string& slot, const std::string& value) {
  const auto* pool = o.pool(d, slot);
  return pool && std::find(pool->begin(), pool->end(), value) != pool->end();
}

}  // namespace

TEST_CASE("multiwoz-style synthesis yields 60 single and 60 multi-domain goals") {
  const auto goals = generate_multiwoz_style(multiwoz_ontology(), corpus(), templates());
  REQUIRE(goals.size() == 120);
  const std::vector<Domain> cycle{Domain::restaurant, Domain::hotel, Domain::train};
  for (std::size_t i = 0; i < 60; ++i) {
    REQUIRE(goals[i].domain_specs().size() == 1);
    CHECK(goals[i].domain_specs()[0].domain == cycle[i % 3]);
  }
  for (std::size_t i = 60; i < 120; ++i) {
    CHECK(goal_domains(goals[i]) == multiwoz_ontology().combinations[(i - 60) % 3]);
  }
  std::set<std::string> ids;
  std::set<std::string> keys;
  for (const auto& g : goals) {
    ids.insert(g.id());
    keys.insert(goal_key(g.domain_specs()));
    CHECK(g.provenance() == GoalProvenance::synthetic_multiwoz_style);
  }
  CHECK(ids.size() == 120);
  CHECK(keys.size() == 120);
}

TEST_CASE("no synthetic domain spec reproduces a corpus spec") {
  REQUIRE(corpus().size() == 117);
  for (std::uint64_t seed : {0, 1, 2}) {
    CHECK(corpus_collisions(generate_multiwoz_style(multiwoz_ontology(), corpus(), templates(), 60, 60, seed)) == 0);
  }
  // Excluding an earlier run's goals removes every spec the oracle would flag.
  SynthesisOptions options;
  const auto first = generate_goals(multiwoz_ontology(), templates(), {}, options);
  CHECK(collisions(first, first) > 0);
  const auto second = generate_goals(multiwoz_ontology(), templates(), first, options);
  CHECK(collisions(second, first) == 0);
}

TEST_CASE("generated slots respect the ontology constraints") {
  for (const auto* o : {&multiwoz_ontology(), &unreal_ontology()}) {
    const auto goals = o == &multiwoz_ontology() ? generate_multiwoz_style(*o, corpus(), templates())
                                                 : generate_unrealistic(*o, templates());
    for (const auto& g : goals) {
      for (const auto& s : g.domain_specs()) {
        const auto& d = o->domains.at(s.domain);
        CHECK(s.informables.size() >= d.min_informables);
        if (d.max_informables > 0) CHECK(s.informables.size() <= d.max_informables);
        for (const auto& r : d.required_informables) CHECK(s.informables.count(r) == 1);
        for (const auto& group : d.exclusive_groups) {
          std::size_t present = 0;
          for (const auto& slot : group) present += s.informables.count(slot);
          CHECK(present <= 1);
        }
        for (const auto& group : d.distinct_values) {
          std::set<std::string> values;
          std::size_t present = 0;
          for (const auto& slot : group) {
            if (s.informables.count(slot)) {
              values.insert(s.informables.at(slot));
              ++present;
            }
          }
          CHECK(values.size() == present);
        }
        for (const auto& [slot, value] : s.informables) CHECK(in_pool(*o, s.domain, slot, value));
        for (const auto& [slot, value] : s.booking_slots) CHECK(in_pool(*o, s.domain, slot, value));
        for (const auto& [slot, value] : s.informables) CHECK(g.text().find(value) != std::string::npos);
      }
    }
  }
}

TEST_CASE("synthesis is deterministic per seed") {
  const auto a = generate_multiwoz_style(multiwoz_ontology(), corpus(), templates(), 60, 60, 7);
  const auto b = generate_multiwoz_style(multiwoz_ontology(), corpus(), templates(), 60, 60, 7);
  const auto c = generate_multiwoz_style(multiwoz_ontology(), corpus(), templates(), 60, 60, 8);
  CHECK(a == b);
  CHECK(a != c);
  SynthesisRng r1(5);
  SynthesisRng r2(5);
  for (int i = 0; i < 100; ++i) {
    const auto x = r1.below(7);
    CHECK(x < 7);
    CHECK(x == r2.below(7));
  }
}

TEST_CASE("unrealistic goals use the unrealistic ontology") {
  const auto goals = generate_unrealistic(unreal_ontology(), templates());
  REQUIRE(goals.size() == 120);
  for (const auto& g : goals) CHECK(g.provenance() == GoalProvenance::synthetic_unrealistic);
}

TEST_CASE("rendering needs a template for every part") {
  const auto& spec = corpus()[0].domain_specs()[0];
  const auto text = render_goal_text({spec}, templates());
  CHECK_FALSE(text.empty());
  CHECK(text.find('$') == std::string::npos);

  auto no_domain = templates();
  no_domain.domains.erase(spec.domain);
  CHECK_THROWS_AS(render_goal_text({spec}, no_domain), MissingTemplate);

  auto no_slot = templates();
  no_slot.domains.at(spec.domain).informable.erase(spec.informables.begin()->first);
  CHECK_THROWS_AS(render_goal_text({spec}, no_slot), MissingTemplate);

  DomainSpec hotel{Domain::hotel, {{"area", "north"}}, {}};
  DomainSpec train{Domain::train, {{"departure", "ely"}}, {}};
  auto no_combo = templates();
  no_combo.combinations.clear();
  CHECK_THROWS_AS(render_goal_text({hotel, train}, no_combo), MissingTemplate);
}

TEST_CASE("exhaustion is reported") {
  const auto tiny = Ontology::from_json(nlohmann::ordered_json::parse(R"({
    "name": "tiny",
    "domains": {"restaurant": {"informable": {"area": ["north"]}, "booking": {"people": ["1"]}}},
    "multi_domain_combinations": []
  })"));
  SynthesisOptions two;
  two.n_single = 2;
  two.n_multi = 0;
  two.max_attempts_per_goal = 50;
  CHECK_THROWS_AS(generate_goals(tiny, templates(), {}, two), GenerationExhausted);
  two.n_single = 1;
  CHECK(generate_goals(tiny, templates(), {}, two).size() == 1);
}
