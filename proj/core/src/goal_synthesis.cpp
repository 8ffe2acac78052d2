#include "todplay/goal_synthesis.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>

#include "todplay/prompts.hpp"

namespace todplay {

namespace {

nlohmann::ordered_json read_ordered(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  auto j = nlohmann::ordered_json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(path + ": not valid JSON");
  return j;
}

ValuePool pool_from_json(const nlohmann::ordered_json& j, const std::string& where) {
  ValuePool out;
  if (!j.is_object()) throw InvalidValue(where + " must be an object");
  for (const auto& [slot, values] : j.items()) {
    if (!values.is_array() || values.empty()) throw InvalidValue(where + "." + slot + " must be a non-empty array");
    std::vector<std::string> v;
    for (const auto& x : values) v.push_back(x.get<std::string>());
    out.emplace_back(slot, std::move(v));
  }
  return out;
}

std::vector<std::vector<std::string>> groups_from_json(const nlohmann::ordered_json& j) {
  std::vector<std::vector<std::string>> out;
  if (j.is_null()) return out;
  for (const auto& g : j) out.push_back(g.get<std::vector<std::string>>());
  return out;
}

std::string combination_key(const std::vector<DomainSpec>& specs) {
  std::string key;
  for (const auto& s : specs) {
    if (!key.empty()) key += "+";
    key += to_string(s.domain);
  }
  return key;
}

const std::vector<std::string>* find_pool(const ValuePool& pool, std::string_view slot) {
  for (const auto& [name, values] : pool) {
    if (name == slot) return &values;
  }
  return nullptr;
}

std::optional<DomainSpec> draw_spec(Domain domain, const DomainOntology& o, SynthesisRng& rng) {
  const std::size_t max_k = o.max_informables == 0 ? o.informable.size()
                                                   : std::min(o.max_informables, o.informable.size());
  const std::size_t min_k = std::max(o.min_informables, o.required_informables.size());
  if (min_k > max_k) throw InvalidValue("ontology for " + std::string(to_string(domain)) + " cannot meet min_informables");
  const std::size_t k = min_k + rng.below(max_k - min_k + 1);

  std::vector<std::string> chosen = o.required_informables;
  std::vector<std::string> rest;
  for (const auto& [slot, values] : o.informable) {
    if (std::find(chosen.begin(), chosen.end(), slot) == chosen.end()) rest.push_back(slot);
  }
  for (std::size_t i = rest.size(); i > 1; --i) std::swap(rest[i - 1], rest[rng.below(i)]);
  auto excluded = [&](const std::string& slot) {
    for (const auto& group : o.exclusive_groups) {
      if (std::find(group.begin(), group.end(), slot) == group.end()) continue;
      for (const auto& other : group) {
        if (other != slot && std::find(chosen.begin(), chosen.end(), other) != chosen.end()) return true;
      }
    }
    return false;
  };
  for (const auto& slot : rest) {
    if (chosen.size() >= k) break;
    if (!excluded(slot)) chosen.push_back(slot);
  }
  if (chosen.size() < k) return std::nullopt;

  DomainSpec spec;
  spec.domain = domain;
  for (const auto& [slot, values] : o.informable) {
    if (std::find(chosen.begin(), chosen.end(), slot) == chosen.end()) continue;
    spec.informables[slot] = values[rng.below(values.size())];
  }
  for (const auto& group : o.distinct_values) {
    std::set<std::string> seen;
    for (const auto& slot : group) {
      auto it = spec.informables.find(slot);
      if (it != spec.informables.end() && !seen.insert(it->second).second) return std::nullopt;
    }
  }
  for (const auto& [slot, values] : o.booking) spec.booking_slots[slot] = values[rng.below(values.size())];
  return spec;
}

}  // namespace

Ontology Ontology::load(const std::string& path) { return from_json(read_ordered(path)); }

Ontology Ontology::from_json(const nlohmann::ordered_json& j) {
  Ontology o;
  o.name = j.value("name", "");
  if (!j.contains("domains") || !j["domains"].is_object()) throw InvalidValue("ontology needs 'domains'");
  for (const auto& [name, d] : j["domains"].items()) {
    const Domain domain = domain_from_string(name);
    DomainOntology dom;
    dom.informable = pool_from_json(d.at("informable"), "domains." + name + ".informable");
    dom.booking = pool_from_json(d.value("booking", nlohmann::ordered_json::object()),
                                 "domains." + name + ".booking");
    dom.min_informables = d.value("min_informables", dom.min_informables);
    dom.max_informables = d.value("max_informables", dom.max_informables);
    if (d.contains("required_informables")) {
      dom.required_informables = d["required_informables"].get<std::vector<std::string>>();
    }
    dom.exclusive_groups = groups_from_json(d.value("exclusive_groups", nlohmann::ordered_json()));
    dom.distinct_values = groups_from_json(d.value("distinct_values", nlohmann::ordered_json()));
    for (const auto& [slot, values] : dom.informable) {
      const auto& known = informable_slots(domain);
      if (std::find(known.begin(), known.end(), slot) == known.end()) {
        throw InvalidValue("ontology: '" + slot + "' is not an informable slot of " + name);
      }
    }
    for (const auto& [slot, values] : dom.booking) {
      const auto& known = booking_slots(domain);
      if (std::find(known.begin(), known.end(), slot) == known.end()) {
        throw InvalidValue("ontology: '" + slot + "' is not a booking slot of " + name);
      }
    }
    o.domains[domain] = std::move(dom);
  }
  if (j.contains("multi_domain_combinations")) {
    for (const auto& combo : j["multi_domain_combinations"]) {
      std::vector<Domain> ds;
      for (const auto& d : combo) ds.push_back(domain_from_string(d.get<std::string>()));
      o.combinations.push_back(std::move(ds));
    }
  }
  return o;
}

const std::vector<std::string>* Ontology::pool(Domain domain, std::string_view slot) const {
  auto it = domains.find(domain);
  if (it == domains.end()) return nullptr;
  if (auto* p = find_pool(it->second.informable, slot)) return p;
  return find_pool(it->second.booking, slot);
}

GoalTemplates GoalTemplates::load(const std::string& path) { return from_json(read_ordered(path)); }

GoalTemplates GoalTemplates::load_default() {
  return load((default_data_dir() / "templates" / "goal_templates.json").string());
}

GoalTemplates GoalTemplates::from_json(const nlohmann::ordered_json& j) {
  GoalTemplates t;
  for (const auto& [name, d] : j.at("domains").items()) {
    DomainTemplate dt;
    dt.intro = d.at("intro").get<std::string>();
    for (const auto& [slot, text] : d.at("informable").items()) dt.informable[slot] = text.get<std::string>();
    dt.booking_intro = d.value("booking_intro", "");
    const auto booking = d.value("booking", nlohmann::ordered_json::object());
    for (const auto& [slot, text] : booking.items()) {
      dt.booking.emplace_back(slot, text.get<std::string>());
    }
    t.domains[domain_from_string(name)] = std::move(dt);
  }
  for (const auto& [key, text] : j.at("combinations").items()) t.combinations[key] = text.get<std::string>();
  return t;
}

std::string render_goal_text(const std::vector<DomainSpec>& specs, const GoalTemplates& templates) {
  const std::string key = combination_key(specs);
  auto combo = templates.combinations.find(key);
  if (combo == templates.combinations.end()) throw MissingTemplate("no template for combination '" + key + "'");

  std::map<std::string, std::string> parts;
  for (const auto& spec : specs) {
    const std::string domain(to_string(spec.domain));
    auto dt = templates.domains.find(spec.domain);
    if (dt == templates.domains.end()) throw MissingTemplate("no template for domain '" + domain + "'");
    std::string text = dt->second.intro;
    for (const auto& [slot, value] : spec.informables) {
      auto frag = dt->second.informable.find(slot);
      if (frag == dt->second.informable.end()) {
        throw MissingTemplate("no " + domain + " template for slot '" + slot + "'");
      }
      text += " " + render(frag->second, {{"value", value}});
    }
    if (!spec.booking_slots.empty()) {
      for (const auto& [slot, value] : spec.booking_slots) {
        const auto& b = dt->second.booking;
        if (std::none_of(b.begin(), b.end(), [&](const auto& f) { return f.first == slot; })) {
          throw MissingTemplate("no " + domain + " template for booking slot '" + slot + "'");
        }
      }
      text += " " + dt->second.booking_intro;
      for (const auto& [slot, fragment] : dt->second.booking) {
        auto it = spec.booking_slots.find(slot);
        if (it != spec.booking_slots.end()) text += " " + render(fragment, {{"value", it->second}});
      }
      text += ".";
    }
    parts[domain] = text;
  }
  return render(combo->second, parts);
}

std::string render_goal_text(const Goal& goal, const GoalTemplates& templates) {
  return render_goal_text(goal.domain_specs(), templates);
}

std::size_t SynthesisRng::below(std::size_t n) {
  if (n <= 1) return 0;
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return static_cast<std::size_t>(x % bound);
}

std::string spec_key(const DomainSpec& spec) {
  nlohmann::json j = {{"domain", to_string(spec.domain)},
                      {"informables", spec.informables},
                      {"booking", spec.booking_slots}};
  return j.dump();
}

std::string goal_key(const std::vector<DomainSpec>& specs) {
  std::string key;
  for (const auto& s : specs) key += spec_key(s) + "\n";
  return key;
}

std::vector<Goal> generate_goals(const Ontology& ontology, const GoalTemplates& templates,
                                 const std::vector<Goal>& exclude, const SynthesisOptions& options) {
  std::set<std::string> excluded_specs;
  for (const auto& g : exclude) {
    for (const auto& s : g.domain_specs()) excluded_specs.insert(spec_key(s));
  }
  std::vector<std::vector<Domain>> singles;
  for (Domain d : kAllDomains) {
    if (ontology.domains.count(d) != 0) singles.push_back({d});
  }
  if (options.n_single > 0 && singles.empty()) throw InvalidValue("ontology has no domains");
  if (options.n_multi > 0 && ontology.combinations.empty()) {
    throw InvalidValue("ontology has no multi_domain_combinations");
  }

  SynthesisRng rng(options.seed);
  std::set<std::string> seen_goals;
  std::vector<Goal> out;
  auto generate = [&](const std::vector<Domain>& shape) {
    for (std::size_t attempt = 0; attempt < options.max_attempts_per_goal; ++attempt) {
      std::vector<DomainSpec> specs;
      for (Domain d : shape) {
        auto it = ontology.domains.find(d);
        if (it == ontology.domains.end()) {
          throw InvalidValue("ontology has no domain " + std::string(to_string(d)));
        }
        auto spec = draw_spec(d, it->second, rng);
        if (!spec || excluded_specs.count(spec_key(*spec)) != 0) break;
        specs.push_back(std::move(*spec));
      }
      if (specs.size() != shape.size() || !seen_goals.insert(goal_key(specs)).second) continue;
      char id[32];
      std::snprintf(id, sizeof id, "%04zu", out.size() + 1);
      std::string text = render_goal_text(specs, templates);
      out.emplace_back(options.id_prefix + id, std::move(specs), std::move(text), options.provenance);
      return;
    }
    throw GenerationExhausted("could not find an unseen goal after " +
                              std::to_string(options.max_attempts_per_goal) + " attempts (" +
                              std::to_string(out.size()) + " generated so far)");
  };
  for (std::size_t i = 0; i < options.n_single; ++i) generate(singles[i % singles.size()]);
  for (std::size_t i = 0; i < options.n_multi; ++i) {
    generate(ontology.combinations[i % ontology.combinations.size()]);
  }
  return out;
}

std::vector<Goal> generate_multiwoz_style(const Ontology& ontology,
                                          const std::vector<Goal>& corpus_goals,
                                          const GoalTemplates& templates, std::size_t n_single,
                                          std::size_t n_multi, std::uint64_t seed) {
  SynthesisOptions options;
  options.n_single = n_single;
  options.n_multi = n_multi;
  options.seed = seed;
  options.id_prefix = "syn-mw-";
  options.provenance = GoalProvenance::synthetic_multiwoz_style;
  return generate_goals(ontology, templates, corpus_goals, options);
}

std::vector<Goal> generate_unrealistic(const Ontology& unreal_ontology,
                                       const GoalTemplates& templates, std::size_t n_single,
                                       std::size_t n_multi, std::uint64_t seed) {
  SynthesisOptions options;
  options.n_single = n_single;
  options.n_multi = n_multi;
  options.seed = seed;
  options.id_prefix = "syn-ur-";
  options.provenance = GoalProvenance::synthetic_unrealistic;
  return generate_goals(unreal_ontology, templates, {}, options);
}

}  // namespace todplay
