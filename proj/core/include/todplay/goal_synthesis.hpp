#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "todplay/domain_model.hpp"

namespace todplay {

class GenerationExhausted : public Error {
 public:
  using Error::Error;
};

class MissingTemplate : public Error {
 public:
  using Error::Error;
};

using ValuePool = std::vector<std::pair<std::string, std::vector<std::string>>>;  // file order

struct DomainOntology {
  ValuePool informable;
  ValuePool booking;
  std::size_t min_informables = 1;
  std::size_t max_informables = 0;  // 0: all informables
  std::vector<std::string> required_informables;
  std::vector<std::vector<std::string>> exclusive_groups;  // at most one slot of each group
  std::vector<std::vector<std::string>> distinct_values;   // slots that must differ in value
};

struct Ontology {
  std::string name;
  std::map<Domain, DomainOntology> domains;
  std::vector<std::vector<Domain>> combinations;  // multi-domain goal shapes, cycled in order

  static Ontology load(const std::string& path);
  static Ontology from_json(const nlohmann::ordered_json& j);
  /// Value pool of a slot, or null.
  const std::vector<std::string>* pool(Domain domain, std::string_view slot) const;
};

struct DomainTemplate {
  std::string intro;
  std::map<std::string, std::string> informable;  // slot → fragment with $value
  std::string booking_intro;
  std::vector<std::pair<std::string, std::string>> booking;  // rendered in this order
};

struct GoalTemplates {
  std::map<Domain, DomainTemplate> domains;
  std::map<std::string, std::string> combinations;  // "restaurant+hotel" → "$restaurant ... $hotel"

  static GoalTemplates load(const std::string& path);
  static GoalTemplates load_default();
  static GoalTemplates from_json(const nlohmann::ordered_json& j);
};

/// Renders the goal's specs through the templates. Throws MissingTemplate when a
/// domain, slot, or domain combination has no template.
std::string render_goal_text(const std::vector<DomainSpec>& specs, const GoalTemplates& templates);
std::string render_goal_text(const Goal& goal, const GoalTemplates& templates);

/// Portable generator: mt19937_64 with rejection-sampled bounded draws, so a
/// seed yields the same goals with every standard library.
class SynthesisRng {
 public:
  explicit SynthesisRng(std::uint64_t seed) : engine_(seed) {}
  std::size_t below(std::size_t n);

 private:
  std::mt19937_64 engine_;
};

struct SynthesisOptions {
  std::size_t n_single = 60;
  std::size_t n_multi = 60;
  std::uint64_t seed = 0;
  std::size_t max_attempts_per_goal = 20000;
  std::string id_prefix = "syn-";
  GoalProvenance provenance = GoalProvenance::synthetic_multiwoz_style;
};

/// Canonical key of a domain spec: domain, slot names and values.
std::string spec_key(const DomainSpec& spec);
/// Canonical key of a whole goal (ordered spec keys).
std::string goal_key(const std::vector<DomainSpec>& specs);

/// Single-domain goals cycle through restaurant, hotel, train; multi-domain goals
/// cycle through the ontology's combinations. No generated domain spec equals a
/// spec in `exclude`, and no two generated goals are equal.
std::vector<Goal> generate_goals(const Ontology& ontology, const GoalTemplates& templates,
                                 const std::vector<Goal>& exclude, const SynthesisOptions& options);

std::vector<Goal> generate_multiwoz_style(const Ontology& ontology,
                                          const std::vector<Goal>& corpus_goals,
                                          const GoalTemplates& templates, std::size_t n_single = 60,
                                          std::size_t n_multi = 60, std::uint64_t seed = 0);

std::vector<Goal> generate_unrealistic(const Ontology& unreal_ontology,
                                       const GoalTemplates& templates, std::size_t n_single = 60,
                                       std::size_t n_multi = 60, std::uint64_t seed = 0);

}  // namespace todplay
