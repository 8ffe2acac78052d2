#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "todplay/domain_model.hpp"
#include "todplay/players.hpp"

namespace todplay {

enum class Architecture { monolithic, modular_prog, modular_llm };

std::string_view to_string(Architecture architecture);
Architecture architecture_from_string(std::string_view text);  // throws InvalidValue
/// Short column label used in report tables: M, MP, ML.
std::string_view short_label(Architecture architecture);

/// Prompt templates loaded from `<dir>/*.txt`, keyed by file stem.
class PromptLibrary {
 public:
  PromptLibrary() = default;
  explicit PromptLibrary(std::map<std::string, std::string> templates)
      : templates_(std::move(templates)) {}

  static PromptLibrary load(const std::filesystem::path& dir);
  static PromptLibrary load_default();

  /// Throws Error when no template of that name was loaded.
  const std::string& get(std::string_view name) const;
  bool contains(std::string_view name) const { return templates_.count(std::string(name)) > 0; }

 private:
  std::map<std::string, std::string> templates_;
};

/// Replaces `$name` placeholders. Throws Error when the template holds a
/// placeholder that has no value. Substituted text is not rescanned.
std::string render(std::string_view tmpl, const std::map<std::string, std::string>& values);

ChatMessage build_user_sim_prompt(const PromptLibrary& library, const Goal& goal);

/// monolithic → {monolithic}; modular_prog → {intent, slots, response};
/// modular_llm → {manager, intent, slots, response}. Each template's trailing
/// input placeholder is rendered empty: the input travels as user messages.
std::map<std::string, ChatMessage> build_system_prompts(const PromptLibrary& library,
                                                        Architecture architecture);

}  // namespace todplay
