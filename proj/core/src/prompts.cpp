#include "todplay/prompts.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace todplay {

namespace {

bool identifier_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0 || c == '_'; }
bool identifier_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

std::string trim_copy(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

ChatMessage system_prompt(const PromptLibrary& library, std::string_view name) {
  return {ChatRole::system,
          trim_copy(render(library.get(name), {{"USER_SIMULATOR_UTTERANCE", ""}}))};
}

}  // namespace

std::string_view to_string(Architecture architecture) {
  switch (architecture) {
    case Architecture::monolithic: return "monolithic";
    case Architecture::modular_prog: return "modular_prog";
    case Architecture::modular_llm: return "modular_llm";
  }
  return "?";
}

Architecture architecture_from_string(std::string_view text) {
  for (auto a : {Architecture::monolithic, Architecture::modular_prog, Architecture::modular_llm}) {
    if (to_string(a) == text) return a;
  }
  throw InvalidValue("unknown architecture '" + std::string(text) + "'");
}

std::string_view short_label(Architecture architecture) {
  switch (architecture) {
    case Architecture::monolithic: return "M";
    case Architecture::modular_prog: return "MP";
    case Architecture::modular_llm: return "ML";
  }
  return "?";
}

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir) {
  std::map<std::string, std::string> templates;
  if (!std::filesystem::is_directory(dir)) throw Error("prompt directory not found: " + dir.string());
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".txt") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    templates[entry.path().stem().string()] = ss.str();
  }
  return PromptLibrary(std::move(templates));
}

PromptLibrary PromptLibrary::load_default() { return load(default_data_dir() / "prompts"); }

const std::string& PromptLibrary::get(std::string_view name) const {
  auto it = templates_.find(std::string(name));
  if (it == templates_.end()) throw Error("no prompt template named '" + std::string(name) + "'");
  return it->second;
}

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size());
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl[i] != '$' || i + 1 >= tmpl.size() || !identifier_start(tmpl[i + 1])) {
      out += tmpl[i];
      continue;
    }
    std::size_t j = i + 1;
    while (j < tmpl.size() && identifier_char(tmpl[j])) ++j;
    const std::string name(tmpl.substr(i + 1, j - i - 1));
    auto it = values.find(name);
    if (it == values.end()) throw Error("unresolved placeholder $" + name);
    out += it->second;
    i = j - 1;
  }
  return out;
}

ChatMessage build_user_sim_prompt(const PromptLibrary& library, const Goal& goal) {
  return {ChatRole::system, render(library.get("user_simulator"), {{"goal", goal.text()}})};
}

std::map<std::string, ChatMessage> build_system_prompts(const PromptLibrary& library,
                                                        Architecture architecture) {
  std::map<std::string, ChatMessage> out;
  if (architecture == Architecture::monolithic) {
    out["monolithic"] = system_prompt(library, "monolithic");
    return out;
  }
  if (architecture == Architecture::modular_llm) {
    out["manager"] = system_prompt(library, "modular_llm_manager");
  }
  out["intent"] = system_prompt(library, "intent_detection");
  out["slots"] = system_prompt(library, "slot_extraction");
  out["response"] = system_prompt(library, "response_generation");
  return out;
}

}  // namespace todplay
