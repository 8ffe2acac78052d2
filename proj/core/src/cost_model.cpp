#include "todplay/cost_model.hpp"

#include <cctype>
#include <fstream>

namespace todplay {

double token_cost(const CostInputs& in) { return in.p * in.c_i + in.r * in.c_o; }

double flop_cost(const CostInputs& in) {
  const double fp = 2 * in.params;
  return ((in.p * fp) + (in.r * fp)) / 1e15 * in.c_pf;
}

std::int64_t count_tokens(std::string_view text, std::string_view tokenizer) {
  if (tokenizer == "whitespace") {
    std::int64_t n = 0;
    bool in_word = false;
    for (unsigned char c : text) {
      const bool space = std::isspace(c) != 0;
      if (!space && !in_word) ++n;
      in_word = !space;
    }
    return n;
  }
  if (tokenizer == "char4") return static_cast<std::int64_t>((text.size() + 3) / 4);
  throw InvalidValue("unknown tokenizer '" + std::string(tokenizer) + "'");
}

PriceTable PriceTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open price table " + path);
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(path + ": not valid JSON");
  return from_json(j);
}

PriceTable PriceTable::from_json(const nlohmann::json& j) {
  PriceTable table;
  if (!j.is_object() || !j.contains("models") || !j["models"].is_object()) {
    throw InvalidValue("price table needs a 'models' object");
  }
  for (const auto& [model, entry] : j["models"].items()) {
    ModelPrice p;
    p.input_per_token = entry.value("input_per_token", 0.0);
    p.output_per_token = entry.value("output_per_token", 0.0);
    p.params = entry.value("params", 0.0);
    if (p.input_per_token < 0 || p.output_per_token < 0 || p.params < 0) {
      throw InvalidValue("price table entry '" + model + "' has a negative value");
    }
    table.set(model, p);
  }
  return table;
}

const ModelPrice* PriceTable::find(std::string_view model) const {
  auto it = prices_.find(model);
  return it == prices_.end() ? nullptr : &it->second;
}

CostSummary cost_of(const TokenUsage& usage, const ModelPrice& price, double c_pf) {
  const CostInputs in{static_cast<double>(usage.prompt_tokens),
                      static_cast<double>(usage.response_tokens),
                      price.input_per_token,
                      price.output_per_token,
                      price.params,
                      c_pf};
  return {token_cost(in), price.params > 0 ? flop_cost(in) : 0.0};
}

}  // namespace todplay
