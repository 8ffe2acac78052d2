#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "todplay/domain_model.hpp"

namespace todplay {

inline constexpr double kDefaultUsdPerPetaflop = 0.05;

struct CostInputs {
  double p = 0;       // prompt tokens
  double r = 0;       // response tokens
  double c_i = 0;     // USD per input token
  double c_o = 0;     // USD per output token
  double params = 0;  // model parameter count
  double c_pf = kDefaultUsdPerPetaflop;
};

/// p*c_i + r*c_o
double token_cost(const CostInputs& in);
/// ((p*FP) + (r*FP)) / 1e15 * c_pf with FP = 2*params FLOPs per token.
double flop_cost(const CostInputs& in);

/// "whitespace" (default) splits on runs of whitespace; "char4" is ceil(bytes/4).
/// Counts are indicative only. Throws InvalidValue for other ids.
std::int64_t count_tokens(std::string_view text, std::string_view tokenizer = "whitespace");

struct ModelPrice {
  double input_per_token = 0;
  double output_per_token = 0;
  double params = 0;
};

class PriceTable {
 public:
  PriceTable() = default;
  static PriceTable load(const std::string& path);
  static PriceTable from_json(const nlohmann::json& j);

  const ModelPrice* find(std::string_view model) const;
  void set(std::string model, ModelPrice price) { prices_[std::move(model)] = price; }

 private:
  std::map<std::string, ModelPrice, std::less<>> prices_;
};

struct CostSummary {
  double token_usd = 0;
  double flop_usd = 0;
};

CostSummary cost_of(const TokenUsage& usage, const ModelPrice& price,
                    double c_pf = kDefaultUsdPerPetaflop);

}  // namespace todplay
