#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "todplay/domain_model.hpp"

namespace todplay {

enum class ParamKind { string, enumeration, pattern, operator_object };

/// Constraint on a string value: an allowed-value list, a regex, or neither.
struct ValueConstraint {
  std::vector<std::string> allowed;
  std::string pattern;
  std::string description;  // emitted only for operator-object values

  bool accepts(const std::string& value) const;
};

struct ParamSpec {
  ParamKind kind = ParamKind::string;
  std::string description;
  ValueConstraint value;                // string/enum/pattern, or the "value" of an operator object
  std::vector<std::string> operators;   // operator_object only
};

struct FunctionSchema {
  std::string name;
  std::string description;
  std::vector<std::pair<std::string, ParamSpec>> parameters;  // declaration order
  std::vector<std::string> required;                          // declaration order
  bool additional_properties_allowed = true;

  const ParamSpec* param(std::string_view key) const;
  bool is_required(std::string_view key) const;

  /// The schema as a chat-completions tool document, keys in declaration order.
  nlohmann::ordered_json to_tool_json() const;
};

enum class ViolationKind {
  not_json,
  multiple_calls,
  unknown_function,
  missing_required,
  enum_violation,
  pattern_violation,
  extra_property,
  free_text_outside_call,
  type_mismatch,
};

std::string_view to_string(ViolationKind kind);

struct FormatViolation {
  ViolationKind kind = ViolationKind::not_json;
  std::string detail;

  /// Message the game master logs when this violation aborts a dialogue.
  std::string abort_message() const;
  friend bool operator==(const FormatViolation&, const FormatViolation&) = default;
};

using ParseResult = std::variant<ToolCall, FormatViolation>;

inline bool is_violation(const ParseResult& r) { return std::holds_alternative<FormatViolation>(r); }

/// The seven tool functions plus processnextsubsystem.
const std::vector<FunctionSchema>& builtin_schemas();
const FunctionSchema& builtin_schema(std::string_view name);

/// Sub-module output schemas used by the modular architectures.
const FunctionSchema& intent_schema();
const FunctionSchema& slot_schema();

inline constexpr std::string_view kIntentFunction = "detectintent";
inline constexpr std::string_view kSlotFunction = "extractslots";

/// A named set of schemas a player is allowed to call.
class SchemaRegistry {
 public:
  SchemaRegistry() = default;
  explicit SchemaRegistry(std::vector<FunctionSchema> schemas) : schemas_(std::move(schemas)) {}

  const FunctionSchema* find(std::string_view name) const;
  const std::vector<FunctionSchema>& schemas() const { return schemas_; }
  nlohmann::ordered_json tools_json() const;

  static SchemaRegistry monolithic();   // 7 tool functions
  static SchemaRegistry manager();      // 7 tool functions + processnextsubsystem
  static SchemaRegistry intent();       // detectintent
  static SchemaRegistry slots();        // extractslots
  static SchemaRegistry response();     // followup

 private:
  std::vector<FunctionSchema> schemas_;
};

/// Turns one raw model output into a single call. A single surrounding markdown
/// code fence is stripped; anything else around the JSON is a violation.
/// Never throws.
ParseResult parse_tool_call(std::string_view raw);

/// Checks arguments against the schema: required keys, enums, patterns,
/// operator objects and (when forbidden) extra keys.
ParseResult validate_arguments(const ToolCall& call, const FunctionSchema& schema);

/// parse_tool_call followed by registry lookup and validate_arguments.
ParseResult parse_and_validate(std::string_view raw, const SchemaRegistry& registry);

}  // namespace todplay
