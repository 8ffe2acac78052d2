#include "todplay/tool_schema.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <mutex>
#include <regex>
#include <stdexcept>

namespace todplay {

namespace {

const std::vector<std::string> kAreas = {"centre", "north", "east", "west", "south"};
const std::vector<std::string> kPriceRanges = {"cheap", "moderate", "expensive"};
const std::vector<std::string> kDays = {"monday", "tuesday",  "wednesday", "thursday",
                                        "friday", "saturday", "sunday"};
const std::vector<std::string> kOneToEight = {"1", "2", "3", "4", "5", "6", "7", "8"};
const std::vector<std::string> kStars = {"1", "2", "3", "4", "5"};
const std::vector<std::string> kYesNo = {"yes", "no"};
const std::vector<std::string> kOperators = {"=", ">=", "<=", ">", "<"};
constexpr const char* kTimePattern = "^(0[0-9]|1[0-9]|2[0-3]):[0-5][0-9]$";

ParamSpec text(std::string description) {
  return {ParamKind::string, std::move(description), {}, {}};
}

ParamSpec one_of(std::vector<std::string> values, std::string description) {
  return {ParamKind::enumeration, std::move(description), {std::move(values), {}, {}}, {}};
}

ParamSpec matching(std::string pattern, std::string description) {
  return {ParamKind::pattern, std::move(description), {{}, std::move(pattern), {}}, {}};
}

ParamSpec compared(std::string description, ValueConstraint value) {
  return {ParamKind::operator_object, std::move(description), std::move(value), kOperators};
}

std::vector<FunctionSchema> make_builtin_schemas() {
  std::vector<FunctionSchema> s;

  s.push_back({"followup",
               "Use this function to respond to the user with follow-up messages. This includes  "
               "asking for missing or unclear information, confirming details, sharing booking "
               "reference numbers, or continuing the dialogue based on the current conversation "
               "state.",
               {{"message", text("The response from the dialogue system to the user")}},
               {"message"},
               false});

  s.push_back({"retrievefromrestaurantdb",
               "Use this function to query the restaurant database and retrieve restaurants that "
               "match optional filters such as area, pricerange, food (cuisine), or restaurant "
               "name. This function is typically used to find available restaurant options before "
               "validating or making a reservation. Returns up to 5 matching restaurants, or fewer "
               "if less than 5 matches are found.",
               {{"area", one_of(kAreas, "The area/location/place of the restaurant. Optional.")},
                {"pricerange", one_of(kPriceRanges, "The price budget for the restaurant. Optional.")},
                {"food", text("The cuisine of the restaurant you are looking for. Optional.")},
                {"name", text("The name of the restaurant. Optional.")}},
               {},
               true});

  s.push_back({"retrievefromhoteldb",
               "Use this function to query the hotel database and retrieve hotels/guesthouses that "
               "match optional filters such as area, pricerange, type, hotel name, internet, "
               "parking, or stars. This function is typically used to find available hotel options "
               "before validating or making a reservation. Returns up to 5 matching hotels, or "
               "fewer if less than 5 matches are found.",
               {{"area", one_of(kAreas, "The area/location/place of the hotel. Optional.")},
                {"pricerange", one_of(kPriceRanges, "The price budget for the hotel. Optional.")},
                {"type", one_of({"hotel", "guesthouse"}, "What is the type of the hotel. Optional.")},
                {"name", text("The name of the hotel. Optional.")},
                {"internet", one_of(kYesNo, "Indicates, whether the hotel has internet/wifi or not. "
                                            "Optional.")},
                {"parking", one_of(kYesNo, "Indicates, whether the hotel has parking or not. "
                                           "Optional.")},
                {"stars", compared("The star rating of the hotel. Optional.", {kStars, {}, {}})}},
               {},
               true});

  const ValueConstraint clock_time{{}, kTimePattern, "A time string formatted as HH:MM (24-hour format)."};
  s.push_back({"retrievefromtraindb",
               "Use this function to query the train database and retrieve trains that match "
               "optional filters such as destination, departure, day, arriveby, or leaveat. This "
               "function is typically used to find available options before validating or making a "
               "reservation. Returns up to 5 matching trains, or fewer if less than 5 matches are "
               "found.",
               {{"destination", text("Destination of the train. Optional.")},
                {"departure", text("Departure location of the train. Optional.")},
                {"day", one_of(kDays, "Journey day of the train. Optional.")},
                {"arriveby", compared("Arrival time of the train. Optional.", clock_time)},
                {"leaveat", compared("Leaving time for the train. Optional.", clock_time)}},
               {},
               true});

  s.push_back({"validaterestaurantbooking",
               "Use this function to check the availability of a restaurant based on user "
               "preferences such as area, food (cuisine), pricerange, name, people, day, and time "
               "before proceeding with a reservation. This function should be called to validate "
               "whether a booking can be made with the provided details. If the details are "
               "accurate, it returns a booking reference number.",
               {{"area", one_of(kAreas, "The area/location/place of the restaurant.")},
                {"pricerange", one_of(kPriceRanges, "The price budget for the restaurant.")},
                {"food", text("The cuisine of the restaurant you are looking for.")},
                {"name", text("The name of the restaurant.")},
                {"phone", text("Phone number of the restaurant. Optional.")},
                {"postcode", text("Postal code of the restaurant. Optional.")},
                {"address", text("Address of the restaurant. Optional.")},
                {"people", one_of(kOneToEight, "Number of people for the restaurant reservation.")},
                {"day", one_of(kDays, "Day of the restaurant reservation.")},
                {"time", matching(kTimePattern, "Time of the restaurant reservation, formatted as "
                                                "HH:MM (24-hour format).")}},
               {"food", "area", "pricerange", "name", "people", "day", "time"},
               false});

  s.push_back({"validatehotelbooking",
               "Use this function to check the availability of a hotel based on user preferences "
               "such as area, type (hotel/guesthouse), pricerange, name, internet, parking, stars, "
               "people, day and stay before proceeding with a reservation. This function should be "
               "called to validate whether a booking can be made with the provided details. If the "
               "details are accurate, it returns a booking reference number.",
               {{"area", one_of(kAreas, "The area/location/place of the hotel.")},
                {"pricerange", one_of(kPriceRanges, "The price budget for the hotel.")},
                {"type", one_of({"hotel", "guesthouse"}, "What is the type of the hotel.")},
                {"name", text("The name of the hotel.")},
                {"internet", one_of(kYesNo, "Indicates, whether the hotel has internet/wifi or not.")},
                {"parking", one_of(kYesNo, "Indicates, whether the hotel has parking or not.")},
                {"stars", one_of(kStars, "The star rating of the hotel.")},
                {"people", one_of(kOneToEight, "Number of people for the hotel booking.")},
                {"day", one_of(kDays, "Day of the hotel booking.")},
                {"stay", one_of(kOneToEight, "Length of stay at the hotel.")},
                {"phone", text("Phone number of the hotel. Optional.")},
                {"postcode", text("Postal code of the hotel. Optional.")},
                {"address", text("Address of the hotel. Optional.")}},
               {"area", "pricerange", "type", "internet", "parking", "name", "stars", "people", "day",
                "stay"},
               false});

  s.push_back({"validatetrainbooking",
               "Use this function to check the availability of a train based on user preferences "
               "such as destination, departure, arriveby, leaveat, day, people, and trainid before "
               "proceeding with a reservation. This function should be called to validate whether a "
               "booking can be made with the provided details. If the details are accurate, it "
               "returns a booking reference number.",
               {{"destination", text("Destination of the train.")},
                {"departure", text("Departure location of the train.")},
                {"day", one_of(kDays, "Journey day of the train.")},
                {"arriveby", matching(kTimePattern, "Arrival time of the train.")},
                {"leaveat", matching(kTimePattern, "Leaving time for the train.")},
                {"people", one_of(kOneToEight, "Number of train tickets for the booking.")},
                {"trainid", text("ID of the train.")},
                {"price", text("Price of the train journey. Optional.")},
                {"duration", text("Duration of the travel. Optional.")}},
               {"destination", "departure", "day", "arriveby", "leaveat", "people", "trainid"},
               false});

  s.push_back({"processnextsubsystem",
               "Use this function to pass control to the next dialogue sub-system (intent "
               "detection, slot extraction, or response generation). The selected sub-system "
               "processes the input data and its output is returned to the dialogue manager.",
               {{"subsystem", one_of({"intent_detection", "slot_extraction", "response_generation"},
                                     "The name of the next sub-system to process the request.")},
                {"input_data", text("The input data for the selected sub-system. Optional.")}},
               {"subsystem"},
               false});
  return s;
}

const std::regex& compiled(const std::string& pattern) {
  static std::mutex mutex;
  static std::map<std::string, std::regex> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(pattern);
  if (it == cache.end()) it = cache.emplace(pattern, std::regex(pattern)).first;
  return it->second;
}

nlohmann::ordered_json value_json(const ValueConstraint& v, bool with_description,
                                  const std::string& description) {
  nlohmann::ordered_json j;
  j["type"] = "string";
  if (!v.allowed.empty()) j["enum"] = v.allowed;
  if (!v.pattern.empty()) j["pattern"] = v.pattern;
  if (with_description && !description.empty()) j["description"] = description;
  return j;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string_view strip_fence(std::string_view s) {
  constexpr std::string_view fence = "```";
  if (s.size() < 2 * fence.size() || !s.starts_with(fence) || !s.ends_with(fence)) return s;
  std::string_view inner = s.substr(fence.size(), s.size() - 2 * fence.size());
  // optional language tag on the opening line
  std::size_t i = 0;
  while (i < inner.size() && (std::isalnum(static_cast<unsigned char>(inner[i])) != 0)) ++i;
  if (i == inner.size() || inner[i] == '\n' || inner[i] == '\r' || inner[i] == ' ' ||
      inner[i] == '{' || inner[i] == '[') {
    inner = inner.substr(i);
  }
  if (inner.find(fence) != std::string_view::npos) return s;  // more than one fence
  return trim(inner);
}

struct Span {
  std::size_t begin;
  std::size_t end;  // one past the closing brace
};

// Top-level balanced {...} regions, ignoring braces inside JSON strings.
std::vector<Span> object_spans(std::string_view s) {
  std::vector<Span> spans;
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"' && depth > 0) {
      in_string = true;
    } else if (c == '{') {
      if (depth == 0) start = i;
      ++depth;
    } else if (c == '}' && depth > 0) {
      if (--depth == 0) spans.push_back({start, i + 1});
    }
  }
  return spans;
}

ParseResult call_from_object(const nlohmann::json& obj) {
  for (const auto& [key, value] : obj.items()) {
    if (key != "name" && key != "arguments" && key != "parameters") {
      return FormatViolation{ViolationKind::extra_property,
                             "unexpected key '" + key + "' in call object"};
    }
  }
  if (!obj.contains("name")) {
    return FormatViolation{ViolationKind::missing_required, "call object has no 'name'"};
  }
  if (!obj["name"].is_string()) {
    return FormatViolation{ViolationKind::type_mismatch, "'name' must be a string"};
  }
  if (obj.contains("arguments") && obj.contains("parameters")) {
    return FormatViolation{ViolationKind::extra_property,
                           "call object has both 'arguments' and 'parameters'"};
  }
  ToolCall call;
  call.function = obj["name"].get<std::string>();
  const char* args_key = obj.contains("parameters") ? "parameters" : "arguments";
  if (obj.contains(args_key)) {
    nlohmann::json args = obj[args_key];
    if (args.is_string()) {
      // chat-completions APIs encode arguments as a JSON string
      args = nlohmann::json::parse(args.get<std::string>(), nullptr, false);
      if (args.is_discarded()) {
        return FormatViolation{ViolationKind::not_json, "arguments string is not valid JSON"};
      }
    }
    if (!args.is_object()) {
      return FormatViolation{ViolationKind::type_mismatch, "arguments must be a JSON object"};
    }
    call.arguments = std::move(args);
  }
  return call;
}

std::optional<FormatViolation> check_value(const std::string& key, const nlohmann::json& v,
                                           const ParamSpec& spec);

std::optional<FormatViolation> check_constraint(const std::string& where, const nlohmann::json& v,
                                                const ValueConstraint& c) {
  if (!v.is_string()) {
    return FormatViolation{ViolationKind::type_mismatch, "'" + where + "' must be a string"};
  }
  const auto& s = v.get_ref<const std::string&>();
  if (!c.allowed.empty() && std::find(c.allowed.begin(), c.allowed.end(), s) == c.allowed.end()) {
    return FormatViolation{ViolationKind::enum_violation,
                           "'" + where + "' value '" + s + "' is not one of the allowed values"};
  }
  if (!c.pattern.empty() && !std::regex_match(s, compiled(c.pattern))) {
    return FormatViolation{ViolationKind::pattern_violation,
                           "'" + where + "' value '" + s + "' does not match " + c.pattern};
  }
  return std::nullopt;
}

std::optional<FormatViolation> check_value(const std::string& key, const nlohmann::json& v,
                                           const ParamSpec& spec) {
  if (spec.kind != ParamKind::operator_object) return check_constraint(key, v, spec.value);
  if (!v.is_object()) {
    return FormatViolation{ViolationKind::type_mismatch,
                           "'" + key + "' must be an object with 'operator' and 'value'"};
  }
  for (const char* field : {"operator", "value"}) {
    if (!v.contains(field)) {
      return FormatViolation{ViolationKind::missing_required,
                             "'" + key + "' is missing '" + field + "'"};
    }
  }
  for (const auto& [inner, ignored] : v.items()) {
    if (inner != "operator" && inner != "value") {
      return FormatViolation{ViolationKind::extra_property,
                             "'" + key + "' has unexpected key '" + inner + "'"};
    }
  }
  if (auto bad = check_constraint(key + ".operator", v["operator"], {spec.operators, {}, {}})) {
    return bad;
  }
  return check_constraint(key + ".value", v["value"], spec.value);
}

}  // namespace

bool ValueConstraint::accepts(const std::string& value) const {
  if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), value) == allowed.end()) {
    return false;
  }
  return pattern.empty() || std::regex_match(value, compiled(pattern));
}

const ParamSpec* FunctionSchema::param(std::string_view key) const {
  for (const auto& [name, spec] : parameters) {
    if (name == key) return &spec;
  }
  return nullptr;
}

bool FunctionSchema::is_required(std::string_view key) const {
  return std::find(required.begin(), required.end(), key) != required.end();
}

nlohmann::ordered_json FunctionSchema::to_tool_json() const {
  nlohmann::ordered_json properties = nlohmann::ordered_json::object();
  for (const auto& [key, spec] : parameters) {
    nlohmann::ordered_json p;
    if (spec.kind == ParamKind::operator_object) {
      p["type"] = "object";
      p["description"] = spec.description;
      nlohmann::ordered_json op;
      op["type"] = "string";
      op["enum"] = spec.operators;
      p["properties"]["operator"] = op;
      p["properties"]["value"] = value_json(spec.value, true, spec.value.description);
      p["required"] = {"operator", "value"};
      p["additionalProperties"] = false;
    } else {
      p = value_json(spec.value, false, {});
      p["description"] = spec.description;
    }
    properties[key] = p;
  }
  nlohmann::ordered_json params;
  params["type"] = "object";
  params["properties"] = properties;
  params["required"] = nlohmann::ordered_json::array();
  for (const auto& r : required) params["required"].push_back(r);
  if (!additional_properties_allowed) params["additionalProperties"] = false;

  nlohmann::ordered_json fn;
  fn["name"] = name;
  fn["description"] = description;
  fn["parameters"] = params;
  nlohmann::ordered_json tool;
  tool["type"] = "function";
  tool["function"] = fn;
  return tool;
}

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::not_json: return "not_json";
    case ViolationKind::multiple_calls: return "multiple_calls";
    case ViolationKind::unknown_function: return "unknown_function";
    case ViolationKind::missing_required: return "missing_required";
    case ViolationKind::enum_violation: return "enum_violation";
    case ViolationKind::pattern_violation: return "pattern_violation";
    case ViolationKind::extra_property: return "extra_property";
    case ViolationKind::free_text_outside_call: return "free_text_outside_call";
    case ViolationKind::type_mismatch: return "type_mismatch";
  }
  return "?";
}

std::string FormatViolation::abort_message() const {
  std::string headline;
  switch (kind) {
    case ViolationKind::not_json: headline = "response is not a JSON tool call"; break;
    case ViolationKind::multiple_calls: headline = "response contains more than one tool call"; break;
    case ViolationKind::unknown_function: headline = "call names an unknown function"; break;
    case ViolationKind::missing_required: headline = "call is missing a required field"; break;
    case ViolationKind::enum_violation: headline = "value outside the allowed enumeration"; break;
    case ViolationKind::pattern_violation: headline = "value does not match the required format"; break;
    case ViolationKind::extra_property: headline = "call contains a property the schema forbids"; break;
    case ViolationKind::free_text_outside_call: headline = "free text outside the tool call"; break;
    case ViolationKind::type_mismatch: headline = "value has the wrong JSON type"; break;
  }
  return "aborted (" + std::string(to_string(kind)) + "): " + headline +
         (detail.empty() ? "" : ": " + detail);
}

const std::vector<FunctionSchema>& builtin_schemas() {
  static const std::vector<FunctionSchema> schemas = make_builtin_schemas();
  return schemas;
}

const FunctionSchema& builtin_schema(std::string_view name) {
  for (const auto& s : builtin_schemas()) {
    if (s.name == name) return s;
  }
  throw std::out_of_range("no builtin schema named " + std::string(name));
}

const FunctionSchema& intent_schema() {
  static const FunctionSchema schema{
      std::string(kIntentFunction),
      "Use this function to report the detected intent and domain of the user request.",
      {{"intent", one_of({"booking-request", "booking-success", "booking-failure",
                          "dbretrieval-request", "dbretrieval-success", "dbretrieval-failure",
                          "detection-unknown"},
                         "The detected intent.")},
       {"domain", one_of({"restaurant", "hotel", "train", "donotcare"}, "The detected domain.")}},
      {"intent", "domain"},
      false};
  return schema;
}

const FunctionSchema& slot_schema() {
  static const FunctionSchema schema = [] {
    FunctionSchema s{std::string(kSlotFunction),
                     "Use this function to report the slots extracted from the user request. Set a "
                     "slot to an empty string to reset it.",
                     {{"domain", one_of({"restaurant", "hotel", "train", "donotcare"},
                                        "The domain the slots belong to. Optional.")}},
                     {},
                     false};
    for (const char* slot : {"area", "pricerange", "food", "name", "type", "internet", "parking",
                             "stars", "people", "day", "time", "stay", "destination", "departure",
                             "leaveat", "arriveby", "trainid"}) {
      s.parameters.emplace_back(slot, text("Extracted value. Optional."));
    }
    return s;
  }();
  return schema;
}

const FunctionSchema* SchemaRegistry::find(std::string_view name) const {
  for (const auto& s : schemas_) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

nlohmann::ordered_json SchemaRegistry::tools_json() const {
  nlohmann::ordered_json tools = nlohmann::ordered_json::array();
  for (const auto& s : schemas_) tools.push_back(s.to_tool_json());
  return tools;
}

SchemaRegistry SchemaRegistry::monolithic() {
  std::vector<FunctionSchema> out;
  for (const auto& s : builtin_schemas()) {
    if (s.name != "processnextsubsystem") out.push_back(s);
  }
  return SchemaRegistry(std::move(out));
}

SchemaRegistry SchemaRegistry::manager() { return SchemaRegistry(builtin_schemas()); }
SchemaRegistry SchemaRegistry::intent() { return SchemaRegistry({intent_schema()}); }
SchemaRegistry SchemaRegistry::slots() { return SchemaRegistry({slot_schema()}); }
SchemaRegistry SchemaRegistry::response() { return SchemaRegistry({builtin_schema("followup")}); }

ParseResult parse_tool_call(std::string_view raw) {
  const std::string_view body = strip_fence(trim(raw));
  if (body.empty()) return FormatViolation{ViolationKind::not_json, "empty response"};

  nlohmann::json whole = nlohmann::json::parse(body.begin(), body.end(), nullptr, false);
  if (!whole.is_discarded()) {
    if (whole.is_array()) {
      if (whole.size() > 1) {
        return FormatViolation{ViolationKind::multiple_calls,
                               std::to_string(whole.size()) + " calls in one response"};
      }
      if (whole.empty() || !whole[0].is_object()) {
        return FormatViolation{ViolationKind::not_json, "array does not hold a call object"};
      }
      return call_from_object(whole[0]);
    }
    if (!whole.is_object()) {
      return FormatViolation{ViolationKind::not_json, "response is JSON but not an object"};
    }
    return call_from_object(whole);
  }

  std::vector<nlohmann::json> objects;
  for (const auto& span : object_spans(body)) {
    auto parsed = nlohmann::json::parse(body.substr(span.begin, span.end - span.begin), nullptr, false);
    if (!parsed.is_discarded() && parsed.is_object()) {
      objects.push_back(std::move(parsed));
    }
  }
  if (objects.empty()) return FormatViolation{ViolationKind::not_json, "no JSON object found"};
  if (objects.size() > 1) {
    return FormatViolation{ViolationKind::multiple_calls,
                           std::to_string(objects.size()) + " calls in one response"};
  }
  return FormatViolation{ViolationKind::free_text_outside_call,
                         "text surrounds the JSON call object"};
}

ParseResult validate_arguments(const ToolCall& call, const FunctionSchema& schema) {
  if (call.function != schema.name) {
    return FormatViolation{ViolationKind::unknown_function,
                           "call to '" + call.function + "' checked against '" + schema.name + "'"};
  }
  if (!call.arguments.is_object()) {
    return FormatViolation{ViolationKind::type_mismatch, "arguments must be a JSON object"};
  }
  for (const auto& key : schema.required) {
    if (!call.arguments.contains(key)) {
      return FormatViolation{ViolationKind::missing_required,
                             schema.name + " requires '" + key + "'"};
    }
  }
  for (const auto& [key, value] : call.arguments.items()) {
    const ParamSpec* spec = schema.param(key);
    if (spec == nullptr) {
      if (!schema.additional_properties_allowed) {
        return FormatViolation{ViolationKind::extra_property,
                               schema.name + " does not accept '" + key + "'"};
      }
      continue;
    }
    if (auto bad = check_value(key, value, *spec)) return *bad;
  }
  return call;
}

ParseResult parse_and_validate(std::string_view raw, const SchemaRegistry& registry) {
  ParseResult parsed = parse_tool_call(raw);
  if (is_violation(parsed)) return parsed;
  const auto& call = std::get<ToolCall>(parsed);
  const FunctionSchema* schema = registry.find(call.function);
  if (schema == nullptr) {
    return FormatViolation{ViolationKind::unknown_function,
                           "'" + call.function + "' is not an available function"};
  }
  return validate_arguments(call, *schema);
}

}  // namespace todplay
