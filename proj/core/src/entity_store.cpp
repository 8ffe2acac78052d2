#include "todplay/entity_store.hpp"

#include <algorithm>
#include <fstream>

namespace todplay {

namespace {

bool compare(std::string_view lhs, std::string_view op, std::string_view rhs) {
  if (op == "=") return lhs == rhs;
  if (op == ">=") return lhs >= rhs;
  if (op == "<=") return lhs <= rhs;
  if (op == ">") return lhs > rhs;
  if (op == "<") return lhs < rhs;
  throw QueryError("unknown comparison operator '" + std::string(op) + "'");
}

std::string argument_text(const nlohmann::json& v) {
  return v.is_string() ? v.get<std::string>() : v.dump();
}

bool same_value(std::string_view column, std::string_view a, std::string_view b) {
  if (is_time_column(column)) return normalize_time(a) == normalize_time(b);
  return iequals(a, b);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::string_view to_string(BookingFailureReason reason) {
  return reason == BookingFailureReason::no_matching_entity ? "no_matching_entity" : "slot_mismatch";
}

const std::vector<std::string>& documented_columns(Domain domain) {
  static const std::vector<std::string> restaurant = {"name",  "area",     "pricerange", "food",
                                                      "phone", "postcode", "address"};
  static const std::vector<std::string> hotel = {"name",    "area",  "pricerange", "type",
                                                 "internet", "parking", "stars",    "phone",
                                                 "postcode", "address"};
  static const std::vector<std::string> train = {"trainid", "departure", "destination", "day",
                                                 "leaveat", "arriveby",  "price",       "duration"};
  switch (domain) {
    case Domain::restaurant: return restaurant;
    case Domain::hotel: return hotel;
    case Domain::train: return train;
  }
  return restaurant;
}

std::string_view identity_column(Domain domain) {
  return domain == Domain::train ? "trainid" : "name";
}

bool is_ignored_booking_argument(std::string_view key) {
  return key == "phone" || key == "postcode" || key == "address" || key == "price" ||
         key == "duration";
}

bool is_reservation_argument(Domain domain, std::string_view key) {
  if (key == "people") return true;
  switch (domain) {
    case Domain::restaurant: return key == "day" || key == "time";
    case Domain::hotel: return key == "day" || key == "stay";
    case Domain::train: return false;
  }
  return false;
}

std::optional<Domain> retrieval_function_domain(std::string_view function) {
  if (function == "retrievefromrestaurantdb") return Domain::restaurant;
  if (function == "retrievefromhoteldb") return Domain::hotel;
  if (function == "retrievefromtraindb") return Domain::train;
  return std::nullopt;
}

std::optional<Domain> booking_function_domain(std::string_view function) {
  if (function == "validaterestaurantbooking") return Domain::restaurant;
  if (function == "validatehotelbooking") return Domain::hotel;
  if (function == "validatetrainbooking") return Domain::train;
  return std::nullopt;
}

QueryFilter QueryFilter::from_arguments(Domain domain, const nlohmann::json& args) {
  QueryFilter f;
  f.domain = domain;
  if (!args.is_object()) throw QueryError("retrieval arguments must be an object");
  for (const auto& [key, value] : args.items()) {
    if (value.is_object()) {
      if (!value.contains("operator") || !value.contains("value")) {
        throw QueryError("comparison on '" + key + "' needs operator and value");
      }
      f.compares[key] = {argument_text(value["operator"]), argument_text(value["value"])};
    } else {
      f.equals[key] = argument_text(value);
    }
  }
  return f;
}

void EntityStore::add(EntityRecord record) {
  auto& cols = columns_[record.domain()];
  if (cols.empty()) {
    for (const auto& c : documented_columns(record.domain())) cols.push_back(c);
  }
  for (const auto& [column, value] : record.fields()) {
    std::string lower = to_lower(column);
    if (std::find(cols.begin(), cols.end(), lower) == cols.end()) cols.push_back(std::move(lower));
  }
  records_[record.domain()].push_back(std::move(record));
}

const std::vector<EntityRecord>& EntityStore::records(Domain domain) const {
  static const std::vector<EntityRecord> empty;
  auto it = records_.find(domain);
  return it == records_.end() ? empty : it->second;
}

bool EntityStore::has_column(Domain domain, std::string_view column) const {
  const std::string lower = to_lower(column);
  auto it = columns_.find(domain);
  const auto& cols = it == columns_.end() ? documented_columns(domain) : it->second;
  return std::find(cols.begin(), cols.end(), lower) != cols.end();
}

std::vector<EntityRecord> EntityStore::query(const QueryFilter& filter, std::size_t limit) const {
  for (const auto& [column, value] : filter.equals) {
    if (!has_column(filter.domain, column)) {
      throw QueryError("unknown " + std::string(to_string(filter.domain)) + " column '" + column + "'");
    }
  }
  for (const auto& [column, cmp] : filter.compares) {
    if (!has_column(filter.domain, column)) {
      throw QueryError("unknown " + std::string(to_string(filter.domain)) + " column '" + column + "'");
    }
    if (!is_time_column(column) && !is_star_column(column)) {
      throw QueryError("column '" + column + "' does not support comparisons");
    }
    compare("", cmp.op, "");  // rejects unknown operators up front
  }

  std::vector<EntityRecord> out;
  for (const auto& record : records(filter.domain)) {
    if (out.size() >= limit) break;
    bool ok = true;
    for (const auto& [column, value] : filter.equals) {
      auto field = record.get(column);
      if (!field || !iequals(*field, value)) {
        ok = false;
        break;
      }
    }
    for (auto it = filter.compares.begin(); ok && it != filter.compares.end(); ++it) {
      auto field = record.get(it->first);
      const auto& wanted = it->second.value;
      ok = field && compare(*field, it->second.op, is_time_column(it->first) ? normalize_time(wanted) : wanted);
    }
    if (ok) out.push_back(record);
  }
  return out;
}

std::vector<EntityRecord> EntityStore::find_by_identity(Domain domain, std::string_view id) const {
  std::vector<EntityRecord> out;
  const auto key = identity_column(domain);
  for (const auto& record : records(domain)) {
    auto value = record.get(key);
    if (value && iequals(*value, id)) out.push_back(record);
  }
  return out;
}

BookingOutcome EntityStore::validate_booking(Domain domain, const nlohmann::json& args,
                                             std::uint64_t seed, std::string_view dialogue_id,
                                             std::size_t counter) const {
  const std::string key(identity_column(domain));
  if (!args.is_object() || !args.contains(key)) {
    return BookingFailure{domain, BookingFailureReason::no_matching_entity,
                          "booking names no " + key};
  }
  const std::string id = argument_text(args[key]);
  const auto candidates = find_by_identity(domain, id);
  if (candidates.empty()) {
    return BookingFailure{domain, BookingFailureReason::no_matching_entity,
                          "no " + std::string(to_string(domain)) + " with " + key + " '" + id + "'"};
  }

  std::string mismatch;
  for (const auto& record : candidates) {
    mismatch.clear();
    for (const auto& [arg, value] : args.items()) {
      if (arg == key || is_ignored_booking_argument(arg) || is_reservation_argument(domain, arg)) {
        continue;
      }
      auto field = record.get(arg);
      const std::string wanted = argument_text(value);
      if (!field || !same_value(arg, *field, wanted)) {
        mismatch = arg + " '" + wanted + "' does not match " + id +
                   (field ? " ('" + std::string(*field) + "')" : " (no such column)");
        break;
      }
    }
    if (mismatch.empty()) break;
  }
  if (!mismatch.empty()) {
    return BookingFailure{domain, BookingFailureReason::slot_mismatch, mismatch};
  }

  BookingResult result;
  result.domain = domain;
  result.reference_number = generate_refnum(seed, dialogue_id, counter);
  for (const auto& [arg, value] : args.items()) {
    if (!is_ignored_booking_argument(arg)) result.confirmed_slots[arg] = argument_text(value);
  }
  return result;
}

std::vector<EntityRecord> load_records(Domain domain, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path);
  std::vector<EntityRecord> out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = path + ":" + std::to_string(lineno) + ": ";
    auto j = nlohmann::ordered_json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw LoadError(where + "not a JSON object");
    std::vector<std::pair<std::string, std::string>> fields;
    for (const auto& [column, value] : j.items()) {
      if (!value.is_string()) throw LoadError(where + "column '" + column + "' is not a string");
      fields.emplace_back(column, value.get<std::string>());
    }
    try {
      out.emplace_back(domain, std::move(fields));
    } catch (const InvalidValue& e) {
      throw LoadError(where + e.what());
    }
  }
  return out;
}

EntityStore load_store(const std::map<Domain, std::string>& paths) {
  EntityStore store;
  for (const auto& [domain, path] : paths) {
    for (auto& record : load_records(domain, path)) store.add(std::move(record));
  }
  return store;
}

std::string generate_refnum(std::uint64_t seed, std::string_view dialogue_id, std::size_t counter) {
  static constexpr char kDigits[] = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ";
  std::uint64_t h = splitmix64(seed ^ splitmix64(fnv1a(dialogue_id) + counter));
  std::string out(8, '0');
  for (int i = 7; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[h % 36];
    h /= 36;
  }
  return out;
}

nlohmann::json to_json(const BookingFailure& failure) {
  return {{"domain", to_string(failure.domain)},
          {"reason", to_string(failure.reason)},
          {"detail", failure.detail}};
}

}  // namespace todplay
