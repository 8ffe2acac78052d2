#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "todplay/domain_model.hpp"

namespace todplay {

inline constexpr std::size_t kQueryLimit = 5;

class QueryError : public Error {
 public:
  using Error::Error;
};

class LoadError : public Error {
 public:
  using Error::Error;
};

struct Comparison {
  std::string op;  // one of = >= <= > <
  std::string value;

  friend bool operator==(const Comparison&, const Comparison&) = default;
};

struct QueryFilter {
  Domain domain = Domain::restaurant;
  SlotMap equals;
  std::map<std::string, Comparison> compares;

  /// Builds a filter from schema-validated retrieval arguments: plain strings
  /// become equality filters, operator objects become comparisons.
  static QueryFilter from_arguments(Domain domain, const nlohmann::json& args);

  friend bool operator==(const QueryFilter&, const QueryFilter&) = default;
};

enum class BookingFailureReason { no_matching_entity, slot_mismatch };

std::string_view to_string(BookingFailureReason reason);

struct BookingFailure {
  Domain domain = Domain::restaurant;
  BookingFailureReason reason = BookingFailureReason::no_matching_entity;
  std::string detail;

  friend bool operator==(const BookingFailure&, const BookingFailure&) = default;
};

using BookingOutcome = std::variant<BookingResult, BookingFailure>;

/// Columns each domain's database file is documented to carry.
const std::vector<std::string>& documented_columns(Domain domain);
/// "name" for restaurants and hotels, "trainid" for trains.
std::string_view identity_column(Domain domain);
/// Arguments a booking call may carry that never take part in matching.
bool is_ignored_booking_argument(std::string_view key);
/// Arguments that describe the reservation rather than the entity.
bool is_reservation_argument(Domain domain, std::string_view key);

std::optional<Domain> retrieval_function_domain(std::string_view function);
std::optional<Domain> booking_function_domain(std::string_view function);

/// Read-only after load; safe for concurrent readers.
class EntityStore {
 public:
  EntityStore() = default;

  void add(EntityRecord record);

  const std::vector<EntityRecord>& records(Domain domain) const;
  std::size_t size(Domain domain) const { return records(domain).size(); }
  bool has_column(Domain domain, std::string_view column) const;

  /// Records matching every filter, in insertion order, at most `limit`.
  /// Throws QueryError on a column the domain does not have.
  std::vector<EntityRecord> query(const QueryFilter& filter, std::size_t limit = kQueryLimit) const;

  /// Records whose identity column equals `id` case-insensitively.
  std::vector<EntityRecord> find_by_identity(Domain domain, std::string_view id) const;

  /// Stateless: the same arguments always give the same outcome.
  BookingOutcome validate_booking(Domain domain, const nlohmann::json& args, std::uint64_t seed,
                                  std::string_view dialogue_id, std::size_t counter) const;

 private:
  std::map<Domain, std::vector<EntityRecord>> records_;
  std::map<Domain, std::vector<std::string>> columns_;  // lower-cased
};

/// One JSON object per line, string values only. Blank lines are skipped.
std::vector<EntityRecord> load_records(Domain domain, const std::string& path);
EntityStore load_store(const std::map<Domain, std::string>& paths);

/// Deterministic 8-character [A-Z0-9] reference number.
std::string generate_refnum(std::uint64_t seed, std::string_view dialogue_id, std::size_t counter);

nlohmann::json to_json(const BookingFailure& failure);

}  // namespace todplay
