#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "todplay/chat_client.hpp"
#include "todplay/evaluation.hpp"
#include "todplay/game_master.hpp"

namespace todplay {

/// Configuration problem; the message starts with the offending field path.
class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class Backend { scripted, remote, interactive };

struct PlayerSpec {
  std::string id;
  Backend backend = Backend::scripted;
  std::filesystem::path scripts;          // scripted
  std::optional<EndpointConfig> endpoint;  // remote
  std::string price_id;                   // key into the price table; defaults to id
};

enum class ClockMode { automatic, steady, virtual_ticks };

struct ExperimentConfig {
  std::string name = "experiment";
  std::filesystem::path goals;
  std::vector<std::string> goal_ids;  // empty: all goals
  std::map<Domain, std::filesystem::path> stores;
  std::filesystem::path prompts_dir;
  std::filesystem::path prices;
  std::filesystem::path output_dir;
  std::vector<PlayerSpec> user_simulators;
  std::vector<PlayerSpec> dialogue_systems;
  std::vector<Architecture> architectures;
  std::vector<std::uint64_t> seeds{0};
  std::size_t concurrency = 4;
  GameConfig game;
  ClockMode clock = ClockMode::automatic;
  std::int64_t virtual_tick_ms = 100;

  /// Relative paths are resolved against `base_dir`.
  static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static ExperimentConfig load(const std::filesystem::path& path);
};

struct CellSummary {
  std::string user_simulator;
  std::string dialogue_system;
  Architecture architecture = Architecture::monolithic;
  std::filesystem::path directory;
  std::vector<EvaluationReport> reports;
  RateSummary rates;
  std::vector<std::string> errors;  // internal errors, one per failed dialogue
};

struct ExperimentResult {
  std::filesystem::path directory;
  std::vector<CellSummary> cells;
  std::size_t internal_errors = 0;
};

/// Runs every goal × seed in every user-simulator × dialogue-system × architecture
/// cell and writes transcripts, report.json and summary.json per cell plus a
/// top-level experiment.json. Aborted dialogues are results, not errors.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Cell directory name: "<us>__<ds>__<architecture>".
std::string cell_name(const std::string& us, const std::string& ds, Architecture architecture);

/// Writes `content` to a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace todplay
