#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "todplay/domain_model.hpp"
#include "todplay/prompts.hpp"

namespace todplay {

class IncompatibleGrid : public Error {
 public:
  using Error::Error;
};

struct GridCell {
  std::string user_simulator;
  std::string dialogue_system;
  Architecture architecture = Architecture::monolithic;
  double booking_rate = 0;
};

/// Reads every cell report.json under the given experiment (or cell) directories.
/// The same US × DS × architecture cell appearing twice is an IncompatibleGrid.
std::vector<GridCell> collect_cells(const std::vector<std::filesystem::path>& dirs);

/// Text table: one row per user simulator, one column block per dialogue system
/// with an M/MP/ML column per architecture, and a closing "User Spread" row.
/// Every column must have a value for every user simulator.
std::string render_table(const std::vector<GridCell>& cells);

std::string report_tables(const std::vector<std::filesystem::path>& dirs);

}  // namespace todplay
