#include "todplay/report_tables.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "todplay/evaluation.hpp"

namespace todplay {

namespace fs = std::filesystem;

namespace {

GridCell read_cell(const fs::path& report) {
  std::ifstream in(report);
  if (!in) throw Error("cannot open " + report.string());
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(report.string() + ": not a JSON object");
  try {
    GridCell c;
    c.user_simulator = j.at("user_simulator").get<std::string>();
    c.dialogue_system = j.at("dialogue_system").get<std::string>();
    c.architecture = architecture_from_string(j.at("architecture").get<std::string>());
    c.booking_rate = j.at("rates").at("booking_rate").get<double>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(report.string() + ": " + e.what());
  }
}

void add_unique(std::vector<std::string>& order, const std::string& value) {
  if (std::find(order.begin(), order.end(), value) == order.end()) order.push_back(value);
}

std::string format_rate(double v) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << v;
  return out.str();
}

}  // namespace

std::vector<GridCell> collect_cells(const std::vector<fs::path>& dirs) {
  if (dirs.empty()) throw InvalidValue("report needs at least one experiment directory");
  std::vector<GridCell> cells;
  std::set<std::tuple<std::string, std::string, Architecture>> seen;
  for (const auto& dir : dirs) {
    if (!fs::is_directory(dir)) throw Error(dir.string() + ": not a directory");
    std::vector<fs::path> reports;
    if (fs::exists(dir / "report.json")) reports.push_back(dir / "report.json");
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_directory() && fs::exists(entry.path() / "report.json")) {
        reports.push_back(entry.path() / "report.json");
      }
    }
    if (reports.empty()) throw Error(dir.string() + ": no report.json found");
    std::sort(reports.begin(), reports.end());
    for (const auto& r : reports) {
      GridCell c = read_cell(r);
      if (!seen.emplace(c.user_simulator, c.dialogue_system, c.architecture).second) {
        throw IncompatibleGrid("duplicate cell " + c.user_simulator + " × " + c.dialogue_system + " × " +
                               std::string(to_string(c.architecture)) + " (" + r.string() + ")");
      }
      cells.push_back(std::move(c));
    }
  }
  return cells;
}

std::string render_table(const std::vector<GridCell>& cells) {
  if (cells.empty()) throw IncompatibleGrid("no cells to render");
  std::vector<std::string> simulators;
  std::vector<std::string> systems;
  std::map<std::string, std::set<Architecture>> architectures;
  std::map<std::tuple<std::string, Architecture, std::string>, double> value;
  for (const auto& c : cells) {
    add_unique(simulators, c.user_simulator);
    add_unique(systems, c.dialogue_system);
    architectures[c.dialogue_system].insert(c.architecture);
    if (!value.emplace(std::make_tuple(c.dialogue_system, c.architecture, c.user_simulator), c.booking_rate)
             .second) {
      throw IncompatibleGrid("duplicate cell " + c.user_simulator + " × " + c.dialogue_system + " × " +
                             std::string(to_string(c.architecture)));
    }
  }

  struct Column {
    std::string system;
    Architecture architecture;
  };
  std::vector<Column> columns;
  for (const auto& ds : systems) {
    for (Architecture arch : architectures[ds]) {
      for (const auto& us : simulators) {
        if (value.count({ds, arch, us}) == 0) {
          throw IncompatibleGrid("missing cell " + us + " × " + ds + " × " + std::string(to_string(arch)));
        }
      }
      columns.push_back({ds, arch});
    }
  }

  std::vector<std::vector<std::string>> rows;
  rows.push_back({"Model (US)"});
  rows.push_back({""});
  for (std::size_t i = 0; i < columns.size(); ++i) {
    const bool first = i == 0 || columns[i - 1].system != columns[i].system;
    rows[0].push_back(first ? columns[i].system : "");
    rows[1].push_back(std::string(short_label(columns[i].architecture)));
  }
  for (const auto& us : simulators) {
    std::vector<std::string> row{us};
    for (const auto& col : columns) row.push_back(format_rate(value.at({col.system, col.architecture, us})));
    rows.push_back(std::move(row));
  }
  std::vector<std::string> spread{"User Spread"};
  for (const auto& col : columns) {
    std::map<std::string, double> rates;
    for (const auto& us : simulators) rates[us] = value.at({col.system, col.architecture, us});
    spread.push_back(format_rate(us_spread(rates)));
  }

  std::vector<std::size_t> width(columns.size() + 1, 0);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  for (std::size_t i = 0; i < spread.size(); ++i) width[i] = std::max(width[i], spread[i].size());

  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& row) {
    std::string line;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) line += " | ";
      line += row[i] + std::string(width[i] - row[i].size(), ' ');
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << '\n';
  };
  auto rule = [&] {
    std::string line;
    for (std::size_t i = 0; i < width.size(); ++i) {
      if (i > 0) line += "-+-";
      line += std::string(width[i], '-');
    }
    out << line << '\n';
  };
  emit(rows[0]);
  emit(rows[1]);
  rule();
  for (std::size_t r = 2; r < rows.size(); ++r) emit(rows[r]);
  rule();
  emit(spread);
  return out.str();
}

std::string report_tables(const std::vector<fs::path>& dirs) { return render_table(collect_cells(dirs)); }

}  // namespace todplay
