#include "todplay/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iostream>
#include <mutex>
#include <regex>
#include <set>
#include <thread>

#include "todplay/cost_model.hpp"
#include "todplay/prompts.hpp"

namespace todplay {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw ConfigError(path + ": " + message);
}

fs::path resolve(const fs::path& base, const std::string& value) {
  fs::path p(value);
  return p.is_absolute() ? p : base / p;
}

std::string require_string(const nlohmann::json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) fail(path + "." + key, "required");
  if (!j[key].is_string() || j[key].get<std::string>().empty()) fail(path + "." + key, "must be a non-empty string");
  return j[key].get<std::string>();
}

Backend backend_from_string(const std::string& text, const std::string& path) {
  if (text == "scripted") return Backend::scripted;
  if (text == "remote") return Backend::remote;
  if (text == "interactive") return Backend::interactive;
  fail(path, "unknown backend '" + text + "' (scripted, remote, interactive)");
}

std::vector<PlayerSpec> players_from_json(const nlohmann::json& j, const std::string& key,
                                          const fs::path& base) {
  const std::string path = "config." + key;
  if (!j.contains(key)) fail(path, "required");
  if (!j[key].is_array() || j[key].empty()) fail(path, "must be a non-empty array");
  static const std::regex safe_id("[A-Za-z0-9._-]+");
  std::vector<PlayerSpec> out;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < j[key].size(); ++i) {
    const auto& e = j[key][i];
    const std::string where = path + "[" + std::to_string(i) + "]";
    if (!e.is_object()) fail(where, "must be an object");
    PlayerSpec p;
    p.id = require_string(e, "id", where);
    if (!std::regex_match(p.id, safe_id)) fail(where + ".id", "may only contain letters, digits, '.', '_' and '-'");
    if (p.id.find("__") != std::string::npos) fail(where + ".id", "must not contain '__'");
    if (!ids.insert(p.id).second) fail(where + ".id", "duplicate id '" + p.id + "'");
    p.backend = backend_from_string(e.value("backend", "scripted"), where + ".backend");
    p.price_id = e.value("price_id", p.id);
    if (p.backend == Backend::scripted) p.scripts = resolve(base, require_string(e, "scripts", where));
    if (p.backend == Backend::remote) {
      if (!e.contains("endpoint")) fail(where + ".endpoint", "required for the remote backend");
      try {
        p.endpoint = EndpointConfig::from_json(e["endpoint"]);
      } catch (const InvalidValue& ex) {
        fail(where + ".endpoint", ex.what());
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(path.string() + ": not valid JSON");
  return j;
}

std::vector<std::string> user_script(const nlohmann::json& scripts, const std::string& goal_id) {
  if (!scripts.contains(goal_id)) return {};
  const auto& entry = scripts[goal_id];
  if (entry.is_array()) return ScriptedPlayer::script_from_json(entry);
  if (entry.is_object() && entry.contains("user")) return ScriptedPlayer::script_from_json(entry["user"]);
  return {};
}

std::vector<std::string> system_script(const nlohmann::json& scripts, const std::string& goal_id,
                                       Architecture architecture, const std::string& role) {
  if (!scripts.contains(goal_id) || !scripts[goal_id].is_object()) return {};
  const auto& entry = scripts[goal_id];
  const std::string arch(to_string(architecture));
  if (entry.contains(arch) && entry[arch].is_object() && entry[arch].contains(role)) {
    return ScriptedPlayer::script_from_json(entry[arch][role]);
  }
  if (entry.contains(role)) return ScriptedPlayer::script_from_json(entry[role]);
  return {};
}

std::vector<std::string> roles_for(Architecture architecture) {
  switch (architecture) {
    case Architecture::monolithic: return {"monolithic"};
    case Architecture::modular_prog: return {"intent", "slots", "response"};
    case Architecture::modular_llm: return {"manager", "intent", "slots", "response"};
  }
  return {};
}

struct Job {
  std::size_t cell;
  std::size_t goal;
  std::uint64_t seed;
};

struct JobResult {
  std::optional<EvaluationReport> report;
  TokenUsage user_usage;
  TokenUsage system_usage;
  std::string error;
};

nlohmann::json usage_json(const TokenUsage& u) {
  return {{"prompt_tokens", u.prompt_tokens}, {"response_tokens", u.response_tokens}, {"calls", u.calls}};
}

nlohmann::json cost_json(const TokenUsage& usage, const PriceTable& prices, const std::string& price_id) {
  const ModelPrice* price = prices.find(price_id);
  if (price == nullptr) return nullptr;
  const CostSummary c = cost_of(usage, *price);
  return {{"price_id", price_id}, {"token_usd", c.token_usd}, {"flop_usd", c.flop_usd}};
}

}  // namespace

std::string cell_name(const std::string& us, const std::string& ds, Architecture architecture) {
  return us + "__" + ds + "__" + std::string(to_string(architecture));
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j, const fs::path& base_dir) {
  if (!j.is_object()) fail("config", "must be a JSON object");
  ExperimentConfig c;
  c.name = j.value("name", c.name);
  c.goals = resolve(base_dir, require_string(j, "goals", "config"));
  if (j.contains("goal_ids")) {
    if (!j["goal_ids"].is_array()) fail("config.goal_ids", "must be an array of strings");
    c.goal_ids = j["goal_ids"].get<std::vector<std::string>>();
  }
  if (!j.contains("stores")) fail("config.stores", "required");
  if (!j["stores"].is_object()) fail("config.stores", "must be an object");
  for (Domain d : kAllDomains) {
    const std::string name(to_string(d));
    c.stores[d] = resolve(base_dir, require_string(j["stores"], name, "config.stores"));
  }
  for (const auto& [key, value] : j["stores"].items()) {
    if (!parse_domain(key)) fail("config.stores." + key, "unknown domain");
  }
  c.prompts_dir = j.contains("prompts_dir") ? resolve(base_dir, require_string(j, "prompts_dir", "config"))
                                            : default_data_dir() / "prompts";
  c.prices = j.contains("prices") ? resolve(base_dir, require_string(j, "prices", "config"))
                                  : default_data_dir() / "prices" / "prices.json";
  c.output_dir = j.contains("output_dir") ? resolve(base_dir, require_string(j, "output_dir", "config"))
                                          : base_dir / "runs" / c.name;
  c.user_simulators = players_from_json(j, "user_simulators", base_dir);
  c.dialogue_systems = players_from_json(j, "dialogue_systems", base_dir);

  if (!j.contains("architectures")) fail("config.architectures", "required");
  if (!j["architectures"].is_array() || j["architectures"].empty()) {
    fail("config.architectures", "must be a non-empty array");
  }
  for (std::size_t i = 0; i < j["architectures"].size(); ++i) {
    const auto& a = j["architectures"][i];
    const std::string where = "config.architectures[" + std::to_string(i) + "]";
    if (!a.is_string()) fail(where, "must be a string");
    try {
      c.architectures.push_back(architecture_from_string(a.get<std::string>()));
    } catch (const InvalidValue& e) {
      fail(where, e.what());
    }
  }
  if (j.contains("seeds")) {
    if (!j["seeds"].is_array() || j["seeds"].empty()) fail("config.seeds", "must be a non-empty array");
    c.seeds.clear();
    for (const auto& s : j["seeds"]) {
      if (!s.is_number_unsigned()) fail("config.seeds", "seeds must be non-negative integers");
      c.seeds.push_back(s.get<std::uint64_t>());
    }
  }
  if (j.contains("concurrency")) {
    if (!j["concurrency"].is_number_unsigned() || j["concurrency"].get<std::size_t>() < 1) {
      fail("config.concurrency", "must be a positive integer");
    }
    c.concurrency = j["concurrency"].get<std::size_t>();
  }
  try {
    c.game = GameConfig::from_json(j.value("game", nlohmann::json()));
  } catch (const InvalidValue& e) {
    fail("config.game", e.what());
  }
  const std::string clock = j.value("clock", "auto");
  if (clock == "auto") {
    c.clock = ClockMode::automatic;
  } else if (clock == "steady") {
    c.clock = ClockMode::steady;
  } else if (clock == "virtual") {
    c.clock = ClockMode::virtual_ticks;
  } else {
    fail("config.clock", "must be auto, steady or virtual");
  }
  c.virtual_tick_ms = j.value("virtual_tick_ms", c.virtual_tick_ms);
  if (c.virtual_tick_ms < 0) fail("config.virtual_tick_ms", "must be >= 0");
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config: " + path.string() + " is not valid JSON");
  return from_json(j, fs::absolute(path).parent_path());
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  std::vector<Goal> goals = load_goals(config.goals.string());
  if (!config.goal_ids.empty()) {
    std::vector<Goal> picked;
    for (const auto& id : config.goal_ids) {
      auto it = std::find_if(goals.begin(), goals.end(), [&](const Goal& g) { return g.id() == id; });
      if (it == goals.end()) throw ConfigError("config.goal_ids: unknown goal '" + id + "'");
      picked.push_back(*it);
    }
    goals = std::move(picked);
  }
  std::map<Domain, std::string> store_paths;
  for (const auto& [d, p] : config.stores) store_paths[d] = p.string();
  const EntityStore store = load_store(store_paths);
  const PromptLibrary library = PromptLibrary::load(config.prompts_dir);
  const PriceTable prices = fs::exists(config.prices) ? PriceTable::load(config.prices.string()) : PriceTable{};

  std::map<std::string, nlohmann::json> scripts;
  bool all_scripted = true;
  bool any_interactive = false;
  for (const auto* group : {&config.user_simulators, &config.dialogue_systems}) {
    for (const auto& p : *group) {
      if (p.backend == Backend::scripted && scripts.count(p.scripts.string()) == 0) {
        scripts[p.scripts.string()] = read_json(p.scripts);
      }
      all_scripted = all_scripted && p.backend == Backend::scripted;
      any_interactive = any_interactive || p.backend == Backend::interactive;
    }
  }
  const bool virtual_clock = config.clock == ClockMode::virtual_ticks ||
                             (config.clock == ClockMode::automatic && all_scripted);

  ExperimentResult result;
  result.directory = config.output_dir;
  for (const auto& us : config.user_simulators) {
    for (const auto& ds : config.dialogue_systems) {
      for (Architecture arch : config.architectures) {
        CellSummary cell;
        cell.user_simulator = us.id;
        cell.dialogue_system = ds.id;
        cell.architecture = arch;
        cell.directory = config.output_dir / cell_name(us.id, ds.id, arch);
        result.cells.push_back(std::move(cell));
      }
    }
  }
  auto spec_of = [&](const std::vector<PlayerSpec>& specs, const std::string& id) -> const PlayerSpec& {
    return *std::find_if(specs.begin(), specs.end(), [&](const PlayerSpec& p) { return p.id == id; });
  };

  std::vector<Job> jobs;
  for (std::size_t c = 0; c < result.cells.size(); ++c) {
    for (std::size_t g = 0; g < goals.size(); ++g) {
      for (std::uint64_t seed : config.seeds) jobs.push_back({c, g, seed});
    }
  }
  std::vector<JobResult> outcomes(jobs.size());
  std::mutex console;

  auto make_player = [&](const PlayerSpec& spec, std::vector<std::string> script,
                         PlayerRole role) -> std::shared_ptr<Player> {
    switch (spec.backend) {
      case Backend::scripted:
        return std::make_shared<ScriptedPlayer>(std::move(script), role, config.game.done_token);
      case Backend::remote:
        return std::make_shared<RemotePlayer>(*spec.endpoint, nullptr);
      case Backend::interactive:
        return std::make_shared<InteractivePlayer>(std::cin, std::cout,
                                                   role == PlayerRole::user ? "user" : "system");
    }
    return nullptr;
  };

  auto run_job = [&](std::size_t index) {
    const Job& job = jobs[index];
    const CellSummary& cell = result.cells[job.cell];
    const Goal& goal = goals[job.goal];
    JobResult& out = outcomes[index];
    try {
      const PlayerSpec& us = spec_of(config.user_simulators, cell.user_simulator);
      const PlayerSpec& ds = spec_of(config.dialogue_systems, cell.dialogue_system);
      const auto user = make_player(
          us, us.backend == Backend::scripted ? user_script(scripts.at(us.scripts.string()), goal.id())
                                              : std::vector<std::string>{},
          PlayerRole::user);
      PlayerMap players;
      std::shared_ptr<Player> shared_remote;
      for (const auto& role : roles_for(cell.architecture)) {
        if (ds.backend == Backend::scripted) {
          players[role] = make_player(
              ds, system_script(scripts.at(ds.scripts.string()), goal.id(), cell.architecture, role),
              PlayerRole::system);
        } else {
          if (!shared_remote) shared_remote = make_player(ds, {}, PlayerRole::system);
          players[role] = shared_remote;
        }
      }
      auto system = make_dialogue_system(cell.architecture, std::move(players),
                                         build_system_prompts(library, cell.architecture),
                                         config.game.generation);
      VirtualClock vclock(config.virtual_tick_ms);
      RunOptions options;
      options.clock = virtual_clock ? &vclock : nullptr;
      options.user_prompt = build_user_sim_prompt(library, goal);
      const Transcript t = run_dialogue(goal, *user, *system, store, config.game, job.seed, options);
      write_file_atomic(cell.directory / "transcripts" /
                            (goal.id() + "__s" + std::to_string(job.seed) + ".jsonl"),
                        to_json(t).dump() + "\n");
      out.report = evaluate(t, goal, store);
      out.user_usage = t.user_usage;
      out.system_usage = t.system_usage;
    } catch (const std::exception& e) {
      out.error = goal.id() + " seed " + std::to_string(job.seed) + ": " + e.what();
      std::lock_guard lock(console);
      std::cerr << "error in " << cell_name(cell.user_simulator, cell.dialogue_system, cell.architecture)
                << ": " << out.error << '\n';
    }
  };

  const std::size_t workers =
      std::max<std::size_t>(1, std::min(any_interactive ? 1 : config.concurrency, jobs.size()));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < jobs.size(); i = next++) run_job(i);
    });
  }
  for (auto& t : pool) t.join();

  std::vector<TokenUsage> user_usage(result.cells.size());
  std::vector<TokenUsage> system_usage(result.cells.size());
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    auto& cell = result.cells[jobs[i].cell];
    if (outcomes[i].report) {
      cell.reports.push_back(*outcomes[i].report);
      user_usage[jobs[i].cell] += outcomes[i].user_usage;
      system_usage[jobs[i].cell] += outcomes[i].system_usage;
    } else {
      cell.errors.push_back(outcomes[i].error);
      ++result.internal_errors;
    }
  }

  nlohmann::json cells_json = nlohmann::json::array();
  for (std::size_t c = 0; c < result.cells.size(); ++c) {
    auto& cell = result.cells[c];
    cell.rates = summarize(cell.reports);
    nlohmann::json dialogues = nlohmann::json::array();
    for (const auto& r : cell.reports) dialogues.push_back(to_json(r));
    const nlohmann::json report = {{"user_simulator", cell.user_simulator},
                                   {"dialogue_system", cell.dialogue_system},
                                   {"architecture", to_string(cell.architecture)},
                                   {"rates", to_json(cell.rates)},
                                   {"dialogues", dialogues},
                                   {"errors", cell.errors}};
    write_file_atomic(cell.directory / "report.json", report.dump(2) + "\n");

    double max_latency = 0;
    for (const auto& r : cell.reports) max_latency = std::max(max_latency, r.latency_s);
    const auto& us = spec_of(config.user_simulators, cell.user_simulator);
    const auto& ds = spec_of(config.dialogue_systems, cell.dialogue_system);
    const nlohmann::json summary = {
        {"dialogues", cell.reports.size()},
        {"tokenizer", config.game.tokenizer},
        {"usage", {{"user", usage_json(user_usage[c])}, {"system", usage_json(system_usage[c])}}},
        {"cost",
         {{"user", cost_json(user_usage[c], prices, us.price_id)},
          {"system", cost_json(system_usage[c], prices, ds.price_id)}}},
        {"latency", {{"mean_s", cell.rates.mean_latency_s}, {"max_s", max_latency}}},
        {"clock", virtual_clock ? "virtual" : "steady"}};
    write_file_atomic(cell.directory / "summary.json", summary.dump(2) + "\n");

    cells_json.push_back({{"directory", cell.directory.filename().string()},
                          {"user_simulator", cell.user_simulator},
                          {"dialogue_system", cell.dialogue_system},
                          {"architecture", to_string(cell.architecture)},
                          {"inform_rate", cell.rates.inform_rate},
                          {"booking_rate", cell.rates.booking_rate},
                          {"errors", cell.errors.size()}});
  }
  const nlohmann::json experiment = {{"name", config.name},
                                     {"goals", goals.size()},
                                     {"seeds", config.seeds},
                                     {"cells", cells_json},
                                     {"internal_errors", result.internal_errors}};
  write_file_atomic(config.output_dir / "experiment.json", experiment.dump(2) + "\n");
  return result;
}

}  // namespace todplay
