#include <csignal>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "todplay/annotation_server.hpp"
#include "todplay/experiment.hpp"
#include "todplay/goal_synthesis.hpp"
#include "todplay/report_tables.hpp"

namespace fs = std::filesystem;
using namespace todplay;

namespace {

AnnotationServer* g_server = nullptr;

void on_signal(int) {
  if (g_server != nullptr) g_server->interrupt();
}

int cmd_run(const fs::path& config_path, std::optional<std::size_t> concurrency,
            std::optional<fs::path> output) {
  ExperimentConfig config = ExperimentConfig::load(config_path);
  if (concurrency) config.concurrency = *concurrency;
  if (output) config.output_dir = *output;
  const ExperimentResult result = run_experiment(config);
  for (const auto& cell : result.cells) {
    std::cout << cell.directory.filename().string() << ": " << cell.rates.dialogues << " dialogues, inform "
              << cell.rates.inform_rate << ", booking " << cell.rates.booking_rate << ", aborted "
              << cell.rates.aborted << ", errors " << cell.errors.size() << '\n';
  }
  std::cout << "results in " << result.directory.string() << '\n';
  return result.internal_errors == 0 ? 0 : 1;
}

int cmd_synth(const std::string& mode, const fs::path& ontology_path, const fs::path& templates_path,
              const fs::path& corpus_path, std::uint64_t seed, std::size_t n_single, std::size_t n_multi,
              const fs::path& out) {
  const Ontology ontology = Ontology::load(ontology_path.string());
  const GoalTemplates templates = GoalTemplates::load(templates_path.string());
  std::vector<Goal> goals;
  if (mode == "multiwoz") {
    goals = generate_multiwoz_style(ontology, load_goals(corpus_path.string()), templates, n_single, n_multi,
                                    seed);
  } else {
    goals = generate_unrealistic(ontology, templates, n_single, n_multi, seed);
  }
  save_goals(out.string(), goals);
  std::cout << "wrote " << goals.size() << " goals to " << out.string() << '\n';
  return 0;
}

int cmd_validate(const std::vector<fs::path>& files, std::size_t max_user_turns, const std::string& done) {
  std::size_t bad = 0;
  std::size_t total = 0;
  for (const auto& file : files) {
    std::ifstream in(file);
    if (!in) {
      std::cerr << file.string() << ": cannot open\n";
      ++bad;
      continue;
    }
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      ++total;
      const std::string where = file.string() + ":" + std::to_string(n);
      std::vector<std::string> problems;
      try {
        const auto j = nlohmann::json::parse(line);
        problems = check_transcript(transcript_from_json(j), max_user_turns, done);
      } catch (const std::exception& e) {
        problems.push_back(e.what());
      }
      for (const auto& p : problems) std::cerr << where << ": " << p << '\n';
      if (!problems.empty()) ++bad;
    }
  }
  std::cout << total - std::min(bad, total) << "/" << total << " transcripts valid\n";
  return bad == 0 ? 0 : 1;
}

int cmd_annotate(const fs::path& session_path, const fs::path& log_path, const std::string& host, int port,
                 std::optional<fs::path> static_dir) {
  AnnotationService service(AnnotationSession::load(session_path), log_path);
  AnnotationServer server(service, {host, port, static_dir});
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const int bound = server.start();
  std::cout << "annotation API on http://" << host << ":" << bound << "/api  ("
            << service.progress().completed << "/" << service.progress().total << " judged)" << std::endl;
  server.wait();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"todplay: self-play evaluation of task-oriented dialogue systems"};
  app.require_subcommand(1);
  const fs::path data = default_data_dir();

  auto* run = app.add_subcommand("run", "Run an experiment grid from a JSON config");
  fs::path config_path;
  std::optional<std::size_t> concurrency;
  std::optional<fs::path> output;
  run->add_option("config", config_path, "Experiment config file")->required()->check(CLI::ExistingFile);
  run->add_option("-j,--concurrency", concurrency, "Concurrent dialogues")->check(CLI::PositiveNumber);
  run->add_option("-o,--output", output, "Override the output directory");

  auto* report = app.add_subcommand("report", "Print booking-rate tables for experiment directories");
  std::vector<fs::path> report_dirs;
  report->add_option("dirs", report_dirs, "Experiment or cell directories")->required();

  auto* synth = app.add_subcommand("synth-goals", "Generate synthetic user goals");
  std::string mode = "multiwoz";
  fs::path ontology_path;
  fs::path templates_path = data / "templates" / "goal_templates.json";
  fs::path corpus_path = data / "goals" / "corpus.jsonl";
  std::uint64_t seed = 0;
  std::size_t n_single = 60;
  std::size_t n_multi = 60;
  fs::path out;
  synth->add_option("--mode", mode, "multiwoz or unrealistic")
      ->check(CLI::IsMember({"multiwoz", "unrealistic"}))
      ->capture_default_str();
  synth->add_option("--ontology", ontology_path, "Ontology file (defaults per mode)");
  synth->add_option("--templates", templates_path, "Goal text templates")->capture_default_str();
  synth->add_option("--corpus", corpus_path, "Goals whose domain specs must not be reproduced")
      ->capture_default_str();
  synth->add_option("--seed", seed, "Generator seed")->capture_default_str();
  synth->add_option("--n-single", n_single, "Single-domain goals")->capture_default_str();
  synth->add_option("--n-multi", n_multi, "Multi-domain goals")->capture_default_str();
  synth->add_option("-o,--out", out, "Output JSONL")->required();

  auto* validate = app.add_subcommand("validate-transcripts", "Check transcript JSONL files for consistency");
  std::vector<fs::path> files;
  std::size_t max_turns = 15;
  std::string done = "DONE";
  validate->add_option("files", files, "Transcript JSONL files")->required();
  validate->add_option("--max-user-turns", max_turns)->capture_default_str();
  validate->add_option("--done-token", done)->capture_default_str();

  auto* annotate = app.add_subcommand("annotate-serve", "Serve the pairwise annotation API");
  fs::path session_path;
  fs::path log_path;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<fs::path> static_dir;
  annotate->add_option("session", session_path, "Annotation session file")->required()->check(CLI::ExistingFile);
  annotate->add_option("--log", log_path, "Judgment log (JSONL); defaults next to the session");
  annotate->add_option("--host", host)->capture_default_str();
  annotate->add_option("--port", port, "0 picks a free port")->capture_default_str();
  annotate->add_option("--static", static_dir, "Directory served at /")->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, concurrency, output);
    if (*report) {
      std::cout << report_tables(report_dirs);
      return 0;
    }
    if (*synth) {
      if (ontology_path.empty()) {
        ontology_path = data / "ontology" / (mode == "multiwoz" ? "multiwoz_style.json" : "unrealistic.json");
      }
      return cmd_synth(mode, ontology_path, templates_path, corpus_path, seed, n_single, n_multi, out);
    }
    if (*validate) return cmd_validate(files, max_turns, done);
    if (*annotate) {
      if (log_path.empty()) log_path = fs::path(session_path).replace_extension(".judgments.jsonl");
      return cmd_annotate(session_path, log_path, host, port, static_dir);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
