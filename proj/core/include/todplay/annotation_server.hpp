#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "todplay/evaluation.hpp"

namespace todplay {

struct AnnotationPair {
  std::string id;
  nlohmann::json generated;     // [{"speaker": "user"|"system", "text": ...}]
  nlohmann::json ground_truth;
};

/// Session file: {"seed": n, "instructions": "...", "pairs": [{"id", "generated", "ground_truth"}]}.
/// A dialogue is either a line array as above or a transcript object, which is
/// reduced to its visible exchange.
struct AnnotationSession {
  std::uint64_t seed = 0;
  std::string instructions;
  std::vector<AnnotationPair> pairs;

  static AnnotationSession from_json(const nlohmann::json& j);
  static AnnotationSession load(const std::filesystem::path& path);
};

nlohmann::json dialogue_lines(const nlohmann::json& dialogue);

/// Whether the generated dialogue is shown on the left for this pair.
bool generated_on_left(std::uint64_t seed, const std::string& pair_id);

struct PairView {
  std::string pair_id;
  std::size_t index = 0;  // 0-based position in the session
  std::size_t total = 0;
  nlohmann::json left;
  nlohmann::json right;
};

struct LoggedJudgment {
  std::string pair_id;
  std::string choice;  // left | right
  Preference left = Preference::generated;
  Preference right = Preference::ground_truth;
  Preference preferred = Preference::generated;
};

nlohmann::json to_json(const LoggedJudgment& entry);
LoggedJudgment logged_judgment_from_json(const nlohmann::json& j);

/// Reads a JSONL judgment log; enough to recompute the TT rate on its own.
std::vector<LoggedJudgment> read_judgment_log(const std::filesystem::path& path);
std::vector<Judgment> judgments_of(const std::vector<LoggedJudgment>& log);

enum class SubmitStatus { accepted, duplicate, unknown_pair };

struct SubmitResult {
  SubmitStatus status = SubmitStatus::accepted;
  std::optional<LoggedJudgment> entry;
};

struct Progress {
  std::size_t completed = 0;
  std::size_t total = 0;
};

/// Judgment collection over a session, durable in an append-only JSONL log.
/// Existing log entries are loaded on construction, so a restart resumes.
class AnnotationService {
 public:
  AnnotationService(AnnotationSession session, std::filesystem::path log_path);

  const AnnotationSession& session() const { return session_; }
  std::optional<PairView> next() const;
  /// Throws InvalidValue when `choice` is not "left" or "right".
  SubmitResult submit(const std::string& pair_id, const std::string& choice);
  Progress progress() const;
  /// Null until at least one judgment exists.
  std::optional<double> tt_rate() const;
  std::vector<LoggedJudgment> log() const;

 private:
  void append(const LoggedJudgment& entry);

  AnnotationSession session_;
  std::filesystem::path log_path_;
  std::vector<LoggedJudgment> log_;
  mutable std::mutex mutex_;
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 0;  // 0: any free port
  std::optional<std::filesystem::path> static_dir;
};

/// HTTP front end:
///   GET  /api/session    → {instructions, total}
///   GET  /api/next       → 200 {pair_id, index, total, left, right} or 204 when done
///   POST /api/judgments  {pair_id, choice} → 201, 400 malformed, 404 unknown pair, 409 duplicate
///   GET  /api/progress   → {completed, total, remaining}
///   GET  /api/tt-rate    → {tt_rate, judgments}
class AnnotationServer {
 public:
  AnnotationServer(AnnotationService& service, ServerOptions options);
  ~AnnotationServer();
  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  /// Binds and serves on a background thread; returns the bound port.
  int start();
  /// Blocks until the server stops.
  void wait();
  void stop();
  /// Asks the server to stop without joining; usable from a signal handler.
  void interrupt();
  int port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace todplay
