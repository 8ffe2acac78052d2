#include "todplay/annotation_server.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include <httplib.h>
#include <unistd.h>

#include "todplay/entity_store.hpp"

namespace todplay {

namespace fs = std::filesystem;

namespace {

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

nlohmann::json view_json(const PairView& v, const std::string& instructions) {
  return {{"pair_id", v.pair_id}, {"index", v.index},   {"total", v.total},
          {"left", v.left},       {"right", v.right},   {"instructions", instructions}};
}

nlohmann::json progress_json(const Progress& p) {
  return {{"completed", p.completed}, {"total", p.total}, {"remaining", p.total - p.completed}};
}

void reply(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void error(httplib::Response& res, int status, const std::string& message) {
  reply(res, status, {{"error", message}});
}

}  // namespace

nlohmann::json dialogue_lines(const nlohmann::json& dialogue) {
  nlohmann::json out = nlohmann::json::array();
  if (dialogue.is_object() && dialogue.contains("turns")) {
    for (const auto& line : visible_exchange(transcript_from_json(dialogue))) {
      out.push_back({{"speaker", line.speaker == Speaker::user ? "user" : "system"}, {"text", line.text}});
    }
    return out;
  }
  if (!dialogue.is_array() || dialogue.empty()) {
    throw InvalidValue("a dialogue must be a transcript object or a non-empty array of lines");
  }
  for (const auto& line : dialogue) {
    if (!line.is_object() || !line.contains("speaker") || !line.contains("text") ||
        !line["speaker"].is_string() || !line["text"].is_string()) {
      throw InvalidValue("dialogue lines need string 'speaker' and 'text'");
    }
    const auto speaker = line["speaker"].get<std::string>();
    if (speaker != "user" && speaker != "system") {
      throw InvalidValue("speaker must be 'user' or 'system', got '" + speaker + "'");
    }
    out.push_back({{"speaker", speaker}, {"text", line["text"]}});
  }
  return out;
}

AnnotationSession AnnotationSession::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidValue("session must be a JSON object");
  AnnotationSession s;
  s.seed = j.value("seed", std::uint64_t{0});
  s.instructions = j.value("instructions", "");
  if (!j.contains("pairs") || !j["pairs"].is_array() || j["pairs"].empty()) {
    throw InvalidValue("session needs a non-empty 'pairs' array");
  }
  std::set<std::string> ids;
  for (const auto& p : j["pairs"]) {
    if (!p.is_object() || !p.contains("id") || !p["id"].is_string()) {
      throw InvalidValue("every pair needs a string 'id'");
    }
    AnnotationPair pair;
    pair.id = p["id"].get<std::string>();
    if (!ids.insert(pair.id).second) throw InvalidValue("duplicate pair id '" + pair.id + "'");
    if (!p.contains("generated") || !p.contains("ground_truth")) {
      throw InvalidValue("pair '" + pair.id + "' needs 'generated' and 'ground_truth'");
    }
    pair.generated = dialogue_lines(p["generated"]);
    pair.ground_truth = dialogue_lines(p["ground_truth"]);
    s.pairs.push_back(std::move(pair));
  }
  return s;
}

AnnotationSession AnnotationSession::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw LoadError(path.string() + ": not valid JSON");
  try {
    return from_json(j);
  } catch (const InvalidValue& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

bool generated_on_left(std::uint64_t seed, const std::string& pair_id) {
  return (splitmix64(seed ^ fnv1a(pair_id)) & 1U) == 0;
}

nlohmann::json to_json(const LoggedJudgment& e) {
  return {{"pair_id", e.pair_id},
          {"choice", e.choice},
          {"left", to_string(e.left)},
          {"right", to_string(e.right)},
          {"preferred", to_string(e.preferred)}};
}

LoggedJudgment logged_judgment_from_json(const nlohmann::json& j) {
  LoggedJudgment e;
  try {
    e.pair_id = j.at("pair_id").get<std::string>();
    e.choice = j.at("choice").get<std::string>();
    e.left = preference_from_string(j.at("left").get<std::string>());
    e.right = preference_from_string(j.at("right").get<std::string>());
    e.preferred = preference_from_string(j.at("preferred").get<std::string>());
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidValue(std::string("malformed judgment: ") + ex.what());
  }
  if (e.choice != "left" && e.choice != "right") throw InvalidValue("choice must be left or right");
  if (e.left == e.right) throw InvalidValue("left and right must differ");
  if (e.preferred != (e.choice == "left" ? e.left : e.right)) {
    throw InvalidValue("preferred does not match the chosen side");
  }
  return e;
}

std::vector<LoggedJudgment> read_judgment_log(const fs::path& path) {
  std::vector<LoggedJudgment> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw LoadError(path.string() + ":" + std::to_string(n) + ": not valid JSON");
    try {
      out.push_back(logged_judgment_from_json(j));
    } catch (const InvalidValue& e) {
      throw LoadError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Judgment> judgments_of(const std::vector<LoggedJudgment>& log) {
  std::vector<Judgment> out;
  out.reserve(log.size());
  for (const auto& e : log) out.push_back({e.pair_id, e.preferred});
  return out;
}

AnnotationService::AnnotationService(AnnotationSession session, fs::path log_path)
    : session_(std::move(session)), log_path_(std::move(log_path)) {
  std::set<std::string> known;
  for (const auto& p : session_.pairs) known.insert(p.id);
  std::set<std::string> seen;
  for (auto& e : read_judgment_log(log_path_)) {
    if (known.count(e.pair_id) == 0) {
      throw LoadError(log_path_.string() + ": judgment for unknown pair '" + e.pair_id + "'");
    }
    if (!seen.insert(e.pair_id).second) {
      throw LoadError(log_path_.string() + ": repeated judgment for pair '" + e.pair_id + "'");
    }
    log_.push_back(std::move(e));
  }
}

std::optional<PairView> AnnotationService::next() const {
  std::lock_guard lock(mutex_);
  std::set<std::string> done;
  for (const auto& e : log_) done.insert(e.pair_id);
  for (std::size_t i = 0; i < session_.pairs.size(); ++i) {
    const auto& p = session_.pairs[i];
    if (done.count(p.id) != 0) continue;
    const bool gen_left = generated_on_left(session_.seed, p.id);
    return PairView{p.id, i, session_.pairs.size(), gen_left ? p.generated : p.ground_truth,
                    gen_left ? p.ground_truth : p.generated};
  }
  return std::nullopt;
}

SubmitResult AnnotationService::submit(const std::string& pair_id, const std::string& choice) {
  if (choice != "left" && choice != "right") throw InvalidValue("choice must be 'left' or 'right'");
  std::lock_guard lock(mutex_);
  const bool known = std::any_of(session_.pairs.begin(), session_.pairs.end(),
                                 [&](const AnnotationPair& p) { return p.id == pair_id; });
  if (!known) return {SubmitStatus::unknown_pair, std::nullopt};
  for (const auto& e : log_) {
    if (e.pair_id == pair_id) return {SubmitStatus::duplicate, e};
  }
  LoggedJudgment entry;
  entry.pair_id = pair_id;
  entry.choice = choice;
  const bool gen_left = generated_on_left(session_.seed, pair_id);
  entry.left = gen_left ? Preference::generated : Preference::ground_truth;
  entry.right = gen_left ? Preference::ground_truth : Preference::generated;
  entry.preferred = choice == "left" ? entry.left : entry.right;
  append(entry);
  log_.push_back(entry);
  return {SubmitStatus::accepted, entry};
}

void AnnotationService::append(const LoggedJudgment& entry) {
  if (log_path_.has_parent_path()) fs::create_directories(log_path_.parent_path());
  const std::string line = to_json(entry).dump() + "\n";
  std::FILE* f = std::fopen(log_path_.c_str(), "a");
  if (f == nullptr) throw Error("cannot append to " + log_path_.string());
  const bool ok = std::fwrite(line.data(), 1, line.size(), f) == line.size() && std::fflush(f) == 0 &&
                  ::fsync(::fileno(f)) == 0;
  std::fclose(f);
  if (!ok) throw Error("failed to write judgment to " + log_path_.string());
}

Progress AnnotationService::progress() const {
  std::lock_guard lock(mutex_);
  return {log_.size(), session_.pairs.size()};
}

std::optional<double> AnnotationService::tt_rate() const {
  std::lock_guard lock(mutex_);
  if (log_.empty()) return std::nullopt;
  return turing_rate(judgments_of(log_));
}

std::vector<LoggedJudgment> AnnotationService::log() const {
  std::lock_guard lock(mutex_);
  return log_;
}

struct AnnotationServer::Impl {
  Impl(AnnotationService& s, ServerOptions o) : service(s), options(std::move(o)) {}
  AnnotationService& service;
  ServerOptions options;
  httplib::Server server;
};

AnnotationServer::AnnotationServer(AnnotationService& service, ServerOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {
  auto& svr = impl_->server;
  auto& svc = impl_->service;

  svr.set_post_routing_handler([](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
  });
  svr.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  svr.Get("/api/session", [&svc](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, {{"instructions", svc.session().instructions}, {"total", svc.session().pairs.size()}});
  });
  svr.Get("/api/next", [&svc](const httplib::Request&, httplib::Response& res) {
    if (auto view = svc.next()) {
      reply(res, 200, view_json(*view, svc.session().instructions));
    } else {
      res.status = 204;
    }
  });
  svr.Post("/api/judgments", [&svc](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) return error(res, 400, "body must be a JSON object");
    if (!body.contains("pair_id") || !body["pair_id"].is_string() || !body.contains("choice") ||
        !body["choice"].is_string()) {
      return error(res, 400, "body needs string 'pair_id' and 'choice'");
    }
    SubmitResult result;
    try {
      result = svc.submit(body["pair_id"].get<std::string>(), body["choice"].get<std::string>());
    } catch (const InvalidValue& e) {
      return error(res, 400, e.what());
    }
    switch (result.status) {
      case SubmitStatus::unknown_pair:
        return error(res, 404, "unknown pair '" + body["pair_id"].get<std::string>() + "'");
      case SubmitStatus::duplicate:
        return error(res, 409, "pair '" + body["pair_id"].get<std::string>() + "' already judged");
      case SubmitStatus::accepted:
        reply(res, 201, {{"judgment", to_json(*result.entry)}, {"progress", progress_json(svc.progress())}});
    }
  });
  svr.Get("/api/progress", [&svc](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, progress_json(svc.progress()));
  });
  svr.Get("/api/tt-rate", [&svc](const httplib::Request&, httplib::Response& res) {
    const auto rate = svc.tt_rate();
    reply(res, 200, {{"tt_rate", rate ? nlohmann::json(*rate) : nlohmann::json(nullptr)},
                     {"judgments", svc.progress().completed}});
  });
  if (impl_->options.static_dir) {
    if (!svr.set_mount_point("/", impl_->options.static_dir->string())) {
      throw InvalidValue("static directory " + impl_->options.static_dir->string() + " does not exist");
    }
  }
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::start() {
  auto& svr = impl_->server;
  if (impl_->options.port == 0) {
    port_ = svr.bind_to_any_port(impl_->options.host);
  } else if (svr.bind_to_port(impl_->options.host, impl_->options.port)) {
    port_ = impl_->options.port;
  } else {
    port_ = -1;
  }
  if (port_ <= 0) throw Error("cannot bind " + impl_->options.host + ":" + std::to_string(impl_->options.port));
  thread_ = std::thread([&svr] { svr.listen_after_bind(); });
  svr.wait_until_ready();
  return port_;
}

void AnnotationServer::wait() {
  if (thread_.joinable()) thread_.join();
}

void AnnotationServer::interrupt() { impl_->server.stop(); }

void AnnotationServer::stop() {
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace todplay
