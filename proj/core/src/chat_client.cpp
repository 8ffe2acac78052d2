#include "todplay/chat_client.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "todplay/cost_model.hpp"

namespace todplay {

EndpointConfig EndpointConfig::from_json(const nlohmann::json& j) {
  EndpointConfig c;
  if (!j.is_object()) throw InvalidValue("endpoint must be an object");
  if (!j.contains("base_url") || !j["base_url"].is_string()) {
    throw InvalidValue("endpoint.base_url is required");
  }
  c.base_url = j["base_url"].get<std::string>();
  c.path = j.value("path", c.path);
  c.model = j.value("model", c.model);
  c.api_key_env = j.value("api_key_env", c.api_key_env);
  c.max_retries = j.value("max_retries", c.max_retries);
  c.backoff = std::chrono::milliseconds(j.value("backoff_ms", static_cast<std::int64_t>(c.backoff.count())));
  c.timeout = std::chrono::seconds(j.value("timeout_s", static_cast<std::int64_t>(c.timeout.count())));
  c.max_context_tokens = j.value("max_context_tokens", c.max_context_tokens);
  c.tokenizer = j.value("tokenizer", c.tokenizer);
  c.send_tools = j.value("send_tools", c.send_tools);
  if (c.max_retries < 0) throw InvalidValue("endpoint.max_retries must be >= 0");
  return c;
}

HttpLibTransport::HttpLibTransport(std::string base_url, std::chrono::seconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {}

HttpResponse HttpLibTransport::post(const std::string& path, const std::string& body,
                                    const std::map<std::string, std::string>& headers) {
  httplib::Client client(base_url_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  auto res = client.Post(path, h, body, "application/json");
  if (!res) throw TransportError("POST " + base_url_ + path + ": " + httplib::to_string(res.error()));
  return {res->status, res->body};
}

nlohmann::json build_chat_request(const EndpointConfig& config, const PlayerContext& context) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : context.history) messages.push_back(to_json(m));
  nlohmann::json body = {{"model", config.model},
                         {"messages", messages},
                         {"temperature", context.generation.temperature},
                         {"max_tokens", context.generation.max_new_tokens}};
  if (config.send_tools && context.tools.is_array() && !context.tools.empty()) {
    body["tools"] = context.tools;
  }
  return body;
}

std::string parse_chat_response(const std::string& body) {
  auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw MalformedResponseError("response is not a JSON object");
  if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
    throw MalformedResponseError("response has no choices");
  }
  const auto& choice = j["choices"][0];
  if (!choice.is_object() || !choice.contains("message") || !choice["message"].is_object()) {
    throw MalformedResponseError("first choice has no message");
  }
  const auto& message = choice["message"];
  if (message.contains("tool_calls") && message["tool_calls"].is_array() &&
      !message["tool_calls"].empty()) {
    nlohmann::json calls = nlohmann::json::array();
    for (const auto& tc : message["tool_calls"]) {
      const auto& fn = tc.contains("function") ? tc["function"] : tc;
      if (!fn.is_object() || !fn.contains("name")) throw MalformedResponseError("tool call has no name");
      calls.push_back({{"name", fn["name"]}, {"arguments", fn.value("arguments", nlohmann::json::object())}});
    }
    return calls.size() == 1 ? calls[0].dump() : calls.dump();
  }
  if (!message.contains("content") || !message["content"].is_string()) {
    throw MalformedResponseError("message has neither content nor tool_calls");
  }
  return message["content"].get<std::string>();
}

std::string remote_chat(const EndpointConfig& config, const PlayerContext& context,
                        ChatTransport& transport) {
  check_context(context);
  if (config.max_context_tokens > 0) {
    std::int64_t tokens = 0;
    for (const auto& m : context.history) tokens += count_tokens(m.content, config.tokenizer);
    if (tokens > config.max_context_tokens) {
      throw ContextOverflowError("context has " + std::to_string(tokens) + " tokens, limit is " +
                                 std::to_string(config.max_context_tokens));
    }
  }
  std::map<std::string, std::string> headers;
  if (!config.api_key_env.empty()) {
    const char* key = std::getenv(config.api_key_env.c_str());
    if (key == nullptr) throw Error("environment variable " + config.api_key_env + " is not set");
    headers["Authorization"] = std::string("Bearer ") + key;
  }
  const std::string body = build_chat_request(config, context).dump();

  auto delay = config.backoff;
  std::string last_error;
  for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    HttpResponse res;
    try {
      res = transport.post(config.path, body, headers);
    } catch (const TransportError& e) {
      last_error = e.what();
      continue;
    }
    if (res.status >= 200 && res.status < 300) return parse_chat_response(res.body);
    last_error = "HTTP " + std::to_string(res.status);
    if (res.status != 429 && res.status < 500) {
      throw TransportError(last_error + ": " + res.body.substr(0, 200));
    }
  }
  throw TransportError("giving up after " + std::to_string(config.max_retries + 1) +
                       " attempts: " + last_error);
}

RemotePlayer::RemotePlayer(EndpointConfig config, std::shared_ptr<ChatTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
  if (!transport_) transport_ = std::make_shared<HttpLibTransport>(config_.base_url, config_.timeout);
}

std::string RemotePlayer::respond(const PlayerContext& context) {
  return remote_chat(config_, context, *transport_);
}

}  // namespace todplay
