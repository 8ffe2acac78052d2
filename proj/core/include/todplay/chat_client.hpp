#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "todplay/players.hpp"

namespace todplay {

class TransportError : public Error {
 public:
  using Error::Error;
};

class MalformedResponseError : public Error {
 public:
  using Error::Error;
};

class ContextOverflowError : public Error {
 public:
  using Error::Error;
};

struct EndpointConfig {
  std::string base_url;  // scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_key_env;  // name of the variable holding the bearer token; empty for none
  int max_retries = 2;
  std::chrono::milliseconds backoff{500};  // doubled after every failed attempt
  std::chrono::seconds timeout{120};
  std::int64_t max_context_tokens = 0;  // 0 disables the check
  std::string tokenizer = "whitespace";
  bool send_tools = true;

  static EndpointConfig from_json(const nlohmann::json& j);
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  /// Throws TransportError when no HTTP response was obtained.
  virtual HttpResponse post(const std::string& path, const std::string& body,
                            const std::map<std::string, std::string>& headers) = 0;
};

class HttpLibTransport : public ChatTransport {
 public:
  HttpLibTransport(std::string base_url, std::chrono::seconds timeout);
  HttpResponse post(const std::string& path, const std::string& body,
                    const std::map<std::string, std::string>& headers) override;

 private:
  std::string base_url_;
  std::chrono::seconds timeout_;
};

/// Chat-completions request body for the context.
nlohmann::json build_chat_request(const EndpointConfig& config, const PlayerContext& context);

/// Assistant text from a chat-completions response. Native tool calls are
/// rendered as {"name","arguments"} JSON (an array when there are several).
std::string parse_chat_response(const std::string& body);

/// One completion with retries on transport failures, 429 and 5xx.
std::string remote_chat(const EndpointConfig& config, const PlayerContext& context,
                        ChatTransport& transport);

class RemotePlayer : public Player {
 public:
  RemotePlayer(EndpointConfig config, std::shared_ptr<ChatTransport> transport);
  std::string respond(const PlayerContext& context) override;

 private:
  EndpointConfig config_;
  std::shared_ptr<ChatTransport> transport_;
};

}  // namespace todplay
