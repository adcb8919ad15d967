#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace topoxpert {

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;
};

struct CompletionRequest {
  std::vector<ChatMessage> messages;
  std::string model;
  int max_output_chars = 0;  // 0 = unlimited
  std::optional<uint64_t> seed;
};

enum class ClientErrorKind {
  Transport,
  RateLimited,
  AuthFailed,
  BadResponse,
  ScriptExhausted,
  CassetteMiss,
};

struct ClientError {
  ClientErrorKind kind;
  std::string detail;
  bool retryable = false;
};

ClientError make_client_error(ClientErrorKind kind, std::string detail);

using CompletionResult = std::variant<std::string, ClientError>;

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual CompletionResult complete(const CompletionRequest& request) = 0;
};

// Pops queued responses in call order; thread-safe.
class ScriptedClient : public ChatClient {
 public:
  explicit ScriptedClient(std::vector<std::string> responses);
  CompletionResult complete(const CompletionRequest& request) override;

 private:
  std::mutex mu_;
  std::deque<std::string> queue_;
};

struct HttpClientConfig {
  std::string base_url;   // e.g. https://api.example.com/v1
  std::string api_key;
  std::string model = "gpt-4o";
  int max_attempts = 5;
  int backoff_base_ms = 1000;
  int backoff_cap_ms = 60000;
  uint64_t jitter_seed = 0;  // 0 = derive from the request

  // Env vars: TOPOXPERT_API_KEY, TOPOXPERT_API_BASE, TOPOXPERT_MODEL.
  static HttpClientConfig from_env();
};

// POSTs a chat-completion JSON body to <base>/chat/completions and reads
// choices[0].message.content. Retries retryable errors with exponential
// backoff (base 1s, factor 2, max 5 attempts, full jitter, 60s cap).
class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(HttpClientConfig config);
  CompletionResult complete(const CompletionRequest& request) override;

 private:
  HttpClientConfig config_;
};

// Hash key over normalized messages (trailing whitespace trimmed per line)
// and the model name; whitespace-only prompt churn keeps recordings valid.
uint64_t request_key(const CompletionRequest& request);
std::string request_digest(const CompletionRequest& request);

enum class CassetteMode { Record, Replay };

// Record mode persists request-key -> response pairs to a JSON-lines
// cassette; replay mode serves them with no network and errors on a miss.
class RecordReplayClient : public ChatClient {
 public:
  RecordReplayClient(ChatClient* inner, std::filesystem::path cassette, CassetteMode mode);
  CompletionResult complete(const CompletionRequest& request) override;

 private:
  ChatClient* inner_;
  std::filesystem::path cassette_;
  CassetteMode mode_;
  std::mutex mu_;
  std::map<uint64_t, std::string> cache_;
};

}  // namespace topoxpert
