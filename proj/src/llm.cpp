#include "topoxpert/llm.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "topoxpert/error.hpp"
#include "httplib.h"
#include "json.hpp"

namespace topoxpert {

namespace {

using nlohmann::json;

std::string trim_trailing_per_line(const std::string& text) {
  std::ostringstream out;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r'))
      line.pop_back();
    if (!first) out << "\n";
    out << line;
    first = false;
  }
  return out.str();
}

uint64_t fnv1a64(const std::string& data, uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

ClientError make_client_error(ClientErrorKind kind, std::string detail) {
  bool retryable = kind == ClientErrorKind::Transport || kind == ClientErrorKind::RateLimited;
  return {kind, std::move(detail), retryable};
}

ScriptedClient::ScriptedClient(std::vector<std::string> responses)
    : queue_(responses.begin(), responses.end()) {}

CompletionResult ScriptedClient::complete(const CompletionRequest&) {
  std::lock_guard<std::mutex> lock(mu_);
  if (queue_.empty()) {
    return make_client_error(ClientErrorKind::ScriptExhausted, "script queue is empty");
  }
  std::string next = std::move(queue_.front());
  queue_.pop_front();
  return next;
}

HttpClientConfig HttpClientConfig::from_env() {
  HttpClientConfig cfg;
  if (const char* v = std::getenv("TOPOXPERT_API_KEY")) cfg.api_key = v;
  if (const char* v = std::getenv("TOPOXPERT_API_BASE")) cfg.base_url = v;
  if (const char* v = std::getenv("TOPOXPERT_MODEL")) cfg.model = v;
  return cfg;
}

HttpChatClient::HttpChatClient(HttpClientConfig config) : config_(std::move(config)) {}

CompletionResult HttpChatClient::complete(const CompletionRequest& request) {
  if (config_.api_key.empty()) {
    return ClientError{ClientErrorKind::AuthFailed, "no API key configured", false};
  }
  if (config_.base_url.empty()) {
    return ClientError{ClientErrorKind::BadResponse, "no API base URL configured", false};
  }

  // Split base_url into host part and path prefix.
  std::string url = config_.base_url;
  std::string scheme_host = url;
  std::string path_prefix;
  size_t scheme = url.find("://");
  size_t path_start = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (path_start != std::string::npos) {
    scheme_host = url.substr(0, path_start);
    path_prefix = url.substr(path_start);
    while (!path_prefix.empty() && path_prefix.back() == '/') path_prefix.pop_back();
  }

  json body;
  body["model"] = request.model.empty() ? config_.model : request.model;
  body["messages"] = json::array();
  for (const auto& m : request.messages) {
    body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  }
  if (request.seed) body["seed"] = *request.seed;
  std::string payload = body.dump();

  std::mt19937_64 jitter(config_.jitter_seed ? config_.jitter_seed : request_key(request));
  ClientError last = make_client_error(ClientErrorKind::Transport, "no attempt made");

  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    if (attempt > 1) {
      // Full jitter: sleep uniform in [0, base * 2^(attempt-2)], capped.
      double cap_ms = config_.backoff_base_ms * std::pow(2.0, attempt - 2);
      cap_ms = std::min(cap_ms, static_cast<double>(config_.backoff_cap_ms));
      uint64_t sleep_ms = cap_ms <= 0 ? 0 : jitter() % (static_cast<uint64_t>(cap_ms) + 1);
      std::this_thread::sleep_for(std::chrono::milliseconds(sleep_ms));
    }

    httplib::Client cli(scheme_host);
    cli.set_connection_timeout(30);
    cli.set_read_timeout(120);
    httplib::Headers headers = {{"Authorization", "Bearer " + config_.api_key}};
    auto res = cli.Post(path_prefix + "/chat/completions", headers, payload, "application/json");

    if (!res) {
      last = make_client_error(ClientErrorKind::Transport,
                               "transport failure: " + httplib::to_string(res.error()));
      continue;
    }
    if (res->status == 429) {
      last = make_client_error(ClientErrorKind::RateLimited, "HTTP 429");
      continue;
    }
    if (res->status == 401 || res->status == 403) {
      return ClientError{ClientErrorKind::AuthFailed, "HTTP " + std::to_string(res->status),
                         false};
    }
    if (res->status >= 500) {
      last = make_client_error(ClientErrorKind::Transport,
                               "HTTP " + std::to_string(res->status));
      continue;
    }
    if (res->status != 200) {
      return ClientError{ClientErrorKind::BadResponse,
                         "HTTP " + std::to_string(res->status) + ": " + res->body, false};
    }
    try {
      json j = json::parse(res->body);
      std::string content = j.at("choices").at(0).at("message").at("content").get<std::string>();
      if (request.max_output_chars > 0 &&
          content.size() > static_cast<size_t>(request.max_output_chars)) {
        content.resize(request.max_output_chars);
      }
      return content;
    } catch (const json::exception& e) {
      return ClientError{ClientErrorKind::BadResponse,
                         std::string("malformed completion body: ") + e.what(), false};
    }
  }
  return last;
}

uint64_t request_key(const CompletionRequest& request) {
  uint64_t h = fnv1a64(request.model);
  for (const auto& m : request.messages) {
    h = fnv1a64("\x1e" + m.role + "\x1f" + trim_trailing_per_line(m.content), h);
  }
  return h;
}

std::string request_digest(const CompletionRequest& request) {
  std::ostringstream out;
  out << request.model;
  for (const auto& m : request.messages) {
    out << " | " << m.role << ":" << m.content.size() << "ch";
  }
  return out.str();
}

RecordReplayClient::RecordReplayClient(ChatClient* inner, std::filesystem::path cassette,
                                       CassetteMode mode)
    : inner_(inner), cassette_(std::move(cassette)), mode_(mode) {
  std::ifstream in(cassette_, std::ios::binary);
  if (!in) {
    if (mode_ == CassetteMode::Replay) {
      throw Error("IoError", "cannot read cassette " + cassette_.string());
    }
    return;
  }
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      uint64_t key = std::stoull(j.at("key_hash").get<std::string>(), nullptr, 16);
      cache_[key] = j.at("response_text").get<std::string>();
    } catch (const std::exception& e) {
      throw Error("SchemaError",
                  "cassette line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

CompletionResult RecordReplayClient::complete(const CompletionRequest& request) {
  uint64_t key = request_key(request);
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  if (mode_ == CassetteMode::Replay) {
    return ClientError{ClientErrorKind::CassetteMiss,
                       "no recording for request " + request_digest(request), false};
  }
  if (!inner_) {
    return ClientError{ClientErrorKind::BadResponse, "record mode needs an inner client",
                       false};
  }
  CompletionResult result = inner_->complete(request);
  if (std::holds_alternative<std::string>(result)) {
    std::lock_guard<std::mutex> lock(mu_);
    cache_[key] = std::get<std::string>(result);
    std::ofstream out(cassette_, std::ios::binary | std::ios::app);
    if (!out) throw Error("IoError", "cannot write cassette " + cassette_.string());
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(key));
    json j;
    j["key_hash"] = std::string(buf);
    j["request_digest"] = request_digest(request);
    j["response_text"] = std::get<std::string>(result);
    out << j.dump() << "\n";
  }
  return result;
}

}  // namespace topoxpert
