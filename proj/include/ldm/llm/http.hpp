#pragma once

// Chat-completions client. Requests are sent as a single user message and
// the reply is choices[0].message.content.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <regex>
#include <semaphore>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ldm/error.hpp"
#include "ldm/llm/prompt.hpp"
#include "ldm/text.hpp"

namespace ldm::llm {

struct HttpBackendConfig {
  std::string endpoint_url = "https://api.openai.com/v1/chat/completions";
  std::string model_name = "gpt-3.5-turbo";
  std::string api_key_env = "OPENAI_API_KEY";  // empty: send no Authorization header
  double temperature = 0.0;
  int max_inflight = 4;
  int retry_limit = 3;
  int timeout_seconds = 60;
  int backoff_initial_ms = 500;

  void validate() const {
    if (!(temperature >= 0.0 && temperature <= 2.0)) fail(ErrorCode::ConfigError, "temperature must be in [0,2]");
    if (max_inflight < 1 || max_inflight > 1024) fail(ErrorCode::ConfigError, "max_inflight must be in [1,1024]");
    if (retry_limit < 0) fail(ErrorCode::ConfigError, "retry_limit must be nonnegative");
    if (timeout_seconds < 1) fail(ErrorCode::ConfigError, "timeout_seconds must be positive");
    if (backoff_initial_ms < 0) fail(ErrorCode::ConfigError, "backoff_initial_ms must be nonnegative");
  }
};

inline void to_json(nlohmann::json& j, const HttpBackendConfig& c) {
  j = {{"endpoint_url", c.endpoint_url}, {"model_name", c.model_name},     {"api_key_env", c.api_key_env},
       {"temperature", c.temperature},   {"max_inflight", c.max_inflight}, {"retry_limit", c.retry_limit},
       {"timeout_seconds", c.timeout_seconds}, {"backoff_initial_ms", c.backoff_initial_ms}};
}

inline void from_json(const nlohmann::json& j, HttpBackendConfig& c) {
  c.endpoint_url = j.value("endpoint_url", c.endpoint_url);
  c.model_name = j.value("model_name", c.model_name);
  c.api_key_env = j.value("api_key_env", c.api_key_env);
  c.temperature = j.value("temperature", c.temperature);
  c.max_inflight = j.value("max_inflight", c.max_inflight);
  c.retry_limit = j.value("retry_limit", c.retry_limit);
  c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
  c.backoff_initial_ms = j.value("backoff_initial_ms", c.backoff_initial_ms);
}

class HttpBackend final : public Backend {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit HttpBackend(HttpBackendConfig config, Sleeper sleeper = default_sleeper())
      : config_(std::move(config)), sleeper_(std::move(sleeper)), slots_(std::clamp(config_.max_inflight, 0, 1024)) {
    config_.validate();
    static const std::regex url_re(R"(^(https?)://([^/]+)(/.*)?$)", std::regex::icase);
    std::smatch m;
    if (!std::regex_match(config_.endpoint_url, m, url_re))
      fail(ErrorCode::ConfigError, "endpoint_url must look like http(s)://host[:port]/path");
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (text::iequals(m[1].str(), "https")) fail(ErrorCode::ConfigError, "this build has no TLS support; use an http endpoint");
#endif
    origin_ = m[1].str() + "://" + m[2].str();
    path_ = m[3].matched ? m[3].str() : "/";
    if (!config_.api_key_env.empty()) {
      const char* key = std::getenv(config_.api_key_env.c_str());
      if (!key || !*key) fail(ErrorCode::ConfigError, "environment variable " + config_.api_key_env + " is not set");
      api_key_ = key;
    }
  }

  LlmResponse complete(const LlmRequest& request) override {
    slots_.acquire();
    struct Release {
      std::counting_semaphore<1024>& s;
      ~Release() { s.release(); }
    } release{slots_};

    auto start = std::chrono::steady_clock::now();
    nlohmann::json body = {{"model", config_.model_name},
                           {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.full_text()}}})},
                           {"temperature", config_.temperature},
                           {"max_tokens", request.budget}};
    auto payload = body.dump();

    for (int attempt = 0;; ++attempt) {
      ErrorCode code = ErrorCode::TransportError;
      std::string detail;
      {
        httplib::Client client(origin_);
        client.set_connection_timeout(config_.timeout_seconds, 0);
        client.set_read_timeout(config_.timeout_seconds, 0);
        client.set_write_timeout(config_.timeout_seconds, 0);
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
        auto res = client.Post(path_, headers, payload, "application/json");
        if (!res) {
          detail = "request failed: " + httplib::to_string(res.error());
        } else if (res->status == 200) {
          return {extract_content(res->body), id(), std::chrono::steady_clock::now() - start};
        } else if (res->status == 429) {
          code = ErrorCode::RateLimited;
          detail = "rate limited (HTTP 429)";
        } else if (res->status >= 500) {
          detail = "server error (HTTP " + std::to_string(res->status) + ")";
        } else {
          fail(ErrorCode::BackendError, "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 300));
        }
      }
      if (attempt >= config_.retry_limit) fail(code, detail + " after " + std::to_string(attempt + 1) + " attempts");
      sleeper_(std::chrono::milliseconds(static_cast<long long>(config_.backoff_initial_ms) << std::min(attempt, 16)));
    }
  }

  std::string id() const override { return "http:" + config_.model_name; }

  const HttpBackendConfig& config() const { return config_; }

 private:
  static Sleeper default_sleeper() {
    return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }

  static std::string extract_content(const std::string& body) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::BackendError, std::string("response is not JSON: ") + e.what());
    }
    if (!doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty())
      fail(ErrorCode::BackendError, "response has no choices");
    const auto& choice = doc["choices"][0];
    if (!choice.contains("message") || !choice["message"].contains("content") || !choice["message"]["content"].is_string())
      fail(ErrorCode::EmptyResponse, "response has no message content");
    auto text_out = choice["message"]["content"].get<std::string>();
    if (text::trim(text_out).empty()) fail(ErrorCode::EmptyResponse, "model returned an empty message");
    return text_out;
  }

  HttpBackendConfig config_;
  Sleeper sleeper_;
  std::counting_semaphore<1024> slots_;
  std::string origin_;
  std::string path_;
  std::string api_key_;
};

}  // namespace ldm::llm
