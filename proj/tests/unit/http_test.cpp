#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <deque>
#include <mutex>
#include <thread>

#include <ldm.hpp>

using namespace ldm;
using namespace ldm::llm;
using namespace std::chrono_literals;

namespace {

/// Local chat-completions stand-in. Replies are popped from a queue; when it
/// is empty every request gets `fallback`.
class FakeServer {
 public:
  struct Reply {
    int status = 200;
    std::string body;
  };

  FakeServer() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      int now = ++inflight_;
      {
        std::lock_guard lock(mu_);
        peak_ = std::max(peak_, now);
        bodies_.push_back(req.body);
        auth_.push_back(req.get_header_value("Authorization"));
      }
      if (delay_.count() > 0) std::this_thread::sleep_for(delay_);
      Reply r;
      {
        std::lock_guard lock(mu_);
        if (!replies_.empty()) {
          r = replies_.front();
          replies_.pop_front();
        } else {
          r = fallback_;
        }
      }
      res.status = r.status;
      res.set_content(r.body, "application/json");
      --inflight_;
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }

  static std::string content(const std::string& text) {
    return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}}.dump();
  }

  void queue(Reply r) {
    std::lock_guard lock(mu_);
    replies_.push_back(std::move(r));
  }
  void set_fallback(Reply r) { fallback_ = std::move(r); }
  void set_delay(std::chrono::milliseconds d) { delay_ = d; }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }
  std::vector<std::string> bodies() {
    std::lock_guard lock(mu_);
    return bodies_;
  }
  std::vector<std::string> auth() {
    std::lock_guard lock(mu_);
    return auth_;
  }
  int peak() {
    std::lock_guard lock(mu_);
    return peak_;
  }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mu_;
  std::deque<Reply> replies_;
  Reply fallback_{200, content("ok")};
  std::chrono::milliseconds delay_{0};
  std::atomic<int> inflight_{0};
  int peak_ = 0;
  std::vector<std::string> bodies_, auth_;
};

HttpBackendConfig config_for(const FakeServer& server) {
  HttpBackendConfig c;
  c.endpoint_url = server.url();
  c.model_name = "test-model";
  c.api_key_env = "";
  c.timeout_seconds = 5;
  c.backoff_initial_ms = 100;
  return c;
}

struct SleepLog {
  std::vector<long long> ms;
  HttpBackend::Sleeper sleeper() {
    return [this](std::chrono::milliseconds d) { ms.push_back(d.count()); };
  }
};

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an ldm::Error";
  return ErrorCode::BackendError;
}

}  // namespace

TEST(HttpBackend, ReturnsMessageContent) {
  FakeServer server;
  server.queue({200, FakeServer::content("Summary: went to fridge 1.")});
  SleepLog sleeps;
  HttpBackend backend(config_for(server), sleeps.sleeper());
  auto r = backend.complete(make_request(PromptKind::Summarization, "Goal: x"));
  EXPECT_EQ(r.raw, "Summary: went to fridge 1.");
  EXPECT_EQ(r.backend_id, "http:test-model");
  EXPECT_TRUE(sleeps.ms.empty());

  auto body = nlohmann::json::parse(server.bodies().at(0));
  EXPECT_EQ(body["model"], "test-model");
  EXPECT_EQ(body["temperature"], 0.0);
  EXPECT_EQ(body["max_tokens"], default_budget(PromptKind::Summarization));
  ASSERT_EQ(body["messages"].size(), 1u);
  EXPECT_EQ(body["messages"][0]["content"], make_request(PromptKind::Summarization, "Goal: x").full_text());
  EXPECT_EQ(server.auth().at(0), "");
}

TEST(HttpBackend, RateLimitThenSuccessBacksOffExponentially) {
  FakeServer server;
  server.queue({429, "{}"});
  server.queue({429, "{}"});
  server.queue({200, FakeServer::content("fine")});
  SleepLog sleeps;
  HttpBackend backend(config_for(server), sleeps.sleeper());
  EXPECT_EQ(backend.complete(make_request(PromptKind::Action, "p")).raw, "fine");
  EXPECT_EQ(sleeps.ms, (std::vector<long long>{100, 200}));
  EXPECT_EQ(server.bodies().size(), 3u);
}

TEST(HttpBackend, ServerErrorsExhaustRetries) {
  FakeServer server;
  server.set_fallback({503, "unavailable"});
  SleepLog sleeps;
  auto config = config_for(server);
  config.retry_limit = 2;
  HttpBackend backend(config, sleeps.sleeper());
  EXPECT_EQ(code_of([&] { backend.complete(make_request(PromptKind::Action, "p")); }), ErrorCode::TransportError);
  EXPECT_EQ(server.bodies().size(), 3u);
  EXPECT_EQ(sleeps.ms, (std::vector<long long>{100, 200}));
}

TEST(HttpBackend, PersistentRateLimitIsRateLimited) {
  FakeServer server;
  server.set_fallback({429, "{}"});
  SleepLog sleeps;
  auto config = config_for(server);
  config.retry_limit = 1;
  HttpBackend backend(config, sleeps.sleeper());
  EXPECT_EQ(code_of([&] { backend.complete(make_request(PromptKind::Action, "p")); }), ErrorCode::RateLimited);
}

TEST(HttpBackend, ClientErrorIsNotRetried) {
  FakeServer server;
  server.set_fallback({400, R"({"error": "bad"})"});
  SleepLog sleeps;
  HttpBackend backend(config_for(server), sleeps.sleeper());
  EXPECT_EQ(code_of([&] { backend.complete(make_request(PromptKind::Action, "p")); }), ErrorCode::BackendError);
  EXPECT_EQ(server.bodies().size(), 1u);
  EXPECT_TRUE(sleeps.ms.empty());
}

TEST(HttpBackend, EmptyContentIsEmptyResponse) {
  FakeServer server;
  server.queue({200, FakeServer::content("   ")});
  server.queue({200, R"({"choices": [{"message": {"role": "assistant"}}]})"});
  HttpBackend backend(config_for(server), SleepLog{}.sleeper());
  EXPECT_EQ(code_of([&] { backend.complete(make_request(PromptKind::Action, "p")); }), ErrorCode::EmptyResponse);
  EXPECT_EQ(code_of([&] { backend.complete(make_request(PromptKind::Action, "p")); }), ErrorCode::EmptyResponse);
}

TEST(HttpBackend, UnreachableHostIsTransportError) {
  HttpBackendConfig c;
  c.endpoint_url = "http://127.0.0.1:1/v1/chat/completions";
  c.api_key_env = "";
  c.retry_limit = 1;
  c.timeout_seconds = 2;
  SleepLog sleeps;
  HttpBackend backend(c, sleeps.sleeper());
  EXPECT_EQ(code_of([&] { backend.complete(make_request(PromptKind::Action, "p")); }), ErrorCode::TransportError);
  EXPECT_EQ(sleeps.ms.size(), 1u);
}

TEST(HttpBackend, ApiKeyFromEnvironment) {
  FakeServer server;
  ::setenv("LDM_TEST_KEY", "sekrit", 1);
  auto config = config_for(server);
  config.api_key_env = "LDM_TEST_KEY";
  HttpBackend backend(config, SleepLog{}.sleeper());
  backend.complete(make_request(PromptKind::Action, "p"));
  EXPECT_EQ(server.auth().at(0), "Bearer sekrit");
  ::unsetenv("LDM_TEST_KEY");
}

TEST(HttpBackend, ConfigErrors) {
  HttpBackendConfig c;
  c.endpoint_url = "http://127.0.0.1:9/x";
  c.api_key_env = "LDM_TEST_DEFINITELY_UNSET";
  ::unsetenv("LDM_TEST_DEFINITELY_UNSET");
  EXPECT_EQ(code_of([&] { HttpBackend b(c); }), ErrorCode::ConfigError);

  c.api_key_env = "";
  c.endpoint_url = "not a url";
  EXPECT_EQ(code_of([&] { HttpBackend b(c); }), ErrorCode::ConfigError);

  c.endpoint_url = "http://127.0.0.1:9/x";
  c.max_inflight = 0;
  EXPECT_EQ(code_of([&] { HttpBackend b(c); }), ErrorCode::ConfigError);
  c.max_inflight = 1;
  c.temperature = -1;
  EXPECT_EQ(code_of([&] { HttpBackend b(c); }), ErrorCode::ConfigError);
}

TEST(HttpBackend, InflightRequestsAreBounded) {
  FakeServer server;
  server.set_delay(50ms);
  auto config = config_for(server);
  config.max_inflight = 2;
  HttpBackend backend(config, SleepLog{}.sleeper());
  std::vector<std::thread> threads;
  for (int i = 0; i < 6; ++i)
    threads.emplace_back([&] { backend.complete(make_request(PromptKind::Action, "p")); });
  for (auto& t : threads) t.join();
  EXPECT_EQ(server.bodies().size(), 6u);
  EXPECT_LE(server.peak(), 2);
  EXPECT_GE(server.peak(), 1);
}
