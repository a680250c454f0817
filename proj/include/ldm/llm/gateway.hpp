#pragma once

#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "ldm/error.hpp"
#include "ldm/llm/prompt.hpp"

namespace ldm::llm {

/// Sends one prompt and parses the reply. A reply that violates the format
/// is requested once more with a reminder appended; a second violation
/// propagates.
template <class Parser>
auto ask(Backend& backend, PromptKind kind, const std::string& payload, Parser&& parse) {
  auto request = make_request(kind, payload);
  try {
    return parse(backend.complete(request).raw);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::FormatViolation) throw;
  }
  request.payload += kFormatReminder;
  return parse(backend.complete(request).raw);
}

/// Raw text variant, for prompts without a grammar.
inline std::string ask_text(Backend& backend, PromptKind kind, const std::string& payload) {
  return backend.complete(make_request(kind, payload)).raw;
}

/// Decorator that keeps every request, for inspection in tests and traces.
class RecordingBackend final : public Backend {
 public:
  explicit RecordingBackend(Backend& inner) : inner_(inner) {}

  LlmResponse complete(const LlmRequest& request) override {
    {
      std::lock_guard lock(mutex_);
      requests_.push_back(request);
    }
    return inner_.complete(request);
  }

  std::string id() const override { return inner_.id(); }

  std::vector<LlmRequest> requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
  }

  std::size_t count(PromptKind kind) const {
    std::lock_guard lock(mutex_);
    std::size_t n = 0;
    for (const auto& r : requests_) n += r.kind == kind;
    return n;
  }

 private:
  Backend& inner_;
  mutable std::mutex mutex_;
  std::vector<LlmRequest> requests_;
};

}  // namespace ldm::llm
