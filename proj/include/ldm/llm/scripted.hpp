#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ldm/error.hpp"
#include "ldm/llm/prompt.hpp"
#include "ldm/llm/rule_based.hpp"

namespace ldm::llm {

struct FixtureEntry {
  PromptKind kind = PromptKind::Action;
  std::string pattern;  // substring of the payload; empty matches anything
  std::string response;
};

enum class FallbackPolicy { Error, RuleBased };

struct ScriptedFixture {
  std::vector<FixtureEntry> entries;
  FallbackPolicy fallback = FallbackPolicy::Error;
};

inline std::vector<FixtureEntry> fixture_entries_from_json(const nlohmann::json& doc) {
  if (!doc.is_array()) fail(ErrorCode::ConfigError, "fixture document must be a JSON array");
  std::vector<FixtureEntry> entries;
  for (const auto& item : doc) {
    if (!item.is_object() || !item.contains("kind") || !item.contains("response"))
      fail(ErrorCode::ConfigError, "fixture entry needs 'kind' and 'response'");
    auto kind = prompt_kind_from_string(item.at("kind").get<std::string>());
    if (!kind) fail(ErrorCode::ConfigError, "unknown prompt kind in fixture: " + item.at("kind").get<std::string>());
    entries.push_back({*kind, item.value("pattern", std::string{}), item.at("response").get<std::string>()});
  }
  return entries;
}

inline ScriptedFixture load_fixture_file(const std::filesystem::path& path, FallbackPolicy fallback) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot read fixture file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ConfigError, "fixture file " + path.string() + ": " + e.what());
  }
  return {fixture_entries_from_json(doc), fallback};
}

/// Replays canned responses; first matching entry wins. Immutable after
/// construction, so one instance can serve many threads.
class ScriptedBackend final : public Backend {
 public:
  explicit ScriptedBackend(ScriptedFixture fixture) : fixture_(std::move(fixture)) {}

  LlmResponse complete(const LlmRequest& request) override {
    auto start = std::chrono::steady_clock::now();
    for (const auto& entry : fixture_.entries) {
      if (entry.kind == request.kind && request.payload.find(entry.pattern) != std::string::npos)
        return {entry.response, id(), std::chrono::steady_clock::now() - start};
    }
    if (fixture_.fallback == FallbackPolicy::Error)
      fail(ErrorCode::NoFixtureMatch, "no fixture entry for " + std::string(to_string(request.kind)) + " request");
    return {rules::respond(request), id(), std::chrono::steady_clock::now() - start};
  }

  std::string id() const override { return "scripted"; }

  const ScriptedFixture& fixture() const { return fixture_; }

 private:
  ScriptedFixture fixture_;
};

}  // namespace ldm::llm
