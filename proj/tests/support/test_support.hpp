#pragma once

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <ldm.hpp>

namespace ldm::support {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "ldm") {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

/// Relative path -> bytes for every regular file under `dir`.
inline std::map<std::string, std::string> snapshot_files(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file()) out[fs::relative(entry.path(), dir).string()] = io::read_file(entry.path());
  return out;
}

inline llm::ScriptedBackend rule_based() { return llm::ScriptedBackend({{}, llm::FallbackPolicy::RuleBased}); }

inline llm::ScriptedBackend scripted(std::vector<llm::FixtureEntry> entries,
                                     llm::FallbackPolicy fallback = llm::FallbackPolicy::Error) {
  return llm::ScriptedBackend({std::move(entries), fallback});
}

/// Backend answering from a function, for tests that need to count or vary replies.
class FunctionBackend final : public llm::Backend {
 public:
  using Fn = std::function<std::string(const llm::LlmRequest&)>;
  explicit FunctionBackend(Fn fn) : fn_(std::move(fn)) {}
  llm::LlmResponse complete(const llm::LlmRequest& request) override { return {fn_(request), "function", {}}; }
  std::string id() const override { return "function"; }

 private:
  Fn fn_;
};

inline memory::MemorySet house_memory(std::size_t trajectories, std::size_t batch_size, std::uint64_t seed = 11,
                                      double noise = 0.3) {
  auto backend = rule_based();
  auto trajs = env::generate_house_experts(trajectories, seed, noise);
  formation::FormationConfig config;
  config.batch_size = batch_size;
  auto set = formation::form_memory(backend, trajs, config);
  set.environment = "toyhouse";
  set.seed = seed;
  return set;
}

// --- Oracles ---------------------------------------------------------------------
// Written against the stated definitions only; they do not call the code
// they check.

/// Number of batches when N items are cut into batches of B (last may be short).
inline std::size_t batch_count_oracle(std::size_t n, std::size_t b) { return n / b + (n % b != 0); }

/// Fraction of requirements met: attributes present, options chosen, price under ceiling.
inline double shop_reward_oracle(const std::vector<std::string>& wanted_attributes,
                                 const std::vector<std::pair<std::string, std::string>>& wanted_options,
                                 long long ceiling_cents, const env::Product& product,
                                 const std::map<std::string, std::string>& chosen) {
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
  };
  int hits = 0;
  int total = static_cast<int>(wanted_attributes.size() + wanted_options.size()) + 1;
  for (const auto& a : wanted_attributes)
    for (const auto& have : product.attributes)
      if (lower(a) == lower(have)) {
        ++hits;
        break;
      }
  for (const auto& [group, value] : wanted_options) {
    auto it = chosen.find(lower(group));
    if (it != chosen.end() && lower(it->second) == lower(value)) ++hits;
  }
  if (product.price_cents <= ceiling_cents) ++hits;
  return static_cast<double>(hits) / total;
}

/// Best terminal reward over every admissible action sequence of length
/// at most `depth`, by exhaustive depth-first search from the current state.
inline double brute_force_best(env::Environment& environment, std::size_t depth, std::size_t* leaves = nullptr) {
  double best = 0.0;
  std::function<void(std::size_t)> dfs = [&](std::size_t left) {
    if (left == 0) return;
    auto here = environment.snapshot();
    for (const auto& action : environment.admissible_actions()) {
      auto out = environment.step(action);
      if (out.accepted) {
        if (out.done) {
          best = std::max(best, out.reward.value_or(0.0));
          if (leaves) ++*leaves;
        } else {
          dfs(left - 1);
        }
      }
      environment.restore(here);
    }
  };
  dfs(depth);
  return best;
}

/// Reference pruning: sort live paths by confidence descending, then by
/// the joined action sequence, and keep the first n.
inline std::vector<std::vector<std::string>> prune_oracle(const std::vector<explorer::ExplorationPath>& paths,
                                                          std::size_t n) {
  std::vector<std::pair<double, std::vector<std::string>>> live;
  for (const auto& p : paths) {
    if (p.done) continue;
    std::vector<std::string> actions;
    for (const auto& s : p.steps) actions.push_back(s.action);
    live.emplace_back(p.confidence, actions);
  }
  std::sort(live.begin(), live.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::vector<std::string>> out;
  for (std::size_t i = 0; i < live.size() && i < n; ++i) out.push_back(live[i].second);
  return out;
}

}  // namespace ldm::support
