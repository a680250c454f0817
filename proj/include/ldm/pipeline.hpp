#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ldm/agent.hpp"
#include "ldm/env/experts.hpp"
#include "ldm/env/toyhouse.hpp"
#include "ldm/env/toyshop.hpp"
#include "ldm/error.hpp"
#include "ldm/explorer.hpp"
#include "ldm/formation.hpp"
#include "ldm/io.hpp"
#include "ldm/llm/http.hpp"
#include "ldm/llm/scripted.hpp"
#include "ldm/memory/persistence.hpp"
#include "ldm/memory/trajectory_io.hpp"
#include "ldm/parallel.hpp"
#include "ldm/rng.hpp"
#include "ldm/text.hpp"

namespace ldm::pipeline {

namespace fs = std::filesystem;

struct Paths {
  fs::path fixtures;      // empty: rule-based responses only
  fs::path catalog;       // toyshop; empty: generated from the seed
  fs::path trajectories = "trajectories.jsonl";
  fs::path memory_dir = "memory";
  fs::path output_dir = "out";
  fs::path goals;         // eval goals, JSONL {goal, seed}; empty: sampled
  fs::path refine_goals;  // refine goals; empty: sampled
};

struct RunConfig {
  std::string environment = "toyhouse";
  std::string backend = "scripted";
  std::string fallback = "rule_based";
  std::string method = "ldm";
  std::uint64_t seed = 1;
  Paths paths;
  llm::HttpBackendConfig http;
  std::size_t ingest_count = 100;
  double noise = 0.3;
  std::size_t catalog_size = 30;
  std::size_t eval_goal_count = 50;
  std::size_t refine_goal_count = 10;
  std::size_t rounds = 1;
  std::size_t workers = 4;
  formation::FormationConfig formation;
  explorer::ExplorerConfig explorer;
  agent::AgentConfig agent;

  void validate() const {
    if (environment != "toyshop" && environment != "toyhouse")
      fail(ErrorCode::ConfigError, "environment must be toyshop or toyhouse");
    if (backend != "scripted" && backend != "http") fail(ErrorCode::ConfigError, "backend must be scripted or http");
    if (fallback != "rule_based" && fallback != "error") fail(ErrorCode::ConfigError, "fallback must be rule_based or error");
    if (ingest_count < 1) fail(ErrorCode::ConfigError, "ingest.count must be at least 1");
    if (!(noise >= 0.0 && noise <= 1.0)) fail(ErrorCode::ConfigError, "ingest.noise must be in [0,1]");
    if (catalog_size < 1) fail(ErrorCode::ConfigError, "catalog_size must be at least 1");
    if (rounds < 1) fail(ErrorCode::ConfigError, "rounds must be at least 1");
    if (workers < 1) fail(ErrorCode::ConfigError, "workers must be at least 1");
    formation.validate();
    explorer.validate();
    agent.validate();
    http.validate();
  }
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) fail(ErrorCode::ConfigError, where + " must be an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) fail(ErrorCode::ConfigError, "unknown key " + where + "." + key);
}

template <typename T>
void get(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline void get_path(const nlohmann::json& j, const char* key, fs::path& out) {
  if (j.contains(key)) out = j.at(key).get<std::string>();
}

}  // namespace detail

/// Parses a config document over the defaults. `agent.max_steps` defaults
/// per environment family when absent.
inline RunConfig config_from_json(const nlohmann::json& doc) {
  RunConfig c;
  try {
    detail::check_keys(doc, "config",
                       {"environment", "backend", "fallback", "method", "seed", "paths", "http", "ingest", "catalog_size",
                        "eval_goal_count", "refine_goal_count", "rounds", "workers", "formation", "explorer", "agent"});
    detail::get(doc, "environment", c.environment);
    detail::get(doc, "backend", c.backend);
    detail::get(doc, "fallback", c.fallback);
    detail::get(doc, "method", c.method);
    detail::get(doc, "seed", c.seed);
    detail::get(doc, "catalog_size", c.catalog_size);
    detail::get(doc, "eval_goal_count", c.eval_goal_count);
    detail::get(doc, "refine_goal_count", c.refine_goal_count);
    detail::get(doc, "rounds", c.rounds);
    detail::get(doc, "workers", c.workers);
    if (doc.contains("paths")) {
      const auto& p = doc.at("paths");
      detail::check_keys(p, "paths",
                         {"fixtures", "catalog", "trajectories", "memory_dir", "output_dir", "goals", "refine_goals"});
      detail::get_path(p, "fixtures", c.paths.fixtures);
      detail::get_path(p, "catalog", c.paths.catalog);
      detail::get_path(p, "trajectories", c.paths.trajectories);
      detail::get_path(p, "memory_dir", c.paths.memory_dir);
      detail::get_path(p, "output_dir", c.paths.output_dir);
      detail::get_path(p, "goals", c.paths.goals);
      detail::get_path(p, "refine_goals", c.paths.refine_goals);
    }
    if (doc.contains("http")) {
      detail::check_keys(doc.at("http"), "http",
                         {"endpoint_url", "model_name", "api_key_env", "temperature", "max_inflight", "retry_limit",
                          "timeout_seconds", "backoff_initial_ms"});
      c.http = doc.at("http").get<llm::HttpBackendConfig>();
    }
    if (doc.contains("ingest")) {
      const auto& g = doc.at("ingest");
      detail::check_keys(g, "ingest", {"count", "noise"});
      detail::get(g, "count", c.ingest_count);
      detail::get(g, "noise", c.noise);
    }
    if (doc.contains("formation")) {
      const auto& f = doc.at("formation");
      detail::check_keys(f, "formation", {"batch_size", "retrieval_k", "summary_max_steps", "workers", "type_examples"});
      detail::get(f, "batch_size", c.formation.batch_size);
      detail::get(f, "retrieval_k", c.formation.retrieval_k);
      detail::get(f, "summary_max_steps", c.formation.summary_max_steps);
      detail::get(f, "workers", c.formation.workers);
      detail::get(f, "type_examples", c.formation.type_examples);
    }
    if (doc.contains("explorer")) {
      const auto& e = doc.at("explorer");
      detail::check_keys(e, "explorer",
                         {"top_n", "concentration_threshold", "max_depth", "max_children", "retrieval_k",
                          "summary_max_steps", "invalid_action_retries"});
      detail::get(e, "top_n", c.explorer.top_n);
      detail::get(e, "concentration_threshold", c.explorer.concentration_threshold);
      detail::get(e, "max_depth", c.explorer.max_depth);
      detail::get(e, "max_children", c.explorer.max_children);
      detail::get(e, "retrieval_k", c.explorer.retrieval_k);
      detail::get(e, "summary_max_steps", c.explorer.summary_max_steps);
      detail::get(e, "invalid_action_retries", c.explorer.invalid_action_retries);
    }
    c.agent.max_steps = agent::default_max_steps(c.environment);
    if (doc.contains("agent")) {
      const auto& a = doc.at("agent");
      detail::check_keys(a, "agent", {"max_steps", "invalid_action_retries", "retrieval_k", "summary_max_steps"});
      detail::get(a, "max_steps", c.agent.max_steps);
      detail::get(a, "invalid_action_retries", c.agent.invalid_action_retries);
      detail::get(a, "retrieval_k", c.agent.retrieval_k);
      detail::get(a, "summary_max_steps", c.agent.summary_max_steps);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ConfigError, std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

inline nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::json http = c.http;
  return {{"environment", c.environment},
          {"backend", c.backend},
          {"fallback", c.fallback},
          {"method", c.method},
          {"seed", c.seed},
          {"paths",
           {{"fixtures", c.paths.fixtures.string()},
            {"catalog", c.paths.catalog.string()},
            {"trajectories", c.paths.trajectories.string()},
            {"memory_dir", c.paths.memory_dir.string()},
            {"output_dir", c.paths.output_dir.string()},
            {"goals", c.paths.goals.string()},
            {"refine_goals", c.paths.refine_goals.string()}}},
          {"http", http},
          {"ingest", {{"count", c.ingest_count}, {"noise", c.noise}}},
          {"catalog_size", c.catalog_size},
          {"eval_goal_count", c.eval_goal_count},
          {"refine_goal_count", c.refine_goal_count},
          {"rounds", c.rounds},
          {"workers", c.workers},
          {"formation",
           {{"batch_size", c.formation.batch_size},
            {"retrieval_k", c.formation.retrieval_k},
            {"summary_max_steps", c.formation.summary_max_steps},
            {"workers", c.formation.workers},
            {"type_examples", c.formation.type_examples}}},
          {"explorer",
           {{"top_n", c.explorer.top_n},
            {"concentration_threshold", c.explorer.concentration_threshold},
            {"max_depth", c.explorer.max_depth},
            {"max_children", c.explorer.max_children},
            {"retrieval_k", c.explorer.retrieval_k},
            {"summary_max_steps", c.explorer.summary_max_steps},
            {"invalid_action_retries", c.explorer.invalid_action_retries}}},
          {"agent",
           {{"max_steps", c.agent.max_steps},
            {"invalid_action_retries", c.agent.invalid_action_retries},
            {"retrieval_k", c.agent.retrieval_k},
            {"summary_max_steps", c.agent.summary_max_steps}}}};
}

/// Reads a config file (if any) and applies `overrides` on top of it.
/// Override values are merged key by key, so nested sections keep the
/// file's other entries.
inline RunConfig load_config(const fs::path& path, const nlohmann::json& overrides = nlohmann::json::object()) {
  nlohmann::json doc = nlohmann::json::object();
  if (!path.empty()) {
    std::string content;
    try {
      content = io::read_file(path);
    } catch (const Error& e) {
      fail(ErrorCode::ConfigError, e.what());
    }
    try {
      doc = nlohmann::json::parse(content);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::ConfigError, path.string() + ": " + e.what());
    }
  }
  doc.merge_patch(overrides);
  return config_from_json(doc);
}

// --- Shared plumbing -------------------------------------------------------------

inline env::Catalog load_catalog(const RunConfig& config) {
  if (config.paths.catalog.empty()) {
    auto rng = Rng::substream(config.seed, "catalog");
    return env::generate_catalog(rng, config.catalog_size);
  }
  try {
    auto catalog = env::catalog_from_json(nlohmann::json::parse(io::read_file(config.paths.catalog)));
    catalog.validate();
    return catalog;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ConfigError, config.paths.catalog.string() + ": " + e.what());
  }
}

/// Builds environment instances; shop instances share one catalog.
class EnvironmentFactory {
 public:
  explicit EnvironmentFactory(const RunConfig& config) : family_(config.environment) {
    if (family_ == "toyshop") catalog_ = load_catalog(config);
  }

  std::unique_ptr<env::Environment> make() const {
    if (family_ == "toyshop") return std::make_unique<env::ToyShop>(catalog_);
    return std::make_unique<env::ToyHouse>();
  }

  const env::Catalog& catalog() const { return catalog_; }

 private:
  std::string family_;
  env::Catalog catalog_;
};

inline std::unique_ptr<llm::Backend> make_backend(const RunConfig& config) {
  if (config.backend == "http") return std::make_unique<llm::HttpBackend>(config.http);
  auto policy = config.fallback == "error" ? llm::FallbackPolicy::Error : llm::FallbackPolicy::RuleBased;
  if (config.paths.fixtures.empty()) return std::make_unique<llm::ScriptedBackend>(llm::ScriptedFixture{{}, policy});
  return std::make_unique<llm::ScriptedBackend>(llm::load_fixture_file(config.paths.fixtures, policy));
}

inline void require_file(const fs::path& path, const std::string& what) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) fail(ErrorCode::ConfigError, what + " not found: " + path.string());
}

/// Checks at startup that every input the command reads exists.
inline void check_inputs(const RunConfig& config, const std::string& command) {
  if (!config.paths.fixtures.empty()) require_file(config.paths.fixtures, "fixture file");
  if (!config.paths.catalog.empty()) require_file(config.paths.catalog, "catalog file");
  if (command == "form-memory") require_file(config.paths.trajectories, "trajectory file");
  if (command == "refine" || command == "run" || command == "eval")
    require_file(config.paths.memory_dir / "memory.json", "memory manifest");
  if (command == "refine" && !config.paths.refine_goals.empty()) require_file(config.paths.refine_goals, "goals file");
  if (command == "eval" && !config.paths.goals.empty()) require_file(config.paths.goals, "goals file");
}

inline std::vector<env::GoalSpec> read_goals(const fs::path& path) {
  std::vector<env::GoalSpec> goals;
  std::size_t line_no = 0;
  for (const auto& line : text::split_lines(io::read_file(path))) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      goals.push_back({j.at("goal").get<std::string>(), j.value("seed", std::uint64_t{0})});
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::IoError, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return goals;
}

inline std::string goals_to_jsonl(const std::vector<env::GoalSpec>& goals) {
  std::string out;
  for (const auto& g : goals) out += nlohmann::ordered_json{{"goal", g.goal}, {"seed", g.seed}}.dump() + "\n";
  return out;
}

inline std::vector<env::GoalSpec> sample_goals(const RunConfig& config, const EnvironmentFactory& factory,
                                               std::size_t count, std::string_view stream) {
  if (config.environment == "toyshop") return env::sample_shop_goals(factory.catalog(), count, config.seed, stream);
  return env::sample_house_goals(count, config.seed, stream);
}

inline memory::MemorySet load_memory_checked(const RunConfig& config) {
  auto set = memory::load_memory(config.paths.memory_dir);
  if (set.batches.empty()) fail(ErrorCode::EmptyInput, "memory has no batches");
  if (set.environment != config.environment)
    fail(ErrorCode::ConfigError, "memory was formed for " + set.environment + ", config says " + config.environment);
  return set;
}

inline std::string format_reward(const std::optional<double>& r) { return r ? text::format_real(*r) : "unknown"; }

inline nlohmann::ordered_json reward_json(const std::optional<double>& r) {
  return r ? nlohmann::ordered_json(*r) : nlohmann::ordered_json(nullptr);
}

// --- Commands --------------------------------------------------------------------

struct IngestResult {
  fs::path path;
  std::size_t count = 0;
};

inline IngestResult cmd_ingest(const RunConfig& config, std::ostream& log) {
  config.validate();
  std::vector<memory::Trajectory> trajectories;
  if (config.environment == "toyshop") {
    auto catalog = load_catalog(config);
    trajectories = env::generate_shop_experts(catalog, config.ingest_count, config.seed, config.noise);
  } else {
    trajectories = env::generate_house_experts(config.ingest_count, config.seed, config.noise);
  }
  io::write_file_atomic(config.paths.trajectories, memory::trajectories_to_jsonl(trajectories));
  log << "wrote " << trajectories.size() << " trajectories to " << config.paths.trajectories.string() << "\n";
  return {config.paths.trajectories, trajectories.size()};
}

struct FormResult {
  std::vector<std::size_t> tuple_counts;  // per batch
  std::size_t files_written = 0;
};

inline FormResult cmd_form(const RunConfig& config, llm::Backend& backend, std::ostream& log) {
  config.validate();
  auto trajectories = memory::read_trajectories(config.paths.trajectories);
  auto set = formation::form_memory(backend, trajectories, config.formation, config.workers);
  set.environment = config.environment;
  set.seed = config.seed;
  FormResult out;
  out.files_written = memory::save_memory(set, config.paths.memory_dir);
  for (const auto& b : set.batches) {
    out.tuple_counts.push_back(b.size());
    log << "batch " << b.batch_id() << ": " << b.size() << " tuples, " << b.goal_types().size() << " goal types\n";
  }
  return out;
}

struct RefineEntry {
  std::size_t round = 1;
  std::string goal;
  std::uint64_t seed = 0;
  int batch_id = 1;
  std::optional<double> ground_reward;
  std::optional<double> best_reward;
  std::size_t key_step = 0;
  std::size_t tuples_added = 0;
};

struct RefineReport {
  std::uint64_t seed = 0;
  std::vector<RefineEntry> entries;
  std::size_t tuples_added = 0;
  std::size_t files_written = 0;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json items = nlohmann::ordered_json::array();
    for (const auto& e : entries)
      items.push_back({{"round", e.round},
                       {"goal", e.goal},
                       {"seed", e.seed},
                       {"batch_id", e.batch_id},
                       {"ground_reward", reward_json(e.ground_reward)},
                       {"best_reward", reward_json(e.best_reward)},
                       {"key_step", e.key_step},
                       {"tuples_added", e.tuples_added}});
    return {{"seed", seed}, {"tuples_added", tuples_added}, {"goals", items}};
  }

  std::string table() const {
    std::string out = "| Round | Batch | Goal | Ground | Best | Added |\n|---|---|---|---|---|---|\n";
    for (const auto& e : entries)
      out += "| " + std::to_string(e.round) + " | " + std::to_string(e.batch_id) + " | " + e.goal + " | " +
             format_reward(e.ground_reward) + " | " + format_reward(e.best_reward) + " | " +
             std::to_string(e.tuples_added) + " |\n";
    out += "\ntuples added: " + std::to_string(tuples_added) + "\n";
    return out;
  }
};

/// Goals are processed one at a time against every batch; memory is saved
/// after each round.
inline RefineReport cmd_refine(const RunConfig& config, llm::Backend& backend, std::ostream& log) {
  config.validate();
  EnvironmentFactory factory(config);
  auto set = load_memory_checked(config);
  auto goals = config.paths.refine_goals.empty()
                   ? sample_goals(config, factory, config.refine_goal_count, "refine-goals")
                   : read_goals(config.paths.refine_goals);
  if (goals.empty()) fail(ErrorCode::EmptyInput, "no refinement goals");
  RefineReport report;
  report.seed = config.seed;
  auto environment = factory.make();
  for (std::size_t round = 1; round <= config.rounds; ++round) {
    for (const auto& g : goals) {
      for (auto& batch : set.batches) {
        auto outcome = explorer::refine_goal(backend, *environment, batch, g.goal, g.seed, config.agent, config.explorer);
        report.entries.push_back({round, g.goal, g.seed, batch.batch_id(), outcome.ground_reward, outcome.best_reward,
                                  outcome.key_step, outcome.tuples_added});
        report.tuples_added += outcome.tuples_added;
      }
    }
    report.files_written += memory::save_memory(set, config.paths.memory_dir);
    log << "round " << round << ": " << report.tuples_added << " tuples added so far\n";
  }
  io::write_file_atomic(config.paths.output_dir / "refine_report.json", report.to_json().dump(2) + "\n");
  io::write_file_atomic(config.paths.output_dir / "refine_report.md", report.table());
  return report;
}

struct GoalResult {
  std::string goal;
  std::uint64_t seed = 0;
  std::optional<double> reward;
  int batch_id = 1;
  std::size_t steps = 0;
  std::string terminated;
  std::vector<std::optional<double>> batch_rewards;
};

struct Score {
  double score = 0;  // mean reward x 100
  double sr = 0;     // percent of rewards equal to 1
};

/// Unknown rewards count as 0.
inline Score score_rewards(const std::vector<std::optional<double>>& rewards) {
  if (rewards.empty()) fail(ErrorCode::EmptyInput, "no rewards to score");
  double sum = 0;
  std::size_t success = 0;
  for (const auto& r : rewards) {
    sum += r.value_or(0.0);
    success += r && *r == 1.0;
  }
  auto n = static_cast<double>(rewards.size());
  return {sum / n * 100.0, static_cast<double>(success) / n * 100.0};
}

struct EvalReport {
  std::string method;
  std::string environment;
  std::uint64_t seed = 0;
  std::vector<GoalResult> goals;
  Score overall;
  std::vector<std::pair<std::string, std::optional<double>>> per_task;  // toyhouse success rate per task

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json items = nlohmann::ordered_json::array();
    for (const auto& g : goals) {
      nlohmann::ordered_json batch = nlohmann::ordered_json::array();
      for (const auto& r : g.batch_rewards) batch.push_back(reward_json(r));
      items.push_back({{"goal", g.goal},
                       {"seed", g.seed},
                       {"reward", reward_json(g.reward)},
                       {"batch_id", g.batch_id},
                       {"steps", g.steps},
                       {"terminated", g.terminated},
                       {"batch_rewards", batch}});
    }
    nlohmann::ordered_json j = {{"method", method},       {"environment", environment}, {"seed", seed},
                                {"goal_count", goals.size()}, {"score", overall.score},   {"sr", overall.sr}};
    if (!per_task.empty()) {
      nlohmann::ordered_json tasks = nlohmann::ordered_json::object();
      for (const auto& [task, sr] : per_task) tasks[task] = reward_json(sr);
      j["per_task_sr"] = tasks;
    }
    j["goals"] = items;
    return j;
  }

  std::string table() const {
    std::string header = "| Method | Score | SR |";
    std::string rule = "|---|---|---|";
    std::string row = "| " + method + " | " + text::format_fixed(overall.score, 2) + " | " +
                      text::format_fixed(overall.sr, 1) + " |";
    for (const auto& [task, sr] : per_task) {
      header += " " + task + " |";
      rule += "---|";
      row += " " + (sr ? text::format_fixed(*sr, 1) : std::string("-")) + " |";
    }
    return header + "\n" + rule + "\n" + row + "\n";
  }
};

/// Runs `goals` against every batch (episodes in parallel) and picks one
/// process per goal.
inline std::vector<GoalResult> evaluate_goals(llm::Backend& backend, const EnvironmentFactory& factory,
                                              const memory::MemorySet& set, const std::vector<env::GoalSpec>& goals,
                                              const agent::AgentConfig& agent_config, std::size_t workers) {
  const auto nb = set.batches.size();
  std::vector<agent::DecisionProcess> processes(goals.size() * nb);
  parallel_for(processes.size(), workers, [&](std::size_t i) {
    const auto& g = goals[i / nb];
    auto environment = factory.make();
    environment->reset(g.goal, g.seed);
    processes[i] = agent::run_episode(backend, *environment, set.batches[i % nb], agent_config);
  });
  std::vector<GoalResult> out;
  for (std::size_t gi = 0; gi < goals.size(); ++gi) {
    std::vector<agent::DecisionProcess> group(processes.begin() + static_cast<std::ptrdiff_t>(gi * nb),
                                              processes.begin() + static_cast<std::ptrdiff_t>((gi + 1) * nb));
    const auto& chosen = group[agent::choose_final_index(backend, group)];
    GoalResult r{goals[gi].goal, goals[gi].seed, chosen.reward, chosen.batch_id, chosen.steps.size(),
                 std::string(agent::to_string(chosen.terminated)), {}};
    for (const auto& p : group) r.batch_rewards.push_back(p.reward);
    out.push_back(std::move(r));
  }
  return out;
}

inline EvalReport cmd_eval(const RunConfig& config, llm::Backend& backend, std::ostream& log) {
  config.validate();
  EnvironmentFactory factory(config);
  auto set = load_memory_checked(config);
  auto goals = config.paths.goals.empty() ? sample_goals(config, factory, config.eval_goal_count, "eval-goals")
                                          : read_goals(config.paths.goals);
  if (goals.empty()) fail(ErrorCode::EmptyInput, "no evaluation goals");

  EvalReport report;
  report.method = config.method;
  report.environment = config.environment;
  report.seed = config.seed;
  report.goals = evaluate_goals(backend, factory, set, goals, config.agent, config.workers);
  std::vector<std::optional<double>> rewards;
  for (const auto& g : report.goals) rewards.push_back(g.reward);
  report.overall = score_rewards(rewards);
  if (config.environment == "toyhouse") {
    std::map<env::HouseTask, std::vector<std::optional<double>>> by_task;
    for (const auto& g : report.goals) by_task[env::parse_house_goal(g.goal).task].push_back(g.reward);
    for (auto task : env::kHouseTasks) {
      auto it = by_task.find(task);
      std::optional<double> sr;
      if (it != by_task.end()) sr = score_rewards(it->second).sr;
      report.per_task.emplace_back(std::string(env::to_string(task)), sr);
    }
  }
  io::write_file_atomic(config.paths.output_dir / "eval_report.json", report.to_json().dump(2) + "\n");
  io::write_file_atomic(config.paths.output_dir / "eval_report.md", report.table());
  log << report.table();
  return report;
}

struct RunResult {
  agent::DecisionProcess chosen;
  std::vector<agent::DecisionProcess> processes;  // one per batch
};

/// One goal against every batch; the chosen process trace goes to
/// output_dir/run_trace.json.
inline RunResult cmd_run(const RunConfig& config, llm::Backend& backend, const env::GoalSpec& goal, std::ostream& log) {
  config.validate();
  EnvironmentFactory factory(config);
  auto set = load_memory_checked(config);
  RunResult out;
  out.processes.resize(set.batches.size());
  parallel_for(set.batches.size(), config.workers, [&](std::size_t b) {
    auto environment = factory.make();
    environment->reset(goal.goal, goal.seed);
    out.processes[b] = agent::run_episode(backend, *environment, set.batches[b], config.agent);
  });
  out.chosen = agent::choose_final(backend, out.processes);
  nlohmann::ordered_json doc = {{"seed", config.seed}, {"goal_seed", goal.seed}, {"chosen", agent::trace_json(out.chosen)}};
  io::write_file_atomic(config.paths.output_dir / "run_trace.json", doc.dump(2) + "\n");
  for (const auto& s : out.chosen.steps) log << "> " << s.action << "\n";
  log << "reward " << format_reward(out.chosen.reward) << " (batch " << out.chosen.batch_id << ", "
      << agent::to_string(out.chosen.terminated) << ")\n";
  return out;
}

}  // namespace ldm::pipeline
