// Command-line entry point: ingest, form-memory, refine, run, eval.
// Exit codes: 0 success, 2 config error, 1 runtime error.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ldm/pipeline.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::string> environment, backend, fallback, fixtures, catalog, trajectories, memory_dir, output_dir,
      goals, method;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> count, workers, batch_size, rounds, eval_goal_count, refine_goal_count, max_steps;
  std::optional<double> noise;
  // run only
  std::string goal;
  std::uint64_t goal_seed = 0;
};

void add_common(CLI::App& cmd, Flags& f) {
  cmd.add_option("--config", f.config, "JSON config file");
  cmd.add_option("--environment", f.environment, "toyshop or toyhouse");
  cmd.add_option("--backend", f.backend, "scripted or http");
  cmd.add_option("--fallback", f.fallback, "scripted fallback: rule_based or error");
  cmd.add_option("--fixtures", f.fixtures, "scripted fixture file");
  cmd.add_option("--catalog", f.catalog, "toyshop catalog file");
  cmd.add_option("--trajectories", f.trajectories, "trajectory JSON-lines file");
  cmd.add_option("--memory-dir", f.memory_dir, "memory directory");
  cmd.add_option("--output-dir", f.output_dir, "report directory");
  cmd.add_option("--seed", f.seed, "run seed");
  cmd.add_option("--workers", f.workers, "worker threads");
  cmd.add_option("--max-steps", f.max_steps, "agent step limit");
}

nlohmann::json overrides(const Flags& f, const std::string& command) {
  nlohmann::json j = nlohmann::json::object();
  auto set = [](nlohmann::json& node, const char* key, const auto& value) {
    if (value) node[key] = *value;
  };
  set(j, "environment", f.environment);
  set(j, "backend", f.backend);
  set(j, "fallback", f.fallback);
  set(j, "method", f.method);
  set(j, "seed", f.seed);
  set(j, "workers", f.workers);
  set(j, "rounds", f.rounds);
  set(j, "eval_goal_count", f.eval_goal_count);
  set(j, "refine_goal_count", f.refine_goal_count);
  nlohmann::json paths = nlohmann::json::object();
  set(paths, "fixtures", f.fixtures);
  set(paths, "catalog", f.catalog);
  set(paths, "trajectories", f.trajectories);
  set(paths, "memory_dir", f.memory_dir);
  set(paths, "output_dir", f.output_dir);
  set(paths, command == "refine" ? "refine_goals" : "goals", f.goals);
  if (!paths.empty()) j["paths"] = paths;
  nlohmann::json ingest = nlohmann::json::object();
  set(ingest, "count", f.count);
  set(ingest, "noise", f.noise);
  if (!ingest.empty()) j["ingest"] = ingest;
  if (f.batch_size) j["formation"] = {{"batch_size", *f.batch_size}};
  if (f.max_steps) j["agent"] = {{"max_steps", *f.max_steps}};
  return j;
}

int execute(const std::string& command, const Flags& flags) {
  using namespace ldm;
  pipeline::RunConfig config;
  try {
    config = pipeline::load_config(flags.config, overrides(flags, command));
    pipeline::check_inputs(config, command);
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  try {
    if (command == "ingest") {
      pipeline::cmd_ingest(config, std::cout);
      return 0;
    }
    std::unique_ptr<llm::Backend> backend;
    try {
      backend = pipeline::make_backend(config);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ConfigError) throw;
      std::cerr << "config error: " << e.what() << "\n";
      return 2;
    }
    if (command == "form-memory") {
      pipeline::cmd_form(config, *backend, std::cout);
    } else if (command == "refine") {
      auto report = pipeline::cmd_refine(config, *backend, std::cout);
      std::cout << report.table();
    } else if (command == "run") {
      pipeline::cmd_run(config, *backend, {flags.goal, flags.goal_seed}, std::cout);
    } else if (command == "eval") {
      pipeline::cmd_eval(config, *backend, std::cout);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::ConfigError ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Memory-driven agent: form, refine and evaluate decision memories"};
  app.require_subcommand(1);
  Flags flags;

  auto* ingest = app.add_subcommand("ingest", "Generate expert trajectories");
  add_common(*ingest, flags);
  ingest->add_option("--count", flags.count, "number of trajectories");
  ingest->add_option("--noise", flags.noise, "detour probability in [0,1]");

  auto* form = app.add_subcommand("form-memory", "Partition trajectories and form batch memories");
  add_common(*form, flags);
  form->add_option("--batch-size", flags.batch_size, "trajectories per batch");

  auto* refine = app.add_subcommand("refine", "Explore goals and enhance memory");
  add_common(*refine, flags);
  refine->add_option("--goals", flags.goals, "goals file, JSON lines {goal, seed}");
  refine->add_option("--rounds", flags.rounds, "refinement rounds");
  refine->add_option("--goal-count", flags.refine_goal_count, "sampled goals when no goals file");

  auto* run = app.add_subcommand("run", "Run one goal against every batch");
  add_common(*run, flags);
  run->add_option("--goal", flags.goal, "goal text")->required();
  run->add_option("--goal-seed", flags.goal_seed, "environment seed for the goal");

  auto* eval = app.add_subcommand("eval", "Evaluate on held-out goals");
  add_common(*eval, flags);
  eval->add_option("--goals", flags.goals, "goals file, JSON lines {goal, seed}");
  eval->add_option("--goal-count", flags.eval_goal_count, "sampled goals when no goals file");
  eval->add_option("--method", flags.method, "method label in the report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  for (auto* sub : {ingest, form, refine, run, eval})
    if (sub->parsed()) return execute(sub->get_name(), flags);
  return 2;
}
