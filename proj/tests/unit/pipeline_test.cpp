#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>
#include <sys/wait.h>

#include <ldm.hpp>

#include "test_support.hpp"

using namespace ldm;
using namespace ldm::pipeline;
using ldm::support::TempDir;

namespace {

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

RunConfig small_config(const TempDir& dir, std::size_t count = 12, std::size_t batch = 6) {
  RunConfig c;
  c.seed = 3;
  c.ingest_count = count;
  c.formation.batch_size = batch;
  c.workers = 2;
  c.eval_goal_count = 4;
  c.refine_goal_count = 2;
  c.explorer.max_depth = 10;
  c.agent.max_steps = 30;
  c.paths.trajectories = dir / "trajectories.jsonl";
  c.paths.memory_dir = dir / "memory";
  c.paths.output_dir = dir / "out";
  return c;
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(LDM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, FlagsOverrideFileOverrideDefaults) {
  TempDir dir;
  io::write_file_atomic(dir / "c.json", R"({"seed": 9, "workers": 3, "formation": {"batch_size": 7, "retrieval_k": 2}})");
  auto c = load_config(dir / "c.json", {{"seed", 11}, {"formation", {{"batch_size", 8}}}});
  EXPECT_EQ(c.seed, 11u);
  EXPECT_EQ(c.workers, 3u);
  EXPECT_EQ(c.formation.batch_size, 8u);
  EXPECT_EQ(c.formation.retrieval_k, 2u);
  EXPECT_EQ(c.explorer.top_n, 4u);
  EXPECT_DOUBLE_EQ(c.explorer.concentration_threshold, 0.7);
}

TEST(Config, StepBudgetDependsOnEnvironment) {
  EXPECT_EQ(config_from_json({{"environment", "toyshop"}}).agent.max_steps, 15u);
  EXPECT_EQ(config_from_json({{"environment", "toyhouse"}}).agent.max_steps, 50u);
  EXPECT_EQ(config_from_json({{"environment", "toyshop"}, {"agent", {{"max_steps", 9}}}}).agent.max_steps, 9u);
}

TEST(Config, RoundTripsThroughJson) {
  auto c = config_from_json({{"environment", "toyshop"}, {"seed", 5}, {"explorer", {{"top_n", 3}}}});
  auto again = config_from_json(nlohmann::json::parse(to_json(c).dump()));
  EXPECT_EQ(to_json(again), to_json(c));
}

TEST(Config, Rejections) {
  EXPECT_EQ(code_of([] { config_from_json({{"colour", "blue"}}); }), ErrorCode::ConfigError);
  EXPECT_EQ(code_of([] { config_from_json({{"explorer", {{"topn", 3}}}}); }), ErrorCode::ConfigError);
  EXPECT_EQ(code_of([] { config_from_json({{"environment", "mars"}}); }), ErrorCode::ConfigError);
  EXPECT_EQ(code_of([] { config_from_json({{"seed", "many"}}); }), ErrorCode::ConfigError);
  EXPECT_EQ(code_of([] { config_from_json({{"explorer", {{"concentration_threshold", 0.4}}}}); }), ErrorCode::ConfigError);
  EXPECT_EQ(code_of([] { load_config("/nonexistent/config.json"); }), ErrorCode::ConfigError);
}

TEST(Config, MissingInputsAreConfigErrors) {
  TempDir dir;
  auto c = small_config(dir);
  EXPECT_EQ(code_of([&] { check_inputs(c, "form-memory"); }), ErrorCode::ConfigError);
  EXPECT_EQ(code_of([&] { check_inputs(c, "eval"); }), ErrorCode::ConfigError);
  EXPECT_NO_THROW(check_inputs(c, "ingest"));
}

TEST(Score, Arithmetic) {
  auto s = score_rewards({1.0, 0.5, 1.0, 0.75});
  EXPECT_DOUBLE_EQ(s.score, 81.25);
  EXPECT_DOUBLE_EQ(s.sr, 50.0);
  auto u = score_rewards({std::nullopt, 1.0});
  EXPECT_DOUBLE_EQ(u.score, 50.0);
  EXPECT_DOUBLE_EQ(u.sr, 50.0);
  EXPECT_EQ(code_of([] { score_rewards({}); }), ErrorCode::EmptyInput);
}

TEST(Score, TableFormatting) {
  EvalReport r;
  r.method = "ldm";
  r.overall = {81.25, 50.0};
  EXPECT_EQ(r.table(), "| Method | Score | SR |\n|---|---|---|\n| ldm | 81.25 | 50.0 |\n");
  r.per_task = {{"Pick", 100.0}, {"Clean", std::nullopt}};
  EXPECT_EQ(r.table(), "| Method | Score | SR | Pick | Clean |\n|---|---|---|---|---|\n| ldm | 81.25 | 50.0 | 100.0 | - |\n");
}

TEST(Ingest, RerunWritesIdenticalBytes) {
  TempDir dir;
  auto c = small_config(dir);
  std::ostringstream log;
  cmd_ingest(c, log);
  auto first = io::read_file(c.paths.trajectories);
  cmd_ingest(c, log);
  EXPECT_EQ(io::read_file(c.paths.trajectories), first);
  EXPECT_EQ(memory::read_trajectories(c.paths.trajectories).size(), 12u);
}

TEST(Ingest, UnwritableTargetIsIoError) {
  TempDir dir;
  io::write_file_atomic(dir / "blocker", "x");
  auto c = small_config(dir);
  c.paths.trajectories = dir / "blocker" / "t.jsonl";
  std::ostringstream log;
  EXPECT_EQ(code_of([&] { cmd_ingest(c, log); }), ErrorCode::IoError);
}

TEST(Form, ShopBatchFiles) {
  TempDir dir;
  auto c = small_config(dir, 500, 100);
  c.environment = "toyshop";
  c.agent.max_steps = 15;
  c.ingest_count = 500;
  std::ostringstream log;
  cmd_ingest(c, log);
  auto backend = support::rule_based();
  auto result = cmd_form(c, backend, log);
  EXPECT_EQ(result.tuple_counts.size(), 5u);
  for (int b = 1; b <= 5; ++b) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "batch_%03d", b);
    EXPECT_TRUE(fs::exists(c.paths.memory_dir / (std::string(stem) + ".tuples.jsonl")));
    EXPECT_TRUE(fs::exists(c.paths.memory_dir / (std::string(stem) + ".index.json")));
  }
  std::size_t steps = 0;
  for (const auto& t : memory::read_trajectories(c.paths.trajectories)) steps += t.length();
  std::size_t tuples = 0;
  for (auto n : result.tuple_counts) tuples += n;
  EXPECT_EQ(tuples, steps);
}

TEST(Pipeline, RefineEvalRunEndToEnd) {
  TempDir dir;
  auto c = small_config(dir);
  c.rounds = 2;
  std::ostringstream log;
  cmd_ingest(c, log);
  auto backend = support::rule_based();
  cmd_form(c, backend, log);

  auto wrong = c;
  wrong.environment = "toyshop";
  EXPECT_EQ(code_of([&] { load_memory_checked(wrong); }), ErrorCode::ConfigError);

  auto report = cmd_refine(c, backend, log);
  EXPECT_EQ(report.entries.size(), 2u * 2u * 2u);  // rounds x goals x batches
  EXPECT_TRUE(fs::exists(c.paths.output_dir / "refine_report.json"));
  auto j = nlohmann::json::parse(io::read_file(c.paths.output_dir / "refine_report.json"));
  EXPECT_EQ(j["goals"].size(), 8u);
  EXPECT_NO_THROW(load_memory_checked(c));

  auto eval = cmd_eval(c, backend, log);
  EXPECT_EQ(eval.goals.size(), 4u);
  EXPECT_EQ(eval.per_task.size(), 6u);
  for (const auto& g : eval.goals) EXPECT_EQ(g.batch_rewards.size(), 2u);
  auto md = io::read_file(c.paths.output_dir / "eval_report.md");
  EXPECT_EQ(md, eval.table());

  auto run = cmd_run(c, backend, {"put some mug in cabinet.", 5}, log);
  EXPECT_EQ(run.processes.size(), 2u);
  auto trace = nlohmann::json::parse(io::read_file(c.paths.output_dir / "run_trace.json"));
  EXPECT_EQ(trace["chosen"]["goal"], "put some mug in cabinet.");
}

TEST(Pipeline, GoalsFile) {
  TempDir dir;
  io::write_file_atomic(dir / "goals.jsonl", goals_to_jsonl({{"put some mug in cabinet.", 3}, {"heat some egg and put it in countertop.", 4}}));
  auto goals = read_goals(dir / "goals.jsonl");
  ASSERT_EQ(goals.size(), 2u);
  EXPECT_EQ(goals[1].seed, 4u);
  io::write_file_atomic(dir / "bad.jsonl", "{\"seed\": 1}\n");
  EXPECT_EQ(code_of([&] { read_goals(dir / "bad.jsonl"); }), ErrorCode::IoError);
}

TEST(Cli, ExitCodes) {
  TempDir dir;
  auto d = dir.path().string();
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("ingest --environment mars"), 2);
  EXPECT_EQ(run_cli("ingest --nonsense"), 2);
  EXPECT_EQ(run_cli("eval --memory-dir " + d + "/missing"), 2);
  EXPECT_EQ(run_cli("ingest --count 3 --trajectories " + d + "/t.jsonl"), 0);
  EXPECT_EQ(run_cli("form-memory --batch-size 2 --trajectories " + d + "/t.jsonl --memory-dir " + d + "/m"), 0);
  EXPECT_TRUE(fs::exists(dir / "m" / "batch_002.index.json"));
  EXPECT_EQ(run_cli("run --goal 'put some mug in cabinet.' --memory-dir " + d + "/m --output-dir " + d + "/o"), 0);
  EXPECT_TRUE(fs::exists(dir / "o" / "run_trace.json"));
  io::write_file_atomic(dir / "blocker", "x");
  EXPECT_EQ(run_cli("ingest --count 2 --trajectories " + d + "/blocker/t.jsonl"), 1);
  EXPECT_EQ(run_cli("run --goal 'fly to the moon' --memory-dir " + d + "/m --output-dir " + d + "/o"), 1);
}
