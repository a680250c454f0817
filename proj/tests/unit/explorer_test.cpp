#include <gtest/gtest.h>

#include <ldm.hpp>

#include "test_support.hpp"

using namespace ldm;
using namespace ldm::explorer;
using llm::PromptKind;

namespace {

memory::StateActionTuple with_action(const std::string& action, int i) {
  memory::StateActionTuple t;
  t.goal = "g";
  t.observation = "o" + std::to_string(i);
  t.action = action;
  return t;
}

retrieval::ContextPrompt context_of(const std::vector<std::string>& actions) {
  retrieval::ContextPrompt ctx;
  for (std::size_t i = 0; i < actions.size(); ++i) ctx.tuples.push_back(with_action(actions[i], static_cast<int>(i)));
  return ctx;
}

env::HouseWorld kitchen() {
  env::HouseWorld w;
  w.receptacles = {{"countertop", 1, false, true}, {"fridge", 1, true, false}, {"cabinet", 1, true, false}};
  w.objects = {{"mug", 1, "countertop 1"}};
  w.lamp_location = "countertop 1";
  return w;
}

/// Proposes every admissible action of `environment`'s current state with
/// equal weight. The explorer restores a node's state before asking.
class UniformProposer final : public llm::Backend {
 public:
  explicit UniformProposer(env::Environment& environment) : env_(environment) {}
  llm::LlmResponse complete(const llm::LlmRequest& r) override {
    switch (r.kind) {
      case PromptKind::Summarization: return {"Summary: ok", "u", {}};
      case PromptKind::Evaluation: return {"Subgoal 1: x -Incomplete", "u", {}};
      case PromptKind::TreeExploration: {
        std::string out;
        for (const auto& a : env_.admissible_actions()) out += a + " | 1\n";
        return {out, "u", {}};
      }
      case PromptKind::Action: return {"look", "u", {}};
      case PromptKind::Compare: return {"1: differs", "u", {}};
      default: return {"[1]", "u", {}};
    }
  }
  std::string id() const override { return "u"; }

 private:
  env::Environment& env_;
};

DecisionProcess process(std::vector<std::string> actions, std::optional<double> reward) {
  DecisionProcess p;
  p.goal = "cool some mug and put it in cabinet.";
  p.reward = reward;
  for (std::size_t i = 0; i < actions.size(); ++i)
    p.steps.push_back({"observation " + std::to_string(i + 1), actions[i], {}});
  return p;
}

memory::BatchMemory one_type_memory() {
  memory::BatchMemory m(1, {});
  auto g = m.add_goal_type("cooling");
  auto o = m.add_observation_type(g, "observation");
  m.insert(with_action("go to fridge 1", 99), g, o);
  return m;
}

}  // namespace

TEST(ActionDistribution, RelativeFrequencies) {
  auto d = action_distribution(context_of({"a", "b", "a", "c", "a"}).tuples);
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(d[0].first, "a");
  EXPECT_DOUBLE_EQ(d[0].second, 0.6);
  EXPECT_DOUBLE_EQ(d[1].second, 0.2);
}

TEST(SelectOrBranch, ConcentratedContextTakesMajority) {
  int calls = 0;
  support::FunctionBackend backend([&](const llm::LlmRequest&) {
    ++calls;
    return std::string("x | 1");
  });
  auto d = select_or_branch(backend, "g", {}, "o", context_of({"a", "a", "a", "a", "b"}), {});
  EXPECT_TRUE(d.majority);
  ASSERT_EQ(d.options.size(), 1u);
  EXPECT_EQ(d.options[0].action, "a");
  EXPECT_EQ(d.options[0].confidence, 1.0);
  EXPECT_EQ(calls, 0);

  // 7 of 10 sits exactly on the default threshold.
  auto at = select_or_branch(backend, "g", {}, "o", context_of({"a", "a", "a", "a", "a", "a", "a", "b", "c", "d"}), {});
  EXPECT_TRUE(at.majority);
  EXPECT_EQ(calls, 0);
}

TEST(SelectOrBranch, SpreadContextAsksForProposals) {
  llm::LlmRequest seen;
  support::FunctionBackend backend([&](const llm::LlmRequest& r) {
    seen = r;
    return std::string("a | 0.4\nb | 0.3\nc | 0.1\nd | 0.1\ne | 0.1");
  });
  auto d = select_or_branch(backend, "g", {}, "o", context_of({"a", "a", "a", "b", "c"}), {});
  EXPECT_EQ(seen.kind, PromptKind::TreeExploration);
  EXPECT_FALSE(d.majority);
  ASSERT_EQ(d.options.size(), 4u);
  double sum = 0;
  for (const auto& p : d.options) sum += p.confidence;
  EXPECT_NEAR(sum, 1.0, 1e-12);
  EXPECT_NEAR(d.options[0].confidence, 0.4 / 0.9, 1e-12);
  EXPECT_EQ(d.options[3].action, "d");  // ties keep reply order
}

TEST(SelectOrBranch, UnusableProposalsFallBackToTopAction) {
  support::FunctionBackend backend([](const llm::LlmRequest&) { return std::string("a | 0"); });
  auto d = select_or_branch(backend, "g", {}, "o", context_of({"a", "b", "b"}), {});
  EXPECT_TRUE(d.majority);
  EXPECT_EQ(d.options[0].action, "b");
  EXPECT_THROW(select_or_branch(backend, "g", {}, "o", {}, {}), Error);
}

TEST(TopProposals, TruncateAndRenormalizeProperty) {
  auto rng = Rng::substream(17, "top");
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<llm::Proposal> ps;
    for (std::size_t i = 0, n = 1 + rng.below(9); i < n; ++i)
      ps.push_back({"a" + std::to_string(i), 0.01 + rng.uniform()});
    std::size_t z = 1 + rng.below(5);
    auto out = top_proposals(ps, z);
    ASSERT_EQ(out.size(), std::min(z, ps.size()));
    double sum = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      sum += out[i].confidence;
      if (i) {
        EXPECT_GE(out[i - 1].confidence, out[i].confidence);
      }
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    // Kept items are the z largest; their ratios are unchanged.
    auto sorted = ps;
    std::stable_sort(sorted.begin(), sorted.end(), [](auto& a, auto& b) { return a.confidence > b.confidence; });
    double kept = 0;
    for (std::size_t i = 0; i < out.size(); ++i) kept += sorted[i].confidence;
    for (std::size_t i = 0; i < out.size(); ++i) {
      EXPECT_EQ(out[i].action, sorted[i].action);
      EXPECT_NEAR(out[i].confidence, sorted[i].confidence / kept, 1e-12);
    }
  }
}

TEST(PathConfidence, Product) {
  EXPECT_DOUBLE_EQ(path_confidence({}), 1.0);
  EXPECT_DOUBLE_EQ(path_confidence({0.5, 0.4, 1.0}), 0.2);
}

TEST(PruneFrontier, MatchesOracleAndKeepsFinishedPaths) {
  auto rng = Rng::substream(18, "prune");
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<ExplorationPath> paths;
    std::size_t done_count = 0;
    for (std::size_t i = 0, n = rng.below(12); i < n; ++i) {
      ExplorationPath p;
      for (std::size_t k = 0, len = 1 + rng.below(3); k < len; ++k)
        p.steps.push_back({"o", "act" + std::to_string(rng.below(3)), {}});
      p.confidence = static_cast<double>(1 + rng.below(4)) / 8.0;
      p.done = rng.chance(0.25);
      done_count += p.done;
      paths.push_back(std::move(p));
    }
    std::size_t top_n = 1 + rng.below(5);
    auto want = support::prune_oracle(paths, top_n);
    std::vector<ExplorationPath> cut;
    auto kept = prune_frontier(paths, top_n, &cut);
    std::vector<std::vector<std::string>> live;
    std::size_t done_kept = 0;
    for (const auto& p : kept) {
      if (p.done) ++done_kept;
      else live.push_back(p.actions());
    }
    EXPECT_EQ(live, want);
    EXPECT_EQ(done_kept, done_count);
    EXPECT_EQ(kept.size() + cut.size(), paths.size());
  }
}

TEST(Explore, BranchingBoundedAndConfidencesMultiply) {
  env::ToyHouse house(kitchen());
  house.reset("cool some mug and put it in cabinet.", 1);
  UniformProposer backend(house);
  memory::BatchMemory empty(1, {});
  ExplorerConfig config;
  config.max_depth = 7;
  auto result = explore(backend, house, empty, config);
  EXPECT_LE(result.stats.max_children, config.max_children);
  EXPECT_GT(result.stats.expansions, 0u);
  for (std::size_t i = 1; i < result.trace.size(); ++i) {
    const auto& n = result.trace[i];
    ASSERT_TRUE(n.parent.has_value());
    EXPECT_NEAR(n.path_confidence, result.trace[*n.parent].path_confidence * n.confidence, 1e-12);
  }
  for (std::size_t i = 1; i < result.processes.size(); ++i)
    EXPECT_GE(result.processes[i - 1].reward.value_or(-1), result.processes[i].reward.value_or(-1));
  for (const auto& p : result.processes) {
    env::ToyHouse replay(kitchen());
    replay.reset("cool some mug and put it in cabinet.", 1);
    env::StepOutcome last;
    for (const auto& a : p.actions()) last = replay.step(a);
    EXPECT_TRUE(last.done);
    EXPECT_EQ(last.reward, p.reward);
  }
}

TEST(Explore, FrontierNeverExceedsTopN) {
  env::ToyHouse house(kitchen());
  house.reset("cool some mug and put it in cabinet.", 1);
  UniformProposer backend(house);
  memory::BatchMemory empty(1, {});
  ExplorerConfig config;
  config.max_depth = 4;
  config.top_n = 2;
  auto result = explore(backend, house, empty, config);
  // At most top_n expansions per depth after the root.
  EXPECT_LE(result.stats.expansions, 1u + 2u * 3u);
  EXPECT_GT(result.stats.pruned, 0u);
}

TEST(KeyStep, FirstDivergence) {
  EXPECT_EQ(first_divergence(process({"a", "b", "c"}, 1.0), process({"a", "x"}, 0.0)), 2u);
  EXPECT_EQ(first_divergence(process({"a", "b"}, 1.0), process({"a"}, 0.0)), 2u);
  EXPECT_EQ(first_divergence(process({"x"}, 1.0), process({"a"}, 0.0)), 1u);
}

TEST(KeyStep, ModelAnswerOutsideTheProcessFallsBack) {
  support::FunctionBackend backend([](const llm::LlmRequest&) { return std::string("9: far away"); });
  EXPECT_EQ(find_key_step(backend, process({"a", "b", "c"}, 1.0), process({"a", "b", "x"}, 0.0)), 3u);
  support::FunctionBackend good([](const llm::LlmRequest&) { return std::string("2: search differs"); });
  EXPECT_EQ(find_key_step(good, process({"a", "b", "c"}, 1.0), process({"a", "b", "x"}, 0.0)), 2u);
}

TEST(EnhanceMemory, AddsSuffixFromKeyStep) {
  auto memory = one_type_memory();
  support::FunctionBackend backend([](const llm::LlmRequest&) { return std::string("[1]"); });
  auto best = process({"go to countertop 1", "take mug 1 from countertop 1", "go to fridge 1"}, 1.0);
  auto ground = process({"go to fridge 1"}, 0.0);
  EXPECT_EQ(enhance_memory(backend, memory, best, ground, 2), 2u);
  ASSERT_EQ(memory.size(), 3u);
  const auto& t = memory.stored(1).tuple;
  EXPECT_EQ(t.action, "take mug 1 from countertop 1");
  EXPECT_EQ(t.step_index, 2u);
  EXPECT_EQ(t.source, memory::TupleSource::Exploration);
  EXPECT_EQ(t.origin_trajectory, exploration_origin(best));
  EXPECT_NO_THROW(memory.check_invariants());
  // Same process again: byte-identical tuples are not stored twice.
  EXPECT_EQ(enhance_memory(backend, memory, best, ground, 2), 0u);
  EXPECT_EQ(memory.size(), 3u);
}

TEST(EnhanceMemory, NoGainNoChange) {
  auto memory = one_type_memory();
  auto backend = support::scripted({});
  EXPECT_EQ(enhance_memory(backend, memory, process({"a"}, 0.5), process({"b"}, 0.5), 1), 0u);
  EXPECT_EQ(enhance_memory(backend, memory, process({"a"}, std::nullopt), process({"b"}, 0.0), 1), 0u);
  EXPECT_EQ(memory.size(), 1u);
}

TEST(EnhanceMemory, KeyStepOutOfRange) {
  auto memory = one_type_memory();
  auto backend = support::scripted({});
  try {
    enhance_memory(backend, memory, process({"a", "b"}, 1.0), process({"c"}, 0.0), 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError);
  }
}

TEST(NewTypeName, FirstWordsWithoutBrackets) {
  EXPECT_EQ(new_type_name("[Back to Search]\nPage 1 (Total results: 3)\n[Next >]"), "Back to Search Page 1 (Total");
  EXPECT_EQ(new_type_name(""), "new type");
}

TEST(RefineGoal, SucceededGoalLeavesMemoryAlone) {
  auto set = support::house_memory(30, 30);
  auto backend = support::rule_based();
  auto memory = set.batches[0];
  env::ToyHouse house;
  ExplorerConfig config;
  config.max_depth = 12;
  std::size_t checked = 0;
  for (const auto& g : env::sample_house_goals(15, 41, "refine-unit")) {
    auto before = memory;
    auto out = refine_goal(backend, house, memory, g.goal, g.seed, {}, config);
    EXPECT_NO_THROW(memory.check_invariants());
    if (out.ground_reward == 1.0) {
      EXPECT_EQ(out.tuples_added, 0u);
      EXPECT_EQ(memory, before);
      ++checked;
    } else if (out.tuples_added > 0) {
      EXPECT_GT(out.best_reward.value_or(0), out.ground_reward.value_or(0));
      EXPECT_GE(out.key_step, 1u);
    }
  }
  EXPECT_GT(checked, 0u);
}
