#include <gtest/gtest.h>

#include <deque>

#include <ldm.hpp>

#include "test_support.hpp"

using namespace ldm;
using namespace ldm::agent;
using llm::PromptKind;

namespace {

env::HouseWorld kitchen() {
  env::HouseWorld w;
  w.receptacles = {{"countertop", 1, false, true}, {"fridge", 1, true, false}, {"cabinet", 1, true, false}};
  w.objects = {{"mug", 1, "countertop 1"}};
  w.lamp_location = "countertop 1";
  return w;
}

/// Grammar-conforming replies for every kind; Action replies come from `actions`.
class PlannedBackend final : public llm::Backend {
 public:
  explicit PlannedBackend(std::deque<std::string> actions) : actions_(std::move(actions)) {}
  llm::LlmResponse complete(const llm::LlmRequest& r) override {
    switch (r.kind) {
      case PromptKind::Summarization: return {"Summary: so far so good", "planned", {}};
      case PromptKind::Evaluation: return {"Subgoal 1: do it -Incomplete", "planned", {}};
      case PromptKind::Action: {
        payloads.push_back(r.payload);
        if (actions_.empty()) return {"look", "planned", {}};
        auto a = actions_.front();
        actions_.pop_front();
        return {a, "planned", {}};
      }
      default: return {"[1]: first", "planned", {}};
    }
  }
  std::string id() const override { return "planned"; }
  std::vector<std::string> payloads;

 private:
  std::deque<std::string> actions_;
};

DecisionProcess process(int batch, std::optional<double> reward, std::vector<std::string> actions = {"a"}) {
  DecisionProcess p;
  p.goal = "heat some egg and put it in countertop.";
  p.batch_id = batch;
  p.reward = reward;
  for (auto& a : actions) p.steps.push_back({"o", a, {}});
  return p;
}

}  // namespace

TEST(RunEpisode, ReachesTheGoal) {
  PlannedBackend backend({"go to countertop 1", "take mug 1 from countertop 1", "go to fridge 1",
                          "cool mug 1 with fridge 1", "go to cabinet 1", "open cabinet 1", "put mug 1 in/on cabinet 1"});
  env::ToyHouse house(kitchen());
  house.reset("cool some mug and put it in cabinet.", 1);
  memory::BatchMemory empty(1, {});
  auto p = run_episode(backend, house, empty, {});
  EXPECT_EQ(p.terminated, Termination::GoalReached);
  EXPECT_EQ(p.reward, 1.0);
  EXPECT_EQ(p.steps.size(), 7u);
  EXPECT_EQ(p.steps[0].history.summary, llm::kNoPastActions);
  EXPECT_EQ(p.steps[1].history.summary, "so far so good");
  EXPECT_EQ(p.steps[1].observation, "You arrive at the countertop 1. On the countertop 1, you see a mug 1, and a desklamp 1.");
}

TEST(RunEpisode, InvalidActionsAreRetriedWithFeedback) {
  PlannedBackend backend({"fly away", "fly higher", "go to fridge 1"});
  env::ToyHouse house(kitchen());
  house.reset("cool some mug and put it in cabinet.", 1);
  memory::BatchMemory empty(1, {});
  AgentConfig config;
  config.max_steps = 1;
  auto p = run_episode(backend, house, empty, config);
  ASSERT_EQ(backend.payloads.size(), 3u);
  EXPECT_TRUE(llm::parse_action_payload(backend.payloads[0]).rejected.empty());
  auto last = llm::parse_action_payload(backend.payloads[2]).rejected;
  ASSERT_EQ(last.size(), 2u);
  EXPECT_EQ(last[0].action, "fly away");
  EXPECT_EQ(last[1].action, "fly higher");
  EXPECT_EQ(p.terminated, Termination::StepLimit);
  EXPECT_EQ(p.actions(), std::vector<std::string>{"go to fridge 1"});
  EXPECT_EQ(p.reward, 0.0);
}

TEST(RunEpisode, RetryLimitEndsTheEpisode) {
  PlannedBackend backend({"x", "y", "z", "w", "go to fridge 1"});
  env::ToyHouse house(kitchen());
  house.reset("cool some mug and put it in cabinet.", 1);
  memory::BatchMemory empty(1, {});
  auto p = run_episode(backend, house, empty, {});
  EXPECT_EQ(p.terminated, Termination::InvalidActionLimit);
  EXPECT_EQ(backend.payloads.size(), 4u);
  EXPECT_EQ(p.reward, 0.0);
}

TEST(RunEpisode, StepLimitOnShopLeavesRewardUnknown) {
  Rng rng(3);
  auto catalog = env::generate_catalog(rng, 5);
  env::ToyShop shop(catalog);
  shop.reset(env::render_shop_goal(env::goal_for_product(rng, catalog.products[0])), 1);
  memory::BatchMemory empty(1, {});
  AgentConfig config;
  config.max_steps = 2;
  config.invalid_action_retries = 100;
  PlannedBackend searcher({"search[anything]", "click[Back to Search]"});
  auto p = run_episode(searcher, shop, empty, config);
  EXPECT_EQ(p.terminated, Termination::StepLimit);
  EXPECT_EQ(p.steps.size(), 2u);
  EXPECT_FALSE(p.reward.has_value());
}

TEST(RunEpisode, ActionLineIsCleaned) {
  PlannedBackend backend({"  Action: go to fridge 1\nbecause it is cold"});
  env::ToyHouse house(kitchen());
  house.reset("cool some mug and put it in cabinet.", 1);
  memory::BatchMemory empty(1, {});
  AgentConfig config;
  config.max_steps = 1;
  EXPECT_EQ(run_episode(backend, house, empty, config).actions(), std::vector<std::string>{"go to fridge 1"});
}

TEST(RunEpisode, BackendFailureAborts) {
  support::FunctionBackend backend([](const llm::LlmRequest&) -> std::string { fail(ErrorCode::TransportError, "down"); });
  env::ToyHouse house(kitchen());
  house.reset("cool some mug and put it in cabinet.", 1);
  memory::BatchMemory empty(1, {});
  auto p = run_episode(backend, house, empty, {});
  EXPECT_EQ(p.terminated, Termination::Aborted);
  EXPECT_NE(p.diagnostic.find("down"), std::string::npos);
  EXPECT_FALSE(p.reward.has_value());
}

TEST(RunEpisode, UsesRetrievedContext) {
  auto set = support::house_memory(20, 20);
  PlannedBackend backend({"go to fridge 1"});
  env::ToyHouse house(kitchen());
  house.reset("cool some mug and put it in cabinet.", 1);
  AgentConfig config;
  config.max_steps = 1;
  run_episode(backend, house, set.batches[0], config);
  auto payload = llm::parse_action_payload(backend.payloads.at(0));
  EXPECT_GE(payload.examples.size(), 1u);
  EXPECT_LE(payload.examples.size(), 5u);
}

TEST(ChooseFinal, MatchesArgmaxOracle) {
  auto rng = Rng::substream(31, "choose");
  auto backend = support::scripted({});
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<DecisionProcess> ps;
    std::size_t n = 1 + rng.below(8);
    for (std::size_t i = 0; i < n; ++i) ps.push_back(process(static_cast<int>(i + 1), static_cast<double>(rng.below(5)) / 4.0));
    rng.shuffle(ps);
    // Oracle: highest reward, then lowest batch id.
    auto want = ps[0];
    for (const auto& p : ps)
      if (*p.reward > *want.reward || (*p.reward == *want.reward && p.batch_id < want.batch_id)) want = p;
    EXPECT_EQ(choose_final(backend, ps), want);
  }
}

TEST(ChooseFinal, UnknownRewardsAskTheModel) {
  int calls = 0;
  support::FunctionBackend backend([&](const llm::LlmRequest& r) {
    ++calls;
    EXPECT_EQ(r.kind, PromptKind::FinalChoice);
    return std::string("[2]: bought the right one");
  });
  std::vector<DecisionProcess> ps = {process(1, std::nullopt), process(2, std::nullopt), process(3, 1.0)};
  EXPECT_EQ(choose_final_index(backend, ps), 1u);
  EXPECT_EQ(calls, 1);
}

TEST(ChooseFinal, UnusableReplyFallsBackToGoalWords) {
  support::FunctionBackend backend([](const llm::LlmRequest&) { return std::string("[7]"); });
  std::vector<DecisionProcess> ps = {process(1, std::nullopt, {"look"}),
                                     process(2, std::nullopt, {"heat egg 1 with microwave 1", "put egg 1 in/on countertop 1"}),
                                     process(3, std::nullopt, {"heat egg 1"})};
  EXPECT_EQ(choose_final_index(backend, ps), 1u);
}

TEST(ChooseFinal, Errors) {
  auto backend = support::scripted({});
  try {
    choose_final_index(backend, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyInput);
  }
  EXPECT_EQ(choose_final_index(backend, {process(4, std::nullopt)}), 0u);
}
