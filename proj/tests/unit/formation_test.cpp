#include <gtest/gtest.h>

#include <ldm.hpp>

#include "test_support.hpp"

using namespace ldm;
using namespace ldm::formation;
using llm::PromptKind;

namespace {

/// Replies in grammar; summaries name how many past actions they saw.
std::string counting_reply(const llm::LlmRequest& r) {
  switch (r.kind) {
    case PromptKind::Summarization:
      return "Summary: s" + std::to_string(llm::payload_actions(r.payload).size());
    case PromptKind::Evaluation:
      return "Subgoal 1: finish -Incomplete";
    case PromptKind::ClusterGoals:
    case PromptKind::ClusterObservations: {
      std::string ids;
      auto n = llm::parse_numbered_list(text::split(r.payload, std::string(llm::kFormatReminder))[0]).size();
      for (std::size_t i = 1; i <= n; ++i) ids += "[" + std::to_string(i) + "]";
      return "High-level Type1: everything " + ids;
    }
    default:
      return "[1]: only";
  }
}

memory::Trajectory short_trajectory(std::size_t length) {
  memory::Trajectory t;
  t.id = "t";
  t.goal = "put some mug in cabinet.";
  for (std::size_t i = 1; i <= length; ++i) t.steps.push_back({"obs " + std::to_string(i), "act " + std::to_string(i)});
  return t;
}

}  // namespace

TEST(Formation, OneTuplePerStepWithPrefixHistory) {
  support::FunctionBackend inner(counting_reply);
  llm::RecordingBackend backend(inner);
  FormationConfig config;
  auto tuples = tuples_from_trajectory(backend, short_trajectory(6), config);
  ASSERT_EQ(tuples.size(), 6u);
  for (std::size_t t = 0; t < tuples.size(); ++t) {
    EXPECT_EQ(tuples[t].step_index, t + 1);
    EXPECT_EQ(tuples[t].action, "act " + std::to_string(t + 1));
    EXPECT_EQ(tuples[t].observation, "obs " + std::to_string(t + 1));
    EXPECT_EQ(tuples[t].history.summary, t == 0 ? std::string(llm::kNoPastActions) : "s" + std::to_string(t));
    EXPECT_EQ(tuples[t].origin_trajectory, "t");
  }
  EXPECT_EQ(backend.count(PromptKind::Evaluation), 6u);
  EXPECT_EQ(backend.count(PromptKind::Summarization), 5u);
}

TEST(Formation, SummaryWindowKeepsNewestSteps) {
  support::FunctionBackend backend(counting_reply);
  FormationConfig config;
  config.summary_max_steps = 3;
  auto tuples = tuples_from_trajectory(backend, short_trajectory(8), config);
  EXPECT_EQ(tuples[7].history.summary, "s3");
  EXPECT_EQ(tuples[2].history.summary, "s2");
}

TEST(Formation, FirstStepSubgoalsAreIncomplete) {
  auto backend = support::rule_based();
  auto trajs = env::generate_house_experts(5, 2, 0.0);
  for (const auto& traj : trajs) {
    auto tuples = tuples_from_trajectory(backend, traj, {});
    for (const auto& s : tuples[0].history.subgoal_status) EXPECT_EQ(s.status, llm::SubgoalStatus::Incomplete);
  }
}

TEST(Formation, TupleCountIsConserved) {
  auto backend = support::rule_based();
  auto trajs = env::generate_house_experts(37, 5, 0.4);
  FormationConfig config;
  config.batch_size = 10;
  auto set = form_memory(backend, trajs, config);
  ASSERT_EQ(set.batches.size(), support::batch_count_oracle(37, 10));
  std::size_t steps = 0;
  for (const auto& t : trajs) steps += t.length();
  EXPECT_EQ(set.tuple_count(), steps);
  for (std::size_t b = 0; b < set.batches.size(); ++b) {
    const auto& m = set.batches[b];
    EXPECT_EQ(m.batch_id(), static_cast<int>(b + 1));
    EXPECT_EQ(m.capacity(), (memory::CapacityMeta{37, 10, 4}));
    EXPECT_NO_THROW(m.check_invariants());
    std::size_t batch_steps = 0;
    for (std::size_t i = b * 10; i < std::min<std::size_t>(37, (b + 1) * 10); ++i) batch_steps += trajs[i].length();
    EXPECT_EQ(m.size(), batch_steps);
    std::size_t in_cells = 0;
    for (const auto& g : m.goal_types()) in_cells += m.cell_size(g.id);
    EXPECT_EQ(in_cells, m.size());
  }
}

TEST(Formation, DeterministicAcrossWorkerCounts) {
  auto backend = support::rule_based();
  auto trajs = env::generate_house_experts(24, 6, 0.3);
  FormationConfig config;
  config.batch_size = 8;
  auto serial = form_memory(backend, trajs, config, 1);
  config.workers = 4;
  EXPECT_EQ(form_memory(backend, trajs, config, 3), serial);
}

TEST(Formation, Errors) {
  auto backend = support::rule_based();
  FormationConfig config;
  try {
    form_memory(backend, {}, config);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyInput);
  }
  config.batch_size = 0;
  try {
    form_memory(backend, env::generate_house_experts(2, 1, 0), config);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError);
  }
}

TEST(Clustering, MissingItemsGoToOtherAfterOneReprompt) {
  int calls = 0;
  support::FunctionBackend backend([&](const llm::LlmRequest&) {
    ++calls;
    return std::string("High-level Type1: cooling [1][3]");
  });
  auto c = cluster_items(backend, PromptKind::ClusterGoals, {"cool a", "heat b", "cool c", "look d"});
  EXPECT_EQ(calls, 2);
  EXPECT_EQ(c.names, (std::vector<std::string>{"cooling", std::string(kCatchAllType)}));
  EXPECT_EQ(c.assignment, (std::vector<std::size_t>{0, 1, 0, 1}));
}

TEST(Clustering, RepromptReplyUsedWhenItCoversMore) {
  int calls = 0;
  support::FunctionBackend backend([&](const llm::LlmRequest& r) {
    ++calls;
    if (r.payload.find(llm::kFormatReminder) == std::string::npos) return std::string("garbage");
    return std::string("High-level Type1: A [1]\nHigh-level Type2: B [2]");
  });
  auto c = cluster_items(backend, PromptKind::ClusterObservations, {"x", "y"});
  EXPECT_EQ(calls, 2);
  EXPECT_EQ(c.names, (std::vector<std::string>{"A", "B"}));
}

TEST(Clustering, UnusableRepliesPutEverythingInOther) {
  support::FunctionBackend backend([](const llm::LlmRequest&) { return std::string("High-level Type1: A [1]\nHigh-level Type2: B [1]"); });
  auto c = cluster_items(backend, PromptKind::ClusterGoals, {"x", "y", "z"});
  EXPECT_EQ(c.names, (std::vector<std::string>{std::string(kCatchAllType)}));
  EXPECT_EQ(c.members(0).size(), 3u);
}

TEST(Clustering, EveryItemAssignedExactlyOnce) {
  auto rng = Rng::substream(4, "cluster-replies");
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 1 + rng.below(12);
    std::string reply;
    for (int type = 1, k = static_cast<int>(1 + rng.below(4)); type <= k; ++type) {
      reply += "High-level Type" + std::to_string(type) + ": t" + std::to_string(type) + " ";
      for (int m = 0, c = static_cast<int>(rng.below(5)); m < c; ++m) reply += "[" + std::to_string(1 + rng.below(n + 3)) + "]";
      reply += "\n";
    }
    support::FunctionBackend backend([&](const llm::LlmRequest&) { return reply; });
    std::vector<std::string> items(n, "item");
    auto c = cluster_items(backend, PromptKind::ClusterGoals, items);
    ASSERT_EQ(c.assignment.size(), n);
    std::size_t total = 0;
    for (std::size_t t = 0; t < c.names.size(); ++t) {
      auto members = c.members(t);
      EXPECT_FALSE(members.empty()) << reply;
      total += members.size();
    }
    EXPECT_EQ(total, n);
  }
}
