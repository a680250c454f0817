#pragma once

// Demonstrations to memory: per-step history summaries, then goal and
// observation clustering to build each batch's two-level index.

#include <algorithm>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ldm/llm/gateway.hpp"
#include "ldm/llm/grammar.hpp"
#include "ldm/llm/payload.hpp"
#include "ldm/memory/batch_memory.hpp"
#include "ldm/memory/partition.hpp"
#include "ldm/parallel.hpp"

namespace ldm::formation {

using memory::Step;

struct FormationConfig {
  std::size_t batch_size = 100;
  std::size_t retrieval_k = 5;
  std::size_t summary_max_steps = 20;
  std::size_t workers = 1;
  std::size_t type_examples = 3;  // example goals kept per goal type

  void validate() const {
    if (batch_size < 1) fail(ErrorCode::ConfigError, "batch_size must be at least 1");
    if (retrieval_k < 1) fail(ErrorCode::ConfigError, "retrieval_k must be at least 1");
    if (summary_max_steps < 1) fail(ErrorCode::ConfigError, "summary_max_steps must be at least 1");
  }
};

inline std::vector<llm::StepText> step_text(std::span<const Step> steps) {
  std::vector<llm::StepText> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back({s.observation, s.action});
  return out;
}

/// History for the state after `prefix`. Only the most recent
/// `max_steps` pairs are shown to the model.
inline memory::HistoryInfo summarize_history(llm::Backend& backend, const std::string& goal,
                                             std::span<const Step> prefix, std::size_t max_steps) {
  if (prefix.size() > max_steps) prefix = prefix.subspan(prefix.size() - max_steps);
  auto steps = step_text(prefix);
  memory::HistoryInfo info;
  info.subgoal_status =
      llm::ask(backend, llm::PromptKind::Evaluation, llm::render_evaluation_payload(goal, steps), llm::parse_evaluation);
  if (prefix.empty()) {
    for (auto& s : info.subgoal_status) s.status = llm::SubgoalStatus::Incomplete;
    return info;
  }
  info.summary =
      llm::ask(backend, llm::PromptKind::Summarization, llm::render_summary_payload(goal, steps), llm::parse_summary);
  return info;
}

/// One tuple per step; tuple t sees the history of steps 1..t-1 only.
inline std::vector<memory::StateActionTuple> tuples_from_trajectory(llm::Backend& backend,
                                                                    const memory::Trajectory& trajectory,
                                                                    const FormationConfig& config) {
  trajectory.validate();
  std::vector<memory::StateActionTuple> out;
  out.reserve(trajectory.length());
  std::span<const Step> steps(trajectory.steps);
  for (std::size_t t = 0; t < steps.size(); ++t) {
    memory::StateActionTuple tuple;
    tuple.goal = trajectory.goal;
    tuple.history = summarize_history(backend, trajectory.goal, steps.first(t), config.summary_max_steps);
    tuple.observation = steps[t].observation;
    tuple.action = steps[t].action;
    tuple.source = memory::TupleSource::Demonstration;
    tuple.origin_trajectory = trajectory.id;
    tuple.step_index = t + 1;
    out.push_back(std::move(tuple));
  }
  return out;
}

/// Type names plus, for every input item, the index of its type.
struct Clustering {
  std::vector<std::string> names;
  std::vector<std::size_t> assignment;

  std::vector<std::size_t> members(std::size_t type) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
      if (assignment[i] == type) out.push_back(i);
    return out;
  }
};

inline constexpr std::string_view kCatchAllType = "Other";

namespace detail {

inline std::vector<llm::ClusterEntry> parse_cluster_lenient(llm::Backend& backend, llm::PromptKind kind,
                                                            const std::string& payload) {
  auto parse = [](std::string_view raw) {
    try {
      return llm::parse_cluster(raw);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::DuplicateMember) fail(ErrorCode::FormatViolation, e.what());
      throw;
    }
  };
  try {
    return llm::ask(backend, kind, payload, parse);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::FormatViolation) throw;
    return {};
  }
}

inline std::size_t coverage(const std::vector<llm::ClusterEntry>& entries, std::size_t n) {
  std::set<long long> ids;
  for (const auto& e : entries)
    for (auto id : e.member_ids)
      if (id >= 1 && static_cast<std::size_t>(id) <= n) ids.insert(id);
  return ids.size();
}

}  // namespace detail

/// Clusters numbered items with one prompt. Items the reply leaves out
/// cause one reprompt; whatever is still missing goes to "Other".
inline Clustering cluster_items(llm::Backend& backend, llm::PromptKind kind, const std::vector<std::string>& items) {
  if (items.empty()) fail(ErrorCode::EmptyInput, "nothing to cluster");
  auto payload = llm::render_numbered_list(items);
  auto entries = detail::parse_cluster_lenient(backend, kind, payload);
  if (detail::coverage(entries, items.size()) < items.size()) {
    auto retry = detail::parse_cluster_lenient(backend, kind, payload + std::string(llm::kFormatReminder));
    if (detail::coverage(retry, items.size()) > detail::coverage(entries, items.size())) entries = std::move(retry);
  }

  Clustering out;
  constexpr auto unassigned = static_cast<std::size_t>(-1);
  out.assignment.assign(items.size(), unassigned);
  for (const auto& e : entries) {
    std::size_t slot = out.names.size();
    bool used = false;
    for (auto id : e.member_ids) {
      if (id < 1 || static_cast<std::size_t>(id) > items.size()) continue;
      auto& a = out.assignment[static_cast<std::size_t>(id - 1)];
      if (a != unassigned) continue;
      a = slot;
      used = true;
    }
    if (used) {
      auto name = std::string(text::trim(e.type_name));
      out.names.push_back(name.empty() ? "Type " + std::to_string(slot + 1) : name);
    }
  }
  std::size_t other = unassigned;
  for (auto& a : out.assignment) {
    if (a != unassigned) continue;
    if (other == unassigned) {
      other = out.names.size();
      out.names.emplace_back(kCatchAllType);
    }
    a = other;
  }
  return out;
}

inline Clustering cluster_goals(llm::Backend& backend, const std::vector<std::string>& goals) {
  return cluster_items(backend, llm::PromptKind::ClusterGoals, goals);
}

inline Clustering cluster_observations(llm::Backend& backend, const std::vector<std::string>& observations) {
  return cluster_items(backend, llm::PromptKind::ClusterObservations, observations);
}

/// Tuples for every trajectory, clustered and indexed into one memory.
inline memory::BatchMemory build_batch_memory(llm::Backend& backend, const std::vector<memory::Trajectory>& batch,
                                              int batch_id, memory::CapacityMeta capacity,
                                              const FormationConfig& config) {
  config.validate();
  if (batch.empty()) fail(ErrorCode::EmptyInput, "batch " + std::to_string(batch_id) + " has no trajectories");

  std::vector<std::vector<memory::StateActionTuple>> per_trajectory(batch.size());
  parallel_for(batch.size(), config.workers,
               [&](std::size_t i) { per_trajectory[i] = tuples_from_trajectory(backend, batch[i], config); });

  std::vector<std::string> goals;
  for (const auto& t : batch) goals.push_back(t.goal);
  auto goal_clusters = cluster_goals(backend, goals);

  memory::BatchMemory memory(batch_id, capacity);
  std::vector<memory::TypeId> goal_type_of(batch.size());
  std::vector<std::map<std::string, memory::TypeId>> obs_type_of(goal_clusters.names.size());

  for (std::size_t g = 0; g < goal_clusters.names.size(); ++g) {
    auto members = goal_clusters.members(g);
    std::vector<std::string> examples;
    for (auto i : members)
      if (examples.size() < config.type_examples && std::find(examples.begin(), examples.end(), goals[i]) == examples.end())
        examples.push_back(goals[i]);
    auto gid = memory.add_goal_type(goal_clusters.names[g], std::move(examples));
    for (auto i : members) goal_type_of[i] = gid;

    std::vector<std::string> observations;
    std::set<std::string> seen;
    for (auto i : members)
      for (const auto& t : per_trajectory[i])
        if (seen.insert(t.observation).second) observations.push_back(t.observation);
    auto obs_clusters = cluster_observations(backend, observations);
    std::vector<memory::TypeId> ids;
    for (const auto& name : obs_clusters.names) ids.push_back(memory.add_observation_type(gid, name));
    for (std::size_t o = 0; o < observations.size(); ++o) obs_type_of[g][observations[o]] = ids[obs_clusters.assignment[o]];
  }

  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto g = static_cast<std::size_t>(goal_type_of[i] - 1);
    for (auto& t : per_trajectory[i]) {
      auto obs = obs_type_of[g].at(t.observation);
      memory.insert(std::move(t), goal_type_of[i], obs);
    }
  }
  return memory;
}

/// Partitions all trajectories and forms one memory per batch.
inline memory::MemorySet form_memory(llm::Backend& backend, const std::vector<memory::Trajectory>& trajectories,
                                     const FormationConfig& config, std::size_t batch_workers = 1) {
  config.validate();
  auto batches = memory::partition_trajectories(trajectories, config.batch_size);
  memory::CapacityMeta capacity{trajectories.size(), config.batch_size, batches.size()};
  memory::MemorySet set;
  set.batches.resize(batches.size());
  parallel_for(batches.size(), batch_workers, [&](std::size_t b) {
    set.batches[b] = build_batch_memory(backend, batches[b], static_cast<int>(b + 1), capacity, config);
  });
  return set;
}

}  // namespace ldm::formation
