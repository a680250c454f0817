#pragma once

// Memory refinement by tree exploration. Each live path asks its node for
// either the memory's dominant action or a set of scored proposals; paths
// are ranked by the product of their node confidences and only the best
// `top_n` unfinished ones survive each depth.

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ldm/agent.hpp"

namespace ldm::explorer {

using agent::DecisionProcess;
using agent::ProcessStep;

struct ExplorerConfig {
  std::size_t top_n = 4;
  double concentration_threshold = 0.7;
  std::size_t max_depth = 15;
  std::size_t max_children = 4;
  std::size_t retrieval_k = 5;
  std::size_t summary_max_steps = 20;
  std::size_t invalid_action_retries = 3;

  void validate() const {
    if (top_n < 1) fail(ErrorCode::ConfigError, "top_n must be at least 1");
    if (!(concentration_threshold > 0.5 && concentration_threshold <= 1.0))
      fail(ErrorCode::ConfigError, "concentration_threshold must be in (0.5, 1]");
    if (max_depth < 1) fail(ErrorCode::ConfigError, "max_depth must be at least 1");
    if (max_children < 1) fail(ErrorCode::ConfigError, "max_children must be at least 1");
    if (retrieval_k < 1) fail(ErrorCode::ConfigError, "retrieval_k must be at least 1");
  }
};

/// Relative frequency of each action text, in order of first appearance.
inline std::vector<std::pair<std::string, double>> action_distribution(
    const std::vector<memory::StateActionTuple>& tuples) {
  if (tuples.empty()) fail(ErrorCode::EmptyInput, "no tuples to count actions over");
  std::vector<std::pair<std::string, double>> out;
  std::map<std::string, std::size_t> slot;
  for (const auto& t : tuples) {
    auto [it, fresh] = slot.emplace(t.action, out.size());
    if (fresh) out.emplace_back(t.action, 0.0);
    out[it->second].second += 1.0;
  }
  for (auto& [a, f] : out) f /= static_cast<double>(tuples.size());
  return out;
}

struct NodeDecision {
  bool majority = false;
  std::vector<llm::Proposal> options;  // majority: one option with confidence 1
};

inline std::vector<llm::Proposal> top_proposals(std::vector<llm::Proposal> proposals, std::size_t z_max) {
  std::stable_sort(proposals.begin(), proposals.end(),
                   [](const llm::Proposal& a, const llm::Proposal& b) { return a.confidence > b.confidence; });
  if (proposals.size() > z_max) proposals.resize(z_max);
  llm::renormalize(proposals);
  return proposals;
}

inline NodeDecision select_or_branch(llm::Backend& backend, const std::string& goal, const memory::HistoryInfo& history,
                                     const std::string& observation, const retrieval::ContextPrompt& context,
                                     const ExplorerConfig& config) {
  std::optional<std::pair<std::string, double>> top;
  if (!context.tuples.empty()) {
    for (const auto& entry : action_distribution(context.tuples))
      if (!top || entry.second > top->second) top = entry;
    if (top->second >= config.concentration_threshold) return {true, {{top->first, 1.0}}};
  }
  auto payload = llm::render_action_payload(agent::action_payload(goal, history, observation, context));
  try {
    auto proposals = llm::ask(backend, llm::PromptKind::TreeExploration, payload, llm::parse_proposals);
    return {false, top_proposals(std::move(proposals), config.max_children)};
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoValidProposal && e.code() != ErrorCode::FormatViolation) throw;
    if (!top) throw;
    return {true, {{top->first, 1.0}}};
  }
}

inline double path_confidence(const std::vector<double>& node_confidences) {
  double product = 1.0;
  for (auto c : node_confidences) product *= c;
  return product;
}

struct ExplorationPath {
  std::vector<ProcessStep> steps;
  std::vector<double> node_confidences;
  double confidence = 1.0;
  env::Snapshot snapshot;
  bool done = false;
  std::optional<double> reward;
  std::size_t trace_node = 0;

  std::vector<std::string> actions() const {
    std::vector<std::string> out;
    for (const auto& s : steps) out.push_back(s.action);
    return out;
  }
};

/// Finished paths pass through; of the rest, the `top_n` most confident
/// are kept (ties: lexicographically smaller action sequence first).
/// Result: kept live paths in rank order, then finished paths in input order.
inline std::vector<ExplorationPath> prune_frontier(std::vector<ExplorationPath> paths, std::size_t top_n,
                                                   std::vector<ExplorationPath>* pruned = nullptr) {
  std::vector<ExplorationPath> live, done;
  for (auto& p : paths) (p.done ? done : live).push_back(std::move(p));
  std::vector<std::vector<std::string>> keys;
  std::vector<std::size_t> order(live.size());
  for (std::size_t i = 0; i < live.size(); ++i) {
    order[i] = i;
    keys.push_back(live[i].actions());
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (live[a].confidence != live[b].confidence) return live[a].confidence > live[b].confidence;
    return keys[a] < keys[b];
  });
  std::vector<ExplorationPath> out;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (r < top_n) out.push_back(std::move(live[order[r]]));
    else if (pruned) pruned->push_back(std::move(live[order[r]]));
  }
  for (auto& p : done) out.push_back(std::move(p));
  return out;
}

struct TraceNode {
  std::optional<std::size_t> parent;
  std::string action;
  double confidence = 1.0;
  double path_confidence = 1.0;
  bool majority = false;
  bool pruned = false;
  bool done = false;
  std::optional<double> reward;
};

struct ExplorationStats {
  std::size_t expansions = 0;
  std::size_t max_children = 0;       // most children produced by one node
  std::size_t max_live_before_prune = 0;
  std::size_t pruned = 0;
  std::size_t rejected_actions = 0;
};

struct ExplorationResult {
  std::vector<DecisionProcess> processes;  // finished, best reward first
  std::vector<TraceNode> trace;            // node 0 is the root
  ExplorationStats stats;
};

inline nlohmann::ordered_json trace_json(const std::vector<TraceNode>& trace) {
  std::vector<nlohmann::ordered_json> nodes(trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& n = trace[i];
    nodes[i]["action"] = n.action;
    nodes[i]["confidence"] = n.confidence;
    nodes[i]["path_confidence"] = n.path_confidence;
    nodes[i]["pruned"] = n.pruned;
    if (n.majority) nodes[i]["majority"] = true;
    if (n.done) nodes[i]["reward"] = n.reward ? nlohmann::ordered_json(*n.reward) : nlohmann::ordered_json(nullptr);
    nodes[i]["children"] = nlohmann::ordered_json::array();
  }
  for (std::size_t i = trace.size(); i-- > 1;)
    if (trace[i].parent) nodes[*trace[i].parent]["children"].insert(nodes[*trace[i].parent]["children"].begin(), nodes[i]);
  return trace.empty() ? nlohmann::ordered_json::object() : nodes[0];
}

/// Explores from the environment's current (freshly reset) state.
inline ExplorationResult explore(llm::Backend& backend, env::Environment& environment,
                                 const memory::BatchMemory& memory, const ExplorerConfig& config) {
  config.validate();
  ExplorationResult result;
  const auto goal = environment.state().goal;
  result.trace.push_back({std::nullopt, "", 1.0, 1.0, false, false, false, std::nullopt});

  ExplorationPath root;
  root.snapshot = environment.snapshot();
  std::vector<ExplorationPath> frontier{root};
  std::vector<ExplorationPath> finished;

  for (std::size_t depth = 0; depth < config.max_depth && !frontier.empty(); ++depth) {
    std::vector<ExplorationPath> children;
    for (const auto& path : frontier) {
      environment.restore(path.snapshot);
      auto observation = environment.state().observation;
      std::vector<memory::Step> prefix;
      for (const auto& s : path.steps) prefix.push_back({s.observation, s.action});
      auto history = formation::summarize_history(backend, goal, prefix, config.summary_max_steps);
      auto context = retrieval::retrieve_context(backend, memory, goal, observation, config.retrieval_k);
      auto decision = select_or_branch(backend, goal, history, observation, context, config);
      ++result.stats.expansions;

      std::vector<llm::Rejection> rejected;
      std::size_t made = 0;
      auto try_action = [&](const std::string& action, double confidence, bool majority) {
        environment.restore(path.snapshot);
        auto outcome = environment.step(action);
        if (!outcome.accepted) {
          rejected.push_back({action, outcome.observation});
          ++result.stats.rejected_actions;
          return;
        }
        ExplorationPath child;
        child.steps = path.steps;
        child.steps.push_back({observation, action, history});
        child.node_confidences = path.node_confidences;
        child.node_confidences.push_back(confidence);
        child.confidence = path_confidence(child.node_confidences);
        child.snapshot = environment.snapshot();
        child.done = outcome.done;
        child.reward = outcome.reward;
        child.trace_node = result.trace.size();
        result.trace.push_back({path.trace_node, action, confidence, child.confidence, majority, false, child.done, child.reward});
        children.push_back(std::move(child));
        ++made;
      };
      for (const auto& option : decision.options) try_action(option.action, option.confidence, decision.majority);
      // Nothing the node suggested was accepted: fall back to the agent's
      // retry loop so the path is not lost to one bad suggestion.
      for (std::size_t retry = 0; made == 0 && retry < config.invalid_action_retries; ++retry) {
        std::string action;
        try {
          action = agent::next_action(backend, goal, history, observation, context, rejected);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::EmptyAction) throw;
          break;
        }
        try_action(action, 1.0, true);
      }
      result.stats.max_children = std::max(result.stats.max_children, made);
    }

    std::size_t live = std::count_if(children.begin(), children.end(), [](const ExplorationPath& p) { return !p.done; });
    result.stats.max_live_before_prune = std::max(result.stats.max_live_before_prune, live);
    std::vector<ExplorationPath> cut;
    auto kept = prune_frontier(std::move(children), config.top_n, &cut);
    result.stats.pruned += cut.size();
    for (const auto& p : cut) result.trace[p.trace_node].pruned = true;
    frontier.clear();
    for (auto& p : kept) (p.done ? finished : frontier).push_back(std::move(p));
  }

  std::stable_sort(finished.begin(), finished.end(), [](const ExplorationPath& a, const ExplorationPath& b) {
    auto ra = a.reward.value_or(-1.0), rb = b.reward.value_or(-1.0);
    if (ra != rb) return ra > rb;
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.actions() < b.actions();
  });
  for (const auto& p : finished) {
    DecisionProcess d;
    d.goal = goal;
    d.steps = p.steps;
    d.reward = p.reward;
    d.batch_id = memory.batch_id();
    d.terminated = agent::Termination::GoalReached;
    result.processes.push_back(std::move(d));
  }
  return result;
}

/// First 1-based step where the action sequences differ; a strict prefix
/// diverges right after its end.
inline std::size_t first_divergence(const DecisionProcess& best, const DecisionProcess& ground) {
  std::size_t i = 0;
  while (i < best.steps.size() && i < ground.steps.size() && best.steps[i].action == ground.steps[i].action) ++i;
  return i + 1;
}

inline std::size_t find_key_step(llm::Backend& backend, const DecisionProcess& best, const DecisionProcess& ground) {
  const auto length = std::max<std::size_t>(best.steps.size(), 1);
  auto clamp = [&](std::size_t s) { return std::clamp<std::size_t>(s, 1, length); };
  llm::ProcessListing listing{best.goal, {best.actions(), ground.actions()}};
  try {
    auto step = llm::ask(backend, llm::PromptKind::Compare, llm::render_process_payload(listing), llm::parse_key_step);
    if (static_cast<std::size_t>(step) <= best.steps.size()) return static_cast<std::size_t>(step);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::FormatViolation) throw;
  }
  return clamp(first_divergence(best, ground));
}

/// Origin label shared by every tuple taken from one explored process.
inline std::string exploration_origin(const DecisionProcess& p) {
  return "explore-" + text::hex64(text::fnv1a(p.goal + "\n" + text::join(p.actions(), "\n")));
}

/// Name for a fresh observation type: the observation's first words.
inline std::string new_type_name(const std::string& observation) {
  auto words = text::split(text::flatten(observation), " ");
  if (words.size() > 6) words.resize(6);
  auto name = text::join(words, " ");
  std::erase_if(name, [](char c) { return c == '[' || c == ']'; });
  return name.empty() ? "new type" : name;
}

/// Adds steps key_step..T of `best` to `memory` when `best` earned strictly
/// more than `ground`. Returns how many tuples were actually stored.
inline std::size_t enhance_memory(llm::Backend& backend, memory::BatchMemory& memory, const DecisionProcess& best,
                                  const DecisionProcess& ground, std::size_t key_step) {
  if (!best.reward || !(*best.reward > ground.reward.value_or(0.0))) return 0;
  if (key_step < 1 || key_step > best.steps.size())
    fail(ErrorCode::ConfigError, "key step " + std::to_string(key_step) + " outside the process");
  auto goal_type = retrieval::classify_goal(backend, memory, best.goal);
  auto origin = exploration_origin(best);
  std::size_t added = 0;
  for (std::size_t t = key_step; t <= best.steps.size(); ++t) {
    const auto& step = best.steps[t - 1];
    memory::StateActionTuple tuple{best.goal, step.history, step.observation, step.action,
                                   memory::TupleSource::Exploration, origin, t};
    auto obs = retrieval::classify_observation_detail(backend, memory, goal_type, step.observation);
    bool resolved = obs.id != 0 && (obs.from_model || obs.overlap > 0);
    auto [id, fresh] = memory.insert(std::move(tuple), goal_type, resolved ? obs.id : memory::kNewType,
                                     new_type_name(step.observation));
    added += fresh;
  }
  return added;
}

struct RefinementOutcome {
  std::string goal;
  std::optional<double> ground_reward;
  std::optional<double> best_reward;
  std::size_t key_step = 0;
  std::size_t tuples_added = 0;
  DecisionProcess ground;
  std::optional<DecisionProcess> best;
  ExplorationResult exploration;
};

/// Ground episode, exploration, key step and enhancement for one goal on
/// one batch memory. `environment` is reset to (goal, seed) for each phase.
inline RefinementOutcome refine_goal(llm::Backend& backend, env::Environment& environment, memory::BatchMemory& memory,
                                     const std::string& goal, std::uint64_t seed,
                                     const agent::AgentConfig& agent_config, const ExplorerConfig& config) {
  RefinementOutcome out;
  out.goal = goal;
  environment.reset(goal, seed);
  out.ground = agent::run_episode(backend, environment, memory, agent_config);
  out.ground_reward = out.ground.reward;
  environment.reset(goal, seed);
  out.exploration = explore(backend, environment, memory, config);
  if (out.exploration.processes.empty()) return out;
  out.best = out.exploration.processes.front();
  out.best_reward = out.best->reward;
  if (!out.best->reward || !(*out.best->reward > out.ground.reward.value_or(0.0))) return out;
  out.key_step = find_key_step(backend, *out.best, out.ground);
  out.tuples_added = enhance_memory(backend, memory, *out.best, out.ground, out.key_step);
  return out;
}

}  // namespace ldm::explorer
