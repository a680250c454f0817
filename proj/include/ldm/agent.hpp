#pragma once

// Memory-guided episodes and the choice among per-batch processes.

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ldm/env/environment.hpp"
#include "ldm/formation.hpp"
#include "ldm/retrieval.hpp"

namespace ldm::agent {

struct AgentConfig {
  std::size_t max_steps = 50;
  std::size_t invalid_action_retries = 3;
  std::size_t retrieval_k = 5;
  std::size_t summary_max_steps = 20;

  void validate() const {
    if (max_steps < 1) fail(ErrorCode::ConfigError, "max_steps must be at least 1");
    if (retrieval_k < 1) fail(ErrorCode::ConfigError, "retrieval_k must be at least 1");
    if (summary_max_steps < 1) fail(ErrorCode::ConfigError, "summary_max_steps must be at least 1");
  }
};

/// Step budget used when a config does not set one.
inline std::size_t default_max_steps(std::string_view family) { return family == "toyshop" ? 15 : 50; }

enum class Termination { GoalReached, StepLimit, InvalidActionLimit, Aborted };

constexpr std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::GoalReached: return "GoalReached";
    case Termination::StepLimit: return "StepLimit";
    case Termination::InvalidActionLimit: return "InvalidActionLimit";
    case Termination::Aborted: return "Aborted";
  }
  return "";
}

struct ProcessStep {
  std::string observation;
  std::string action;
  memory::HistoryInfo history;  // history the action was chosen under

  friend bool operator==(const ProcessStep&, const ProcessStep&) = default;
};

struct DecisionProcess {
  std::string goal;
  std::vector<ProcessStep> steps;
  std::optional<double> reward;
  int batch_id = 1;
  Termination terminated = Termination::StepLimit;
  std::string diagnostic;  // set for Aborted

  std::vector<std::string> actions() const {
    std::vector<std::string> out;
    for (const auto& s : steps) out.push_back(s.action);
    return out;
  }

  std::vector<memory::Step> prefix() const {
    std::vector<memory::Step> out;
    for (const auto& s : steps) out.push_back({s.observation, s.action});
    return out;
  }

  friend bool operator==(const DecisionProcess&, const DecisionProcess&) = default;
};

inline nlohmann::ordered_json trace_json(const DecisionProcess& p) {
  nlohmann::ordered_json steps = nlohmann::ordered_json::array();
  for (const auto& s : p.steps)
    steps.push_back({{"observation", s.observation}, {"action", s.action}, {"summary", s.history.summary}});
  nlohmann::ordered_json j;
  j["goal"] = p.goal;
  j["batch_id"] = p.batch_id;
  j["steps"] = std::move(steps);
  j["reward"] = p.reward ? nlohmann::ordered_json(*p.reward) : nlohmann::ordered_json(nullptr);
  j["terminated"] = to_string(p.terminated);
  if (!p.diagnostic.empty()) j["diagnostic"] = p.diagnostic;
  return j;
}

inline llm::ActionPayload action_payload(const std::string& goal, const memory::HistoryInfo& history,
                                         const std::string& observation, const retrieval::ContextPrompt& context,
                                         const std::vector<llm::Rejection>& rejected = {}) {
  llm::ActionPayload payload;
  for (const auto& t : context.tuples) payload.examples.push_back(retrieval::to_block(t));
  payload.current = {goal, history.summary,
                     history.subgoal_status.empty() ? std::string{} : llm::render_evaluation(history.subgoal_status),
                     observation, ""};
  payload.rejected = rejected;
  return payload;
}

/// The model's next action, first line only, trimmed.
inline std::string next_action(llm::Backend& backend, const std::string& goal, const memory::HistoryInfo& history,
                               const std::string& observation, const retrieval::ContextPrompt& context,
                               const std::vector<llm::Rejection>& rejected = {}) {
  auto payload = llm::render_action_payload(action_payload(goal, history, observation, context, rejected));
  auto raw = llm::ask_text(backend, llm::PromptKind::Action, payload);
  auto trimmed = text::trim(raw);
  auto line = text::trim(trimmed.substr(0, trimmed.find('\n')));
  if (text::istarts_with(line, "Action:")) line = text::trim(line.substr(7));
  if (line.empty()) fail(ErrorCode::EmptyAction, "model returned no action");
  return std::string(line);
}

/// Runs one episode in an environment that has already been reset.
inline DecisionProcess run_episode(llm::Backend& backend, env::Environment& environment,
                                   const memory::BatchMemory& memory, const AgentConfig& config) {
  config.validate();
  DecisionProcess process;
  auto state = environment.state();
  process.goal = state.goal;
  process.batch_id = memory.batch_id();
  std::string observation = state.observation;
  std::vector<memory::Step> prefix;

  try {
    while (process.steps.size() < config.max_steps) {
      auto history = formation::summarize_history(backend, process.goal, prefix, config.summary_max_steps);
      auto context = retrieval::retrieve_context(backend, memory, process.goal, observation, config.retrieval_k);
      std::vector<llm::Rejection> rejected;
      for (;;) {
        std::string action;
        env::StepOutcome outcome;
        try {
          action = next_action(backend, process.goal, history, observation, context, rejected);
          outcome = environment.step(action);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::EmptyAction) throw;
          outcome = {false, "The action is empty.", false, std::nullopt};
        }
        if (outcome.accepted) {
          process.steps.push_back({observation, action, history});
          prefix.push_back({observation, action});
          if (outcome.done) {
            process.reward = outcome.reward;
            process.terminated = Termination::GoalReached;
            return process;
          }
          observation = outcome.observation;
          break;
        }
        rejected.push_back({action, outcome.observation});
        if (rejected.size() > config.invalid_action_retries) {
          process.steps.push_back({observation, action, history});
          process.reward = environment.state().reward.value_or(0.0);
          process.terminated = Termination::InvalidActionLimit;
          return process;
        }
      }
    }
  } catch (const Error& e) {
    process.terminated = Termination::Aborted;
    process.diagnostic = e.what();
    return process;
  }
  process.terminated = Termination::StepLimit;
  process.reward = environment.exhaustion_reward();
  return process;
}

/// Index of the chosen process. Known rewards decide directly (highest,
/// then lowest batch id); otherwise the model is asked.
inline std::size_t choose_final_index(llm::Backend& backend, const std::vector<DecisionProcess>& processes) {
  if (processes.empty()) fail(ErrorCode::EmptyInput, "no processes to choose from");
  if (processes.size() == 1) return 0;
  auto better = [&](std::size_t a, std::size_t b) {
    // true when a should be preferred to b among equal scores
    return processes[a].batch_id < processes[b].batch_id;
  };
  bool all_known = std::all_of(processes.begin(), processes.end(), [](const DecisionProcess& p) { return p.reward.has_value(); });
  if (all_known) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < processes.size(); ++i) {
      if (*processes[i].reward > *processes[best].reward ||
          (*processes[i].reward == *processes[best].reward && better(i, best)))
        best = i;
    }
    return best;
  }
  llm::ProcessListing listing{processes.front().goal, {}};
  for (const auto& p : processes) listing.processes.push_back(p.actions());
  auto payload = llm::render_process_payload(listing);
  for (int attempt = 0; attempt < 2; ++attempt) {
    try {
      auto raw = llm::ask_text(backend, llm::PromptKind::FinalChoice,
                               attempt == 0 ? payload : payload + std::string(llm::kFormatReminder));
      auto id = llm::parse_classification(raw);
      if (id >= 1 && static_cast<std::size_t>(id) <= processes.size()) return static_cast<std::size_t>(id - 1);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::FormatViolation) throw;
    }
  }
  // Fallback: most goal words covered by the actions, then lowest batch id.
  auto goal = text::token_set(listing.goal);
  std::size_t best = 0, best_hit = 0;
  for (std::size_t i = 0; i < processes.size(); ++i) {
    auto hit = text::overlap(goal, text::token_set(text::join(listing.processes[i], " ")));
    if (i == 0 || hit > best_hit || (hit == best_hit && better(i, best))) {
      best = i;
      best_hit = hit;
    }
  }
  return best;
}

inline DecisionProcess choose_final(llm::Backend& backend, const std::vector<DecisionProcess>& processes) {
  return processes[choose_final_index(backend, processes)];
}

}  // namespace ldm::agent
