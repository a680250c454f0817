#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ldm/error.hpp"
#include "ldm/llm/grammar.hpp"
#include "ldm/llm/payload.hpp"

namespace ldm::memory {

struct Step {
  std::string observation;
  std::string action;

  friend bool operator==(const Step&, const Step&) = default;
};

/// One demonstration: a goal and its observation/action sequence.
struct Trajectory {
  std::string id;
  std::string goal;
  std::vector<Step> steps;
  std::string env;  // environment family that produced it
  std::uint64_t seed = 0;
  std::optional<double> reward;

  std::size_t length() const { return steps.size(); }

  void validate() const {
    if (steps.empty()) fail(ErrorCode::EmptyInput, "trajectory " + id + " has no steps");
    if (goal.empty()) fail(ErrorCode::EmptyInput, "trajectory " + id + " has no goal");
    for (const auto& s : steps)
      if (s.observation.empty() || s.action.empty())
        fail(ErrorCode::EmptyInput, "trajectory " + id + " has an empty observation or action");
  }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct HistoryInfo {
  std::string summary{llm::kNoPastActions};
  std::vector<llm::SubgoalState> subgoal_status;

  friend bool operator==(const HistoryInfo&, const HistoryInfo&) = default;
};

enum class TupleSource { Demonstration, Exploration };

constexpr std::string_view to_string(TupleSource source) {
  return source == TupleSource::Demonstration ? "Demonstration" : "Exploration";
}

/// Memory record: goal, history summary and current observation mapped to
/// the action that was taken.
struct StateActionTuple {
  std::string goal;
  HistoryInfo history;
  std::string observation;
  std::string action;
  TupleSource source = TupleSource::Demonstration;
  std::string origin_trajectory;
  std::size_t step_index = 1;  // 1-based

  friend bool operator==(const StateActionTuple&, const StateActionTuple&) = default;
};

}  // namespace ldm::memory
