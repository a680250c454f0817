#pragma once

#include <array>
#include <chrono>
#include <optional>
#include <string>
#include <string_view>

#include "ldm/error.hpp"

namespace ldm::llm {

enum class PromptKind {
  Evaluation,
  Summarization,
  ClusterGoals,
  ClusterObservations,
  IndexGoal,
  IndexObservation,
  Action,
  TreeExploration,
  Compare,
  FinalChoice,
};

inline constexpr std::array<PromptKind, 10> kAllPromptKinds = {
    PromptKind::Evaluation,  PromptKind::Summarization,    PromptKind::ClusterGoals,
    PromptKind::ClusterObservations, PromptKind::IndexGoal, PromptKind::IndexObservation,
    PromptKind::Action,      PromptKind::TreeExploration,  PromptKind::Compare,
    PromptKind::FinalChoice};

constexpr std::string_view to_string(PromptKind kind) {
  switch (kind) {
    case PromptKind::Evaluation: return "Evaluation";
    case PromptKind::Summarization: return "Summarization";
    case PromptKind::ClusterGoals: return "ClusterGoals";
    case PromptKind::ClusterObservations: return "ClusterObservations";
    case PromptKind::IndexGoal: return "IndexGoal";
    case PromptKind::IndexObservation: return "IndexObservation";
    case PromptKind::Action: return "Action";
    case PromptKind::TreeExploration: return "TreeExploration";
    case PromptKind::Compare: return "Compare";
    case PromptKind::FinalChoice: return "FinalChoice";
  }
  return "";
}

inline std::optional<PromptKind> prompt_kind_from_string(std::string_view name) {
  for (auto kind : kAllPromptKinds)
    if (to_string(kind) == name) return kind;
  return std::nullopt;
}

/// Instruction text sent ahead of the payload. All kinds except FinalChoice
/// reproduce the published prompt table word for word, typos included.
constexpr std::string_view instruction(PromptKind kind) {
  switch (kind) {
    case PromptKind::Evaluation:
      return "I will give you a task goal and agent past action process.\n"
             "You should partition the goal into some subgoal and judge the past actions whether "
             "complete these subgoals.\n"
             "The desired format is: \n"
             "subgoal 1:goal  - complete or in complete\n"
             "etc.\n"
             "Do not give me explanation.";
    case PromptKind::Summarization:
      return "I will give you the past process and you should summarize the past process. \n"
             "The desired format must be: \n"
             "Summary:\n"
             "Do not give me explanation.";
    case PromptKind::ClusterGoals:
      return "I will give you a few numbered task goals.\n"
             "You need to help me classify these goals into some types. The number of each "
             "category should be almost average. The category must be high-level type. \n"
             "The desired format is: \n"
             "High-level Type1: type name [number] \n"
             "High-level Type2: type name [number] \n"
             "High-level Type3: type name [number] \n"
             "etc.";
    case PromptKind::ClusterObservations:
      return "I will give you a few numbered observations.  \n"
             "You need to help me classify these observations into some types. The number of "
             "each category should be almost average. The category must be high-level type. \n"
             "The desired format is: \n"
             "High-level Type1: type name [number] \n"
             "High-level Type2: type name [number] \n"
             "High-level Type3: type name [number] \n"
             "etc.";
    case PromptKind::IndexGoal:
      return "I will give you some numbered goal types and examples of this type.\n"
             "You should judge the new goal belongs to which type.\n"
             "The desired format is:\n"
             "[Type number]: reason\n"
             "Do not give me other information.";
    case PromptKind::IndexObservation:
      return "I will give you some observation numbered types and examples of this type.\n"
             "You should judge the new observation belongs to which type.\n"
             "The desired format is:\n"
             "[Type number]: reason\n"
             "Do not give me other information.";
    case PromptKind::Action:
      return "I give some numbered examples and a new observation.\n"
             "You should imitate the actions in the example and give me the next action.";
    case PromptKind::TreeExploration:
      return "I give some numbered examples and a new observation.\n"
             "You should imitate the actions in the example and give me some possible next "
             "actions and the confidence of each action. All confidence should sum equal 1.";
    case PromptKind::Compare:
      return "I will give you two decision process. Each process have some numbered step. \n"
             "The first process is better than the second, Can you tell me the first number that "
             "two process different.\n"
             "The desired format is:\n"
             "Number: Reason.\n"
             "Do not give any other information and strictly follow the format.";
    case PromptKind::FinalChoice:
      // No published template exists for the cross-batch choice.
      return "I will give you a task goal and some numbered decision processes.\n"
             "You should judge which process best achieves the goal.\n"
             "The desired format is:\n"
             "[Process number]: reason\n"
             "Do not give me other information.";
  }
  return "";
}

constexpr int default_budget(PromptKind kind) {
  switch (kind) {
    case PromptKind::ClusterGoals:
    case PromptKind::ClusterObservations: return 1024;
    case PromptKind::Summarization:
    case PromptKind::Evaluation:
    case PromptKind::TreeExploration: return 256;
    default: return 128;
  }
}

/// Appended to the payload when a response has to be re-requested.
inline constexpr std::string_view kFormatReminder = "\nStrictly follow the format.";

struct LlmRequest {
  PromptKind kind = PromptKind::Action;
  std::string instruction;
  std::string payload;
  int budget = 128;

  std::string full_text() const { return instruction + "\n" + payload; }
};

inline LlmRequest make_request(PromptKind kind, std::string payload) {
  return LlmRequest{kind, std::string(instruction(kind)), std::move(payload), default_budget(kind)};
}

struct LlmResponse {
  std::string raw;
  std::string backend_id;
  std::chrono::nanoseconds latency{0};
};

/// Contract shared by every LLM backend. Implementations must accept
/// concurrent `complete` calls.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual LlmResponse complete(const LlmRequest& request) = 0;
  virtual std::string id() const = 0;
};

}  // namespace ldm::llm
