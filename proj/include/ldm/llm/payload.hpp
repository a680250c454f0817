#pragma once

// Text layouts for prompt payloads. Renderers are used by the pipeline;
// the matching parsers let the rule-based backend read its own prompts.

#include <string>
#include <vector>

#include "ldm/text.hpp"

namespace ldm::llm {

/// History text used before the first action.
inline constexpr std::string_view kNoPastActions = "No past actions.";

/// One numbered example (or the current state) in an Action-style prompt.
struct StateBlock {
  std::string goal;
  std::string past;
  std::string evaluation;
  std::string observation;
  std::string action;

  friend bool operator==(const StateBlock&, const StateBlock&) = default;
};

struct Rejection {
  std::string action;
  std::string reason;

  friend bool operator==(const Rejection&, const Rejection&) = default;
};

struct ActionPayload {
  std::vector<StateBlock> examples;
  StateBlock current;
  std::vector<Rejection> rejected;

  friend bool operator==(const ActionPayload&, const ActionPayload&) = default;
};

namespace detail {

inline void append_state(std::string& out, const StateBlock& block, bool with_action) {
  out += "Instruction: " + text::flatten(block.goal) + "\n";
  out += "Past: " + text::flatten(block.past) + "\n";
  if (!block.evaluation.empty()) out += "Evaluation: " + text::flatten(block.evaluation) + "\n";
  out += "The interface is:\n";
  out += std::string(text::trim(block.observation)) + "\n";
  out += with_action ? "Action: " + text::flatten(block.action) + "\n" : "Action:\n";
}

inline bool numbered_prefix(std::string_view line, std::string_view marker, std::string_view& rest) {
  std::size_t i = 0;
  while (i < line.size() && line[i] >= '0' && line[i] <= '9') ++i;
  if (i == 0 || i + 2 > line.size() || line[i] != '.' || line[i + 1] != ' ') return false;
  auto tail = line.substr(i + 2);
  if (!text::starts_with(tail, marker)) return false;
  rest = tail.substr(marker.size());
  return true;
}

}  // namespace detail

/// Numbered examples only; this is the retrieved context block.
inline std::string render_examples(const std::vector<StateBlock>& examples) {
  std::string out;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    out += std::to_string(i + 1) + ". ";
    detail::append_state(out, examples[i], true);
    out += "\n";
  }
  return out;
}

inline std::string render_action_payload(const ActionPayload& payload) {
  std::string out = render_examples(payload.examples);
  detail::append_state(out, payload.current, false);
  for (const auto& r : payload.rejected) {
    out += "Rejected action: " + text::flatten(r.action) + "\n";
    out += "Reason: " + text::flatten(r.reason) + "\n";
  }
  return out;
}

inline ActionPayload parse_action_payload(std::string_view payload) {
  ActionPayload out;
  StateBlock* block = nullptr;
  bool in_observation = false;
  std::vector<std::string> obs_lines;

  auto close_observation = [&] {
    if (block && in_observation) block->observation = text::join(obs_lines, "\n");
    in_observation = false;
    obs_lines.clear();
  };

  for (const auto& raw_line : text::split_lines(payload)) {
    std::string_view line = raw_line;
    std::string_view rest;
    // Observations may themselves start with "Instruction:", so they are
    // consumed up to their Action line first.
    if (in_observation) {
      if (text::starts_with(line, "Action:")) {
        close_observation();
        if (block) block->action = std::string(text::trim(line.substr(7)));
      } else {
        obs_lines.emplace_back(line);
      }
    } else if (detail::numbered_prefix(line, "Instruction: ", rest)) {
      out.examples.emplace_back();
      block = &out.examples.back();
      block->goal = std::string(rest);
    } else if (text::starts_with(line, "Instruction: ")) {
      block = &out.current;
      block->goal = std::string(line.substr(13));
    } else if (text::starts_with(line, "Past: ") || line == "Past:") {
      if (block) block->past = std::string(text::trim(line.substr(5)));
    } else if (text::starts_with(line, "Evaluation: ")) {
      if (block) block->evaluation = std::string(line.substr(12));
    } else if (line == "The interface is:") {
      in_observation = true;
    } else if (text::starts_with(line, "Rejected action: ")) {
      out.rejected.push_back({std::string(line.substr(17)), ""});
    } else if (text::starts_with(line, "Reason: ") && !out.rejected.empty()) {
      out.rejected.back().reason = std::string(line.substr(8));
    }
  }
  close_observation();
  return out;
}

// --- Summarization / Evaluation ---------------------------------------------

struct StepText {
  std::string observation;
  std::string action;

  friend bool operator==(const StepText&, const StepText&) = default;
};

inline std::string render_summary_payload(std::string_view goal, const std::vector<StepText>& steps) {
  std::string out = "Goal: " + text::flatten(goal) + "\n";
  for (std::size_t i = 0; i < steps.size(); ++i) {
    out += "Step " + std::to_string(i + 1) + ":\nThe interface is:\n";
    out += std::string(text::trim(steps[i].observation)) + "\n";
    out += "Action: " + text::flatten(steps[i].action) + "\n";
  }
  return out;
}

inline std::string render_evaluation_payload(std::string_view goal, const std::vector<StepText>& steps) {
  std::string out = "Goal: " + text::flatten(goal) + "\nPast actions:\n";
  for (std::size_t i = 0; i < steps.size(); ++i)
    out += std::to_string(i + 1) + ". " + text::flatten(steps[i].action) + "\n";
  return out;
}

inline std::string payload_goal(std::string_view payload) {
  for (const auto& line : text::split_lines(payload))
    if (text::starts_with(line, "Goal: ")) return line.substr(6);
  return {};
}

/// Action lines of a Summarization or Evaluation payload, in order.
inline std::vector<std::string> payload_actions(std::string_view payload) {
  std::vector<std::string> actions;
  bool in_list = false;
  for (const auto& line : text::split_lines(payload)) {
    std::string_view rest;
    if (text::starts_with(line, "Action: ")) {
      actions.push_back(line.substr(8));
    } else if (line == "Past actions:") {
      in_list = true;
    } else if (in_list) {
      auto dot = line.find(". ");
      if (dot != std::string::npos && dot > 0) actions.push_back(line.substr(dot + 2));
    }
  }
  return actions;
}

// --- Cluster ------------------------------------------------------------------

inline std::string render_numbered_list(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i)
    out += std::to_string(i + 1) + ". " + text::flatten(items[i]) + "\n";
  return out;
}

inline std::vector<std::string> parse_numbered_list(std::string_view payload) {
  std::vector<std::string> items;
  for (const auto& line : text::split_lines(payload)) {
    auto dot = line.find(". ");
    if (dot == std::string::npos || dot == 0) continue;
    bool digits = true;
    for (std::size_t i = 0; i < dot; ++i) digits = digits && line[i] >= '0' && line[i] <= '9';
    if (digits) items.push_back(line.substr(dot + 2));
  }
  return items;
}

// --- Index classification -----------------------------------------------------

struct TypeListing {
  std::string name;
  std::vector<std::string> examples;

  friend bool operator==(const TypeListing&, const TypeListing&) = default;
};

struct IndexPayload {
  std::vector<TypeListing> types;
  std::string query;

  friend bool operator==(const IndexPayload&, const IndexPayload&) = default;
};

/// `subject` is "goal" or "observation".
inline std::string render_index_payload(const IndexPayload& payload, std::string_view subject) {
  std::string out;
  for (std::size_t i = 0; i < payload.types.size(); ++i) {
    out += "Type " + std::to_string(i + 1) + ": " + text::flatten(payload.types[i].name) + "\n";
    std::vector<std::string> flat;
    for (const auto& ex : payload.types[i].examples) flat.push_back(text::flatten(ex));
    out += "Examples: " + text::join(flat, " || ") + "\n";
  }
  out += "New " + std::string(subject) + ": " + text::flatten(payload.query) + "\n";
  return out;
}

inline IndexPayload parse_index_payload(std::string_view payload) {
  IndexPayload out;
  for (const auto& line : text::split_lines(payload)) {
    if (text::starts_with(line, "Type ")) {
      auto colon = line.find(": ");
      out.types.push_back({colon == std::string::npos ? "" : line.substr(colon + 2), {}});
    } else if (text::starts_with(line, "Examples: ") && !out.types.empty()) {
      auto body = line.substr(10);
      if (!body.empty()) out.types.back().examples = text::split(body, " || ");
    } else if (text::starts_with(line, "New ")) {
      auto colon = line.find(": ");
      if (colon != std::string::npos) out.query = line.substr(colon + 2);
    }
  }
  return out;
}

// --- Compare / final choice -------------------------------------------------

struct ProcessListing {
  std::string goal;
  std::vector<std::vector<std::string>> processes;  // action sequences

  friend bool operator==(const ProcessListing&, const ProcessListing&) = default;
};

inline std::string render_process_payload(const ProcessListing& listing) {
  std::string out = "Goal: " + text::flatten(listing.goal) + "\n";
  for (std::size_t p = 0; p < listing.processes.size(); ++p) {
    out += "Process " + std::to_string(p + 1) + ":\n";
    for (std::size_t i = 0; i < listing.processes[p].size(); ++i)
      out += std::to_string(i + 1) + ". " + text::flatten(listing.processes[p][i]) + "\n";
  }
  return out;
}

inline ProcessListing parse_process_payload(std::string_view payload) {
  ProcessListing out;
  for (const auto& line : text::split_lines(payload)) {
    if (text::starts_with(line, "Goal: ")) {
      out.goal = line.substr(6);
    } else if (text::starts_with(line, "Process ")) {
      out.processes.emplace_back();
    } else if (!out.processes.empty()) {
      auto dot = line.find(". ");
      if (dot != std::string::npos && dot > 0) out.processes.back().push_back(line.substr(dot + 2));
    }
  }
  return out;
}

}  // namespace ldm::llm
