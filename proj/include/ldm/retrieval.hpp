#pragma once

// Context selection: classify the goal, then the observation, then read
// the matching cell of the batch memory.

#include <string>
#include <vector>

#include "ldm/llm/gateway.hpp"
#include "ldm/llm/grammar.hpp"
#include "ldm/llm/payload.hpp"
#include "ldm/memory/batch_memory.hpp"

namespace ldm::retrieval {

using memory::TypeId;

struct Classification {
  TypeId id = 0;
  bool from_model = true;  // false when the token-overlap fallback decided
  std::size_t overlap = 0;  // tokens shared with the type name, fallback only
};

struct ContextPrompt {
  std::vector<memory::TupleId> ids;
  std::vector<memory::StateActionTuple> tuples;
  TypeId goal_type = 0;
  TypeId obs_type = 0;
  std::string rendered;
};

namespace detail {

/// Asks for a type number in [1, count]; one reprompt, then the type whose
/// name shares the most tokens with the query (lowest id on ties).
inline Classification classify(llm::Backend& backend, llm::PromptKind kind, const llm::IndexPayload& payload,
                               std::string_view subject) {
  const auto count = static_cast<TypeId>(payload.types.size());
  if (count == 0) fail(ErrorCode::EmptyInput, "index has no types to classify against");
  if (count == 1) return {1, true, 0};
  auto text_payload = llm::render_index_payload(payload, subject);
  for (int attempt = 0; attempt < 2; ++attempt) {
    auto request = llm::make_request(kind, attempt == 0 ? text_payload : text_payload + std::string(llm::kFormatReminder));
    try {
      auto id = llm::parse_classification(backend.complete(request).raw);
      if (id >= 1 && id <= count) return {id, true, 0};
    } catch (const Error& e) {
      if (e.code() != ErrorCode::FormatViolation) throw;
    }
  }
  auto q = text::token_set(payload.query);
  Classification best{1, false, 0};
  for (TypeId i = 1; i <= count; ++i) {
    auto hit = text::overlap(q, text::token_set(payload.types[static_cast<std::size_t>(i - 1)].name));
    if (hit > best.overlap) best = {i, false, hit};
  }
  return best;
}

}  // namespace detail

inline llm::IndexPayload goal_index_payload(const memory::BatchMemory& memory, const std::string& goal) {
  llm::IndexPayload payload;
  for (const auto& g : memory.goal_types()) payload.types.push_back({g.name, g.examples});
  payload.query = goal;
  return payload;
}

/// Observation types listed with up to `examples` observations from each cell.
inline llm::IndexPayload observation_index_payload(const memory::BatchMemory& memory, TypeId goal_type,
                                                   const std::string& observation, std::size_t examples = 2) {
  llm::IndexPayload payload;
  for (const auto& o : memory.goal_type(goal_type).observation_types) {
    llm::TypeListing listing{o.name, {}};
    for (auto id : memory.cell(goal_type, o.id)) {
      const auto& obs = memory.stored(id).tuple.observation;
      if (listing.examples.size() >= examples) break;
      if (std::find(listing.examples.begin(), listing.examples.end(), obs) == listing.examples.end())
        listing.examples.push_back(obs);
    }
    payload.types.push_back(std::move(listing));
  }
  payload.query = observation;
  return payload;
}

inline Classification classify_goal_detail(llm::Backend& backend, const memory::BatchMemory& memory,
                                           const std::string& goal) {
  return detail::classify(backend, llm::PromptKind::IndexGoal, goal_index_payload(memory, goal), "goal");
}

inline TypeId classify_goal(llm::Backend& backend, const memory::BatchMemory& memory, const std::string& goal) {
  return classify_goal_detail(backend, memory, goal).id;
}

/// Observation type under `goal_type`; id 0 when the goal type has none.
inline Classification classify_observation_detail(llm::Backend& backend, const memory::BatchMemory& memory,
                                                  TypeId goal_type, const std::string& observation) {
  if (memory.goal_type(goal_type).observation_types.empty()) return {0, false, 0};
  return detail::classify(backend, llm::PromptKind::IndexObservation,
                          observation_index_payload(memory, goal_type, observation), "observation");
}

inline TypeId classify_observation(llm::Backend& backend, const memory::BatchMemory& memory, TypeId goal_type,
                                   const std::string& observation) {
  return classify_observation_detail(backend, memory, goal_type, observation).id;
}

inline llm::StateBlock to_block(const memory::StateActionTuple& t) {
  return {t.goal, t.history.summary,
          t.history.subgoal_status.empty() ? std::string{} : llm::render_evaluation(t.history.subgoal_status),
          t.observation, t.action};
}

inline std::string render_context(const std::vector<memory::StateActionTuple>& tuples) {
  std::vector<llm::StateBlock> blocks;
  for (const auto& t : tuples) blocks.push_back(to_block(t));
  return llm::render_examples(blocks);
}

inline ContextPrompt retrieve_context(llm::Backend& backend, const memory::BatchMemory& memory,
                                      const std::string& goal, const std::string& observation, std::size_t k) {
  if (k < 1) fail(ErrorCode::ConfigError, "retrieval k must be at least 1");
  ContextPrompt ctx;
  if (memory.goal_types().empty()) return ctx;
  ctx.goal_type = classify_goal(backend, memory, goal);
  ctx.obs_type = classify_observation(backend, memory, ctx.goal_type, observation);
  ctx.ids = memory.lookup(ctx.goal_type, ctx.obs_type, k);
  for (auto id : ctx.ids) ctx.tuples.push_back(memory.stored(id).tuple);
  ctx.rendered = render_context(ctx.tuples);
  return ctx;
}

}  // namespace ldm::retrieval
