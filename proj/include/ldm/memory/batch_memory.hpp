#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ldm/error.hpp"
#include "ldm/memory/types.hpp"

namespace ldm::memory {

using TypeId = long long;
using TupleId = std::size_t;

/// Passed as the observation type to open a fresh type on insert.
inline constexpr TypeId kNewType = 0;

struct ObservationType {
  TypeId id = 0;
  std::string name;

  friend bool operator==(const ObservationType&, const ObservationType&) = default;
};

struct GoalType {
  TypeId id = 0;
  std::string name;
  std::vector<std::string> examples;
  std::vector<ObservationType> observation_types;

  friend bool operator==(const GoalType&, const GoalType&) = default;
};

struct CapacityMeta {
  std::size_t total_trajectories = 0;  // N
  std::size_t batch_size = 0;          // B
  std::size_t batch_count = 0;         // n

  friend bool operator==(const CapacityMeta&, const CapacityMeta&) = default;
};

struct StoredTuple {
  TupleId id = 0;
  TypeId goal_type = 0;
  TypeId obs_type = 0;
  StateActionTuple tuple;

  friend bool operator==(const StoredTuple&, const StoredTuple&) = default;
};

/// One independent memory: tuples in insertion order plus the two-level
/// (goal type, observation type) index. Tuple ids are insertion positions.
/// Not internally synchronized; share const instances for reading.
class BatchMemory {
 public:
  BatchMemory() = default;
  BatchMemory(int batch_id, CapacityMeta capacity) : batch_id_(batch_id), capacity_(capacity) {}

  int batch_id() const { return batch_id_; }
  const CapacityMeta& capacity() const { return capacity_; }
  std::size_t size() const { return tuples_.size(); }
  bool empty() const { return tuples_.empty(); }
  const std::vector<StoredTuple>& tuples() const { return tuples_; }
  const std::vector<GoalType>& goal_types() const { return goal_types_; }

  const StoredTuple& stored(TupleId id) const {
    if (id >= tuples_.size()) fail(ErrorCode::CorruptMemory, "tuple id " + std::to_string(id) + " out of range");
    return tuples_[id];
  }

  TypeId add_goal_type(std::string name, std::vector<std::string> examples = {}) {
    auto id = static_cast<TypeId>(goal_types_.size() + 1);
    goal_types_.push_back({id, std::move(name), std::move(examples), {}});
    return id;
  }

  TypeId add_observation_type(TypeId goal_type, std::string name) {
    auto& g = goal_type_mut(goal_type);
    auto id = static_cast<TypeId>(g.observation_types.size() + 1);
    g.observation_types.push_back({id, std::move(name)});
    cells_[{goal_type, id}];
    return id;
  }

  const GoalType& goal_type(TypeId id) const {
    if (id < 1 || static_cast<std::size_t>(id) > goal_types_.size())
      fail(ErrorCode::UnknownGoalType, "goal type " + std::to_string(id) + " does not exist");
    return goal_types_[static_cast<std::size_t>(id - 1)];
  }

  bool has_observation_type(TypeId goal, TypeId obs) const {
    const auto& g = goal_type(goal);
    return obs >= 1 && static_cast<std::size_t>(obs) <= g.observation_types.size();
  }

  /// Stores `tuple` in cell (goal, obs). With obs == kNewType a new
  /// observation type named `new_type_name` is opened first. A tuple
  /// byte-identical to one already stored is not stored again; the
  /// existing id is returned with `false`.
  std::pair<TupleId, bool> insert(StateActionTuple tuple, TypeId goal, TypeId obs, std::string new_type_name = {}) {
    goal_type(goal);
    if (auto it = by_content_.find(content_key(tuple)); it != by_content_.end()) return {it->second, false};
    if (obs == kNewType) {
      obs = add_observation_type(goal, new_type_name.empty() ? "new type" : std::move(new_type_name));
    } else if (!has_observation_type(goal, obs)) {
      fail(ErrorCode::UnknownGoalType,
           "observation type " + std::to_string(obs) + " does not exist under goal type " + std::to_string(goal));
    }
    TupleId id = tuples_.size();
    by_content_.emplace(content_key(tuple), id);
    tuples_.push_back({id, goal, obs, std::move(tuple)});
    cells_[{goal, obs}].push_back(id);
    return {id, true};
  }

  const std::vector<TupleId>& cell(TypeId goal, TypeId obs) const {
    static const std::vector<TupleId> none;
    goal_type(goal);
    auto it = cells_.find({goal, obs});
    return it == cells_.end() ? none : it->second;
  }

  const std::map<std::pair<TypeId, TypeId>, std::vector<TupleId>>& cells() const { return cells_; }

  /// Z_bk: tuples stored under goal type k across all its observation types.
  std::size_t cell_size(TypeId goal) const {
    goal_type(goal);
    std::size_t n = 0;
    for (auto it = cells_.lower_bound({goal, 0}); it != cells_.end() && it->first.first == goal; ++it)
      n += it->second.size();
    return n;
  }

  /// Up to k tuples of the cell, newest first. An empty cell yields the
  /// newest tuples of the whole goal type instead.
  std::vector<TupleId> lookup(TypeId goal, TypeId obs, std::size_t k) const {
    if (k == 0) fail(ErrorCode::ConfigError, "lookup needs k >= 1");
    std::vector<TupleId> out;
    const auto& ids = cell(goal, obs);
    if (!ids.empty()) {
      for (auto it = ids.rbegin(); it != ids.rend() && out.size() < k; ++it) out.push_back(*it);
      return out;
    }
    for (auto it = cells_.lower_bound({goal, 0}); it != cells_.end() && it->first.first == goal; ++it)
      out.insert(out.end(), it->second.begin(), it->second.end());
    std::sort(out.begin(), out.end(), std::greater<>());
    if (out.size() > k) out.resize(k);
    return out;
  }

  /// Throws if an index invariant is broken; used after loading and in tests.
  void check_invariants() const {
    std::vector<int> seen(tuples_.size(), 0);
    for (const auto& [key, ids] : cells_) {
      if (!has_observation_type(key.first, key.second)) fail(ErrorCode::CorruptMemory, "cell refers to a missing type");
      for (auto id : ids) {
        if (id >= tuples_.size()) fail(ErrorCode::CorruptMemory, "cell refers to a missing tuple");
        if (tuples_[id].goal_type != key.first || tuples_[id].obs_type != key.second)
          fail(ErrorCode::CorruptMemory, "tuple " + std::to_string(id) + " filed under the wrong cell");
        ++seen[id];
      }
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
      if (seen[i] != 1) fail(ErrorCode::CorruptMemory, "tuple " + std::to_string(i) + " is not in exactly one cell");
  }

  friend bool operator==(const BatchMemory& a, const BatchMemory& b) {
    return a.batch_id_ == b.batch_id_ && a.capacity_ == b.capacity_ && a.goal_types_ == b.goal_types_ &&
           a.tuples_ == b.tuples_ && a.cells_ == b.cells_;
  }

 private:
  GoalType& goal_type_mut(TypeId id) {
    goal_type(id);
    return goal_types_[static_cast<std::size_t>(id - 1)];
  }

  static std::string content_key(const StateActionTuple& t) {
    std::string key;
    auto put = [&](std::string_view s) {
      key += std::to_string(s.size());
      key += ':';
      key += s;
    };
    put(t.goal);
    put(t.history.summary);
    for (const auto& s : t.history.subgoal_status) {
      put(s.subgoal);
      put(s.status == llm::SubgoalStatus::Complete ? "C" : "I");
    }
    put(t.observation);
    put(t.action);
    put(to_string(t.source));
    put(t.origin_trajectory);
    put(std::to_string(t.step_index));
    return key;
  }

  int batch_id_ = 1;
  CapacityMeta capacity_;
  std::vector<GoalType> goal_types_;
  std::vector<StoredTuple> tuples_;
  std::map<std::pair<TypeId, TypeId>, std::vector<TupleId>> cells_;
  std::unordered_map<std::string, TupleId> by_content_;
};

/// The n independent batch memories built from one trajectory set.
struct MemorySet {
  std::vector<BatchMemory> batches;
  std::string environment;
  std::uint64_t seed = 0;

  std::size_t tuple_count() const {
    std::size_t n = 0;
    for (const auto& b : batches) n += b.size();
    return n;
  }

  BatchMemory& batch(int batch_id) {
    for (auto& b : batches)
      if (b.batch_id() == batch_id) return b;
    fail(ErrorCode::ConfigError, "no batch " + std::to_string(batch_id));
  }

  friend bool operator==(const MemorySet&, const MemorySet&) = default;
};

}  // namespace ldm::memory
