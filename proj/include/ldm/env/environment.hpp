#pragma once

#include <any>
#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ldm/error.hpp"

namespace ldm::env {

/// Result of one `step`. A rejected action leaves the environment untouched
/// and carries the explanation in `observation`.
struct StepOutcome {
  bool accepted = false;
  std::string observation;
  bool done = false;
  std::optional<double> reward;
};

struct EnvState {
  std::string goal;
  std::string observation;
  std::size_t step_count = 0;
  bool done = false;
  std::optional<double> reward;
  std::uint64_t rng_seed = 0;
};

/// Opaque, immutable capture of an environment run. Only valid for the run
/// (reset) it was taken from.
struct Snapshot {
  std::uint64_t run_id = 0;
  std::shared_ptr<const std::any> state;
};

inline std::uint64_t next_run_id() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string family() const = 0;
  virtual std::string reset(const std::string& goal, std::uint64_t seed) = 0;
  virtual StepOutcome step(const std::string& action) = 0;
  virtual EnvState state() const = 0;

  virtual Snapshot snapshot() const = 0;
  virtual void restore(const Snapshot& handle) = 0;

  /// Finite action set used by exhaustive oracles.
  virtual std::vector<std::string> admissible_actions() const = 0;

  /// Reward assigned when the agent gives up without a terminal signal.
  virtual std::optional<double> exhaustion_reward() const = 0;

  /// Independent copy sharing the current run (snapshots stay valid).
  virtual std::unique_ptr<Environment> clone() const = 0;
};

namespace detail {

template <typename State>
Snapshot make_snapshot(std::uint64_t run_id, const State& state) {
  return Snapshot{run_id, std::make_shared<const std::any>(state)};
}

template <typename State>
const State& open_snapshot(const Snapshot& handle, std::uint64_t run_id) {
  if (!handle.state || handle.run_id != run_id)
    fail(ErrorCode::StaleHandle, "snapshot belongs to a different run");
  const auto* state = std::any_cast<State>(handle.state.get());
  if (!state) fail(ErrorCode::StaleHandle, "snapshot belongs to a different environment");
  return *state;
}

}  // namespace detail

}  // namespace ldm::env
