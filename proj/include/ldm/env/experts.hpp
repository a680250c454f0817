#pragma once

// Scripted demonstrators. They read the true world state, so every
// trajectory they emit ends in reward 1; `noise` adds one recoverable detour.

#include <string>
#include <vector>

#include "ldm/env/toyhouse.hpp"
#include "ldm/env/toyshop.hpp"
#include "ldm/memory/types.hpp"
#include "ldm/rng.hpp"

namespace ldm::env {

struct GoalSpec {
  std::string goal;
  std::uint64_t seed = 0;

  friend bool operator==(const GoalSpec&, const GoalSpec&) = default;
};

namespace detail {

/// Steps `env`, appending (observation-before, action) to `traj`.
inline void act(Environment& env, memory::Trajectory& traj, const std::string& action) {
  auto before = env.state().observation;
  auto outcome = env.step(action);
  if (!outcome.accepted)
    throw std::logic_error("expert action rejected: " + action + " (" + outcome.observation + ")");
  traj.steps.push_back({before, action});
  if (outcome.done) traj.reward = outcome.reward;
}

inline const std::vector<std::string>& objects_for(HouseTask task) {
  static const std::vector<std::string> food = {"apple", "egg", "potato", "tomato", "bread", "mug", "cup", "plate"};
  static const std::vector<std::string> washable = {"apple", "mug", "cup", "plate", "potato", "tomato", "soapbar"};
  static const std::vector<std::string> lookable = {"book", "cellphone", "pen", "keychain", "mug", "cup"};
  static const std::vector<std::string> any = {"apple", "mug",  "egg",  "potato",    "tomato", "bread",   "cup",
                                               "plate", "soapbar", "book", "cellphone", "pen",    "keychain"};
  switch (task) {
    case HouseTask::Heat:
    case HouseTask::Cool: return food;
    case HouseTask::Clean: return washable;
    case HouseTask::Look: return lookable;
    default: return any;
  }
}

}  // namespace detail

inline std::vector<GoalSpec> sample_house_goals(std::size_t count, std::uint64_t seed, std::string_view stream) {
  auto rng = Rng::substream(seed, stream);
  static const std::vector<std::string> targets = {"countertop", "diningtable", "cabinet", "shelf", "drawer",
                                                   "desk",       "sidetable",   "garbagecan", "fridge"};
  std::vector<GoalSpec> out;
  for (std::size_t i = 0; i < count; ++i) {
    HouseGoal goal;
    goal.task = kHouseTasks[rng.below(kHouseTasks.size())];
    goal.object = rng.pick(detail::objects_for(goal.task));
    if (goal.task != HouseTask::Look) {
      do {
        goal.target = rng.pick(targets);
      } while (goal.task == HouseTask::Cool && goal.target == "fridge");
    }
    out.push_back({render_house_goal(goal), rng.next() & 0xFFFFFFFFULL});
  }
  return out;
}

/// Minimal plan (plus optional detour) for the goal loaded in `env`.
inline memory::Trajectory demonstrate_house(ToyHouse& env, Rng& rng, double noise) {
  memory::Trajectory traj;
  traj.goal = env.state().goal;
  traj.env = env.family();
  traj.seed = env.state().rng_seed;
  const auto goal = env.goal();

  auto go = [&](const std::string& where) {
    if (env.location() != where) detail::act(env, traj, "go to " + where);
    const auto* r = env.world().receptacle(where);
    if (r->openable && !r->open) detail::act(env, traj, "open " + where);
  };
  auto target_receptacle = [&] {
    for (const auto& r : env.world().receptacles)
      if (r.type == goal.target) return r.name();
    throw std::logic_error("no target receptacle");
  };

  bool detour = rng.chance(noise);
  std::size_t needed = goal.task == HouseTask::Pick2 ? 2 : 1;
  for (std::size_t k = 0; k < needed; ++k) {
    std::string object, from;
    for (const auto& o : env.world().objects) {
      if (o.type != goal.object || o.location.empty()) continue;
      const auto* r = env.world().receptacle(o.location);
      if (goal.task != HouseTask::Look && r->type == goal.target) continue;
      object = o.name();
      from = o.location;
      break;
    }
    if (object.empty()) throw std::logic_error("no reachable " + goal.object);

    if (detour) {
      detour = false;
      std::vector<std::string> wrong;
      for (const auto& r : env.world().receptacles)
        if (r.name() != from && r.name() != env.location()) wrong.push_back(r.name());
      detail::act(env, traj, "go to " + rng.pick(wrong));
    }
    go(from);
    detail::act(env, traj, "take " + object + " from " + from);
    if (goal.task == HouseTask::Look) {
      if (env.location() != env.world().lamp_location) detail::act(env, traj, "go to " + env.world().lamp_location);
      detail::act(env, traj, "use desklamp 1");
      break;
    }
    if (auto appliance = detail::appliance_for(goal.task); !appliance.empty()) {
      if (env.location() != appliance) detail::act(env, traj, "go to " + appliance);
      auto verb = goal.task == HouseTask::Cool ? "cool " : goal.task == HouseTask::Heat ? "heat " : "clean ";
      detail::act(env, traj, verb + object + " with " + appliance);
    }
    go(target_receptacle());
    detail::act(env, traj, "put " + object + " in/on " + env.location());
  }
  return traj;
}

inline std::vector<memory::Trajectory> generate_house_experts(std::size_t count, std::uint64_t seed, double noise) {
  auto goals = sample_house_goals(count, seed, "expert-goals");
  auto rng = Rng::substream(seed, "expert-noise");
  std::vector<memory::Trajectory> out;
  ToyHouse env;
  for (std::size_t i = 0; i < goals.size(); ++i) {
    env.reset(goals[i].goal, goals[i].seed);
    auto traj = demonstrate_house(env, rng, noise);
    traj.id = "toyhouse-" + std::to_string(i + 1);
    out.push_back(std::move(traj));
  }
  return out;
}

// --- Shop -----------------------------------------------------------------------

inline std::vector<GoalSpec> sample_shop_goals(const Catalog& catalog, std::size_t count, std::uint64_t seed,
                                               std::string_view stream) {
  auto rng = Rng::substream(seed, stream);
  std::vector<GoalSpec> out;
  for (std::size_t i = 0; i < count; ++i) {
    const auto& product = rng.pick(catalog.products);
    out.push_back({render_shop_goal(goal_for_product(rng, product)), rng.next() & 0xFFFFFFFFULL});
  }
  return out;
}

namespace detail {

inline std::vector<std::string> codes_on_page(const Catalog& catalog, std::string_view observation) {
  std::vector<std::string> codes;
  for (const auto& line : text::split_lines(observation))
    if (line.size() > 2 && line.front() == '[' && line.back() == ']' && catalog.find(line.substr(1, line.size() - 2)))
      codes.push_back(line.substr(1, line.size() - 2));
  return codes;
}

inline bool fully_satisfies(const ShopGoal& goal, const Product& product) {
  std::map<std::string, std::string> selected;
  for (const auto& [group, value] : goal.options) {
    bool offered = false;
    for (const auto& g : product.options)
      if (text::iequals(g.name, group))
        for (const auto& v : g.values) offered = offered || text::iequals(v, value);
    if (!offered) return false;
    selected[text::lower(group)] = value;
  }
  return purchase_reward(goal, product, selected) == 1.0;
}

}  // namespace detail

inline memory::Trajectory demonstrate_shop(ToyShop& env, Rng& rng, double noise) {
  memory::Trajectory traj;
  traj.goal = env.state().goal;
  traj.env = env.family();
  traj.seed = env.state().rng_seed;
  const auto goal = env.goal();
  const auto& catalog = env.catalog();

  detail::act(env, traj, "search[" + goal.query() + "]");
  std::string chosen;
  while (chosen.empty()) {
    auto codes = detail::codes_on_page(catalog, env.state().observation);
    for (const auto& code : codes)
      if (detail::fully_satisfies(goal, *catalog.find(code))) {
        chosen = code;
        break;
      }
    if (chosen.empty()) {
      if (!text::icontains(env.state().observation, "[Next >]")) throw std::logic_error("no satisfying product");
      detail::act(env, traj, "click[Next >]");
      continue;
    }
    if (rng.chance(noise)) {
      std::string other;
      for (const auto& code : codes)
        if (code != chosen) other = code;
      detail::act(env, traj, "click[" + (other.empty() ? chosen : other) + "]");
      detail::act(env, traj, "click[< Prev]");
    }
  }
  detail::act(env, traj, "click[" + chosen + "]");
  for (const auto& [group, value] : goal.options) detail::act(env, traj, "click[" + value + "]");
  detail::act(env, traj, "click[Buy Now]");
  return traj;
}

inline std::vector<memory::Trajectory> generate_shop_experts(const Catalog& catalog, std::size_t count,
                                                             std::uint64_t seed, double noise) {
  auto goals = sample_shop_goals(catalog, count, seed, "expert-goals");
  auto rng = Rng::substream(seed, "expert-noise");
  std::vector<memory::Trajectory> out;
  ToyShop env(catalog);
  for (std::size_t i = 0; i < goals.size(); ++i) {
    env.reset(goals[i].goal, goals[i].seed);
    auto traj = demonstrate_shop(env, rng, noise);
    traj.id = "toyshop-" + std::to_string(i + 1);
    out.push_back(std::move(traj));
  }
  return out;
}

}  // namespace ldm::env
