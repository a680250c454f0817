#pragma once

// Text household: receptacles, movable objects, three appliances and a desk
// lamp. Six goal templates; success is a pure predicate over world state.

#include <algorithm>
#include <array>
#include <utility>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ldm/env/environment.hpp"
#include "ldm/rng.hpp"
#include "ldm/text.hpp"

namespace ldm::env {

enum class HouseTask { Pick, Clean, Heat, Cool, Look, Pick2 };

inline constexpr std::array<HouseTask, 6> kHouseTasks = {HouseTask::Pick, HouseTask::Clean, HouseTask::Heat,
                                                         HouseTask::Cool, HouseTask::Look,  HouseTask::Pick2};

constexpr std::string_view to_string(HouseTask task) {
  switch (task) {
    case HouseTask::Pick: return "Pick";
    case HouseTask::Clean: return "Clean";
    case HouseTask::Heat: return "Heat";
    case HouseTask::Cool: return "Cool";
    case HouseTask::Look: return "Look";
    case HouseTask::Pick2: return "Pick2";
  }
  return "";
}

struct HouseGoal {
  HouseTask task = HouseTask::Pick;
  std::string object;  // object type, e.g. "apple"
  std::string target;  // receptacle type; empty for Look

  friend bool operator==(const HouseGoal&, const HouseGoal&) = default;
};

inline std::string render_house_goal(const HouseGoal& goal) {
  switch (goal.task) {
    case HouseTask::Pick: return "put some " + goal.object + " in " + goal.target + ".";
    case HouseTask::Clean: return "clean some " + goal.object + " and put it in " + goal.target + ".";
    case HouseTask::Heat: return "heat some " + goal.object + " and put it in " + goal.target + ".";
    case HouseTask::Cool: return "cool some " + goal.object + " and put it in " + goal.target + ".";
    case HouseTask::Look: return "look at " + goal.object + " under the desklamp.";
    case HouseTask::Pick2: return "put two " + goal.object + " in " + goal.target + ".";
  }
  return "";
}

inline HouseGoal parse_house_goal(std::string_view text_goal) {
  static const std::regex pick2(R"(^put two ([a-z]+) in ([a-z]+)\.?$)");
  static const std::regex pick(R"(^put some ([a-z]+) in ([a-z]+)\.?$)");
  static const std::regex modify(R"(^(clean|heat|cool) some ([a-z]+) and put it in ([a-z]+)\.?$)");
  static const std::regex look(R"(^look at ([a-z]+) under the desklamp\.?$)");
  std::string s = text::lower(text::trim(text_goal));
  std::smatch m;
  if (std::regex_match(s, m, pick2)) return {HouseTask::Pick2, m[1].str(), m[2].str()};
  if (std::regex_match(s, m, pick)) return {HouseTask::Pick, m[1].str(), m[2].str()};
  if (std::regex_match(s, m, look)) return {HouseTask::Look, m[1].str(), ""};
  if (std::regex_match(s, m, modify)) {
    auto verb = m[1].str();
    auto task = verb == "clean" ? HouseTask::Clean : verb == "heat" ? HouseTask::Heat : HouseTask::Cool;
    return {task, m[2].str(), m[3].str()};
  }
  fail(ErrorCode::UnparseableGoal, "not a household goal: " + std::string(text_goal));
}

struct Receptacle {
  std::string type;
  int number = 1;
  bool openable = false;
  bool open = true;

  std::string name() const { return type + " " + std::to_string(number); }

  friend bool operator==(const Receptacle&, const Receptacle&) = default;
};

struct HouseObject {
  std::string type;
  int number = 1;
  std::string location;  // receptacle name; empty while carried
  bool cooled = false;
  bool heated = false;
  bool cleaned = false;

  std::string name() const { return type + " " + std::to_string(number); }

  friend bool operator==(const HouseObject&, const HouseObject&) = default;
};

struct HouseWorld {
  std::vector<Receptacle> receptacles;
  std::vector<HouseObject> objects;
  std::string lamp_location;  // receptacle holding "desklamp 1"

  const Receptacle* receptacle(std::string_view name) const {
    for (const auto& r : receptacles)
      if (r.name() == name) return &r;
    return nullptr;
  }
  Receptacle* receptacle(std::string_view name) {
    return const_cast<Receptacle*>(std::as_const(*this).receptacle(name));
  }
  HouseObject* object(std::string_view name) {
    for (auto& o : objects)
      if (o.name() == name) return &o;
    return nullptr;
  }
  bool has_type(std::string_view type) const {
    return std::any_of(receptacles.begin(), receptacles.end(), [&](const auto& r) { return r.type == type; });
  }

  friend bool operator==(const HouseWorld&, const HouseWorld&) = default;
};

inline nlohmann::ordered_json to_json(const HouseWorld& world) {
  nlohmann::ordered_json receptacles = nlohmann::ordered_json::array();
  for (const auto& r : world.receptacles)
    receptacles.push_back({{"type", r.type}, {"number", r.number}, {"openable", r.openable}, {"open", r.open}});
  nlohmann::ordered_json objects = nlohmann::ordered_json::array();
  for (const auto& o : world.objects)
    objects.push_back({{"type", o.type}, {"number", o.number}, {"location", o.location}});
  return {{"receptacles", receptacles}, {"objects", objects}, {"lamp_location", world.lamp_location}};
}

inline HouseWorld world_from_json(const nlohmann::json& doc) {
  HouseWorld world;
  try {
    for (const auto& r : doc.at("receptacles")) {
      bool openable = r.value("openable", false);
      world.receptacles.push_back(
          {r.at("type").get<std::string>(), r.value("number", 1), openable, r.value("open", !openable)});
    }
    for (const auto& o : doc.at("objects"))
      world.objects.push_back({o.at("type").get<std::string>(), o.value("number", 1), o.at("location").get<std::string>()});
    world.lamp_location = doc.value("lamp_location", "");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ConfigError, std::string("world: ") + e.what());
  }
  for (const auto& o : world.objects)
    if (!world.receptacle(o.location)) fail(ErrorCode::ConfigError, o.name() + " placed in unknown " + o.location);
  return world;
}

namespace detail {

struct ObjectSpec {
  std::string type;
  std::vector<std::string> preferred;  // receptacle types, most likely first
};

inline const std::vector<ObjectSpec>& house_objects() {
  static const std::vector<ObjectSpec> specs = {
      {"apple", {"countertop", "diningtable", "fridge"}},   {"mug", {"cabinet", "coffeemachine", "countertop"}},
      {"egg", {"fridge", "countertop"}},                   {"potato", {"fridge", "garbagecan", "countertop"}},
      {"tomato", {"fridge", "diningtable", "countertop"}}, {"bread", {"countertop", "diningtable"}},
      {"cup", {"cabinet", "shelf", "countertop"}},         {"plate", {"cabinet", "diningtable"}},
      {"soapbar", {"sinkbasin", "cabinet", "garbagecan"}}, {"book", {"desk", "shelf", "sidetable"}},
      {"cellphone", {"desk", "sidetable", "drawer"}},       {"pen", {"drawer", "desk"}},
      {"keychain", {"drawer", "sidetable", "shelf"}},
  };
  return specs;
}

inline const ObjectSpec* object_spec(std::string_view type) {
  for (const auto& s : house_objects())
    if (s.type == type) return &s;
  return nullptr;
}

inline bool is_openable_type(std::string_view type) {
  return type == "fridge" || type == "microwave" || type == "cabinet" || type == "drawer";
}

inline std::string appliance_for(HouseTask task) {
  switch (task) {
    case HouseTask::Clean: return "sinkbasin 1";
    case HouseTask::Heat: return "microwave 1";
    case HouseTask::Cool: return "fridge 1";
    default: return "";
  }
}

}  // namespace detail

/// Preferred receptacle for an object type, or a uniform draw 25% of the time.
inline std::string place_object(Rng& rng, const HouseWorld& world, std::string_view type) {
  std::vector<std::string> candidates;
  if (const auto* spec = detail::object_spec(type); spec && rng.chance(0.75)) {
    for (const auto& pref : spec->preferred)
      for (const auto& r : world.receptacles)
        if (r.type == pref) candidates.push_back(r.name());
    if (!candidates.empty()) {
      // Earlier preferences dominate: draw the type first, then an instance.
      for (const auto& pref : spec->preferred) {
        std::vector<std::string> of_type;
        for (const auto& r : world.receptacles)
          if (r.type == pref) of_type.push_back(r.name());
        if (!of_type.empty() && (rng.chance(0.6) || pref == spec->preferred.back())) return rng.pick(of_type);
      }
      return rng.pick(candidates);
    }
  }
  std::vector<std::string> all;
  for (const auto& r : world.receptacles)
    if (r.type != "microwave") all.push_back(r.name());
  return rng.pick(all);
}

inline HouseWorld generate_world(std::uint64_t seed) {
  auto rng = Rng::substream(seed, "toyhouse-world");
  HouseWorld world;
  auto add = [&](const std::string& type, int count) {
    int first = 1;
    for (const auto& r : world.receptacles)
      if (r.type == type) first = std::max(first, r.number + 1);
    bool openable = detail::is_openable_type(type);
    for (int i = 0; i < count && world.receptacles.size() < 15; ++i)
      world.receptacles.push_back({type, first + i, openable, !openable});
  };
  add("cabinet", 1 + static_cast<int>(rng.below(3)));
  add("countertop", 1 + static_cast<int>(rng.below(2)));
  add("desk", 1);
  add("diningtable", 1);
  add("fridge", 1);
  add("microwave", 1);
  add("sinkbasin", 1);
  const std::vector<std::string> extras = {"drawer", "shelf", "garbagecan", "sidetable", "coffeemachine"};
  for (const auto& type : extras)
    if (world.receptacles.size() < 15 && rng.chance(0.6)) add(type, 1 + static_cast<int>(rng.below(2)));
  while (world.receptacles.size() < 8) add("shelf", 1);
  std::sort(world.receptacles.begin(), world.receptacles.end(),
            [](const auto& a, const auto& b) { return std::tie(a.type, a.number) < std::tie(b.type, b.number); });
  world.lamp_location = rng.chance(0.5) && world.has_type("sidetable") ? "sidetable 1" : "desk 1";

  std::map<std::string, int> counts;
  auto n_objects = 8 + rng.below(7);
  for (std::size_t i = 0; i < n_objects; ++i) {
    const auto& spec = rng.pick(detail::house_objects());
    if (counts[spec.type] >= 3) continue;
    int number = ++counts[spec.type];
    world.objects.push_back({spec.type, number, place_object(rng, world, spec.type)});
  }
  return world;
}

class ToyHouse final : public Environment {
 public:
  ToyHouse() = default;
  /// Fixed layout used for every reset instead of a seeded one.
  explicit ToyHouse(HouseWorld world) : fixed_world_(std::move(world)) {}

  std::string family() const override { return "toyhouse"; }
  const HouseWorld& world() const { return state_.world; }
  const HouseGoal& goal() const { return state_.goal; }
  const std::string& location() const { return state_.location; }

  std::string reset(const std::string& goal, std::uint64_t seed) override {
    State fresh;
    fresh.goal = parse_house_goal(goal);
    fresh.goal_text = std::string(text::trim(goal));
    fresh.seed = seed;
    fresh.world = fixed_world_ ? *fixed_world_ : generate_world(seed);
    make_feasible(fresh, seed);
    state_ = std::move(fresh);
    run_id_ = next_run_id();
    state_.observation = room_listing("You are in the middle of a room.");
    return state_.observation;
  }

  StepOutcome step(const std::string& raw_action) override {
    if (run_id_ == 0) return reject("The environment has not been reset.");
    if (state_.done) return reject("The episode is over.");
    auto action = text::lower(text::flatten(raw_action));
    State next = state_;
    auto result = apply(next, action);
    if (!result.accepted) return result;
    ++next.step_count;
    if (goal_satisfied(next)) {
      next.done = true;
      next.reward = 1.0;
    }
    next.observation = result.observation;
    state_ = std::move(next);
    return StepOutcome{true, state_.observation, state_.done, state_.reward};
  }

  EnvState state() const override {
    return EnvState{state_.goal_text, state_.observation, state_.step_count, state_.done, state_.reward, state_.seed};
  }

  Snapshot snapshot() const override { return detail::make_snapshot(run_id_, state_); }
  void restore(const Snapshot& handle) override { state_ = detail::open_snapshot<State>(handle, run_id_); }

  std::vector<std::string> admissible_actions() const override {
    std::vector<std::string> out;
    if (state_.done || run_id_ == 0) return out;
    const auto& w = state_.world;
    for (const auto& r : w.receptacles)
      if (r.name() != state_.location) out.push_back("go to " + r.name());
    if (const auto* here = w.receptacle(state_.location)) {
      if (here->openable) out.push_back((here->open ? "close " : "open ") + here->name());
      if (here->open) {
        if (state_.held.empty()) {
          for (const auto& o : w.objects)
            if (o.location == here->name()) out.push_back("take " + o.name() + " from " + here->name());
        } else {
          out.push_back("put " + state_.held + " in/on " + here->name());
        }
      }
      if (!state_.held.empty()) {
        if (here->type == "fridge") out.push_back("cool " + state_.held + " with " + here->name());
        if (here->type == "microwave") out.push_back("heat " + state_.held + " with " + here->name());
        if (here->type == "sinkbasin") out.push_back("clean " + state_.held + " with " + here->name());
      }
      if (w.lamp_location == here->name()) out.push_back("use desklamp 1");
    }
    return out;
  }

  std::optional<double> exhaustion_reward() const override { return 0.0; }

  std::unique_ptr<Environment> clone() const override { return std::make_unique<ToyHouse>(*this); }

  bool goal_satisfied() const { return goal_satisfied(state_); }

 private:
  struct State {
    HouseGoal goal;
    std::string goal_text;
    HouseWorld world;
    std::string location;  // empty: middle of the room
    std::string held;      // object name
    bool lamp_on = false;
    std::string observation;
    std::size_t step_count = 0;
    bool done = false;
    std::optional<double> reward;
    std::uint64_t seed = 0;
  };

  StepOutcome reject(const std::string& message) const { return StepOutcome{false, message, state_.done, std::nullopt}; }

  static bool in_target(const State& s, const HouseObject& o) {
    if (o.type != s.goal.object || o.location.empty()) return false;
    const auto* r = s.world.receptacle(o.location);
    return r && r->type == s.goal.target;
  }

  static bool goal_satisfied(const State& s) {
    const auto& g = s.goal;
    std::size_t placed = 0;
    for (const auto& o : s.world.objects) {
      if (!in_target(s, o)) continue;
      bool ok = g.task == HouseTask::Pick || g.task == HouseTask::Pick2 || (g.task == HouseTask::Clean && o.cleaned) ||
                (g.task == HouseTask::Heat && o.heated) || (g.task == HouseTask::Cool && o.cooled);
      if (ok) ++placed;
    }
    switch (g.task) {
      case HouseTask::Pick2: return placed >= 2;
      case HouseTask::Look: {
        if (s.held.empty() || !s.lamp_on || s.location != s.world.lamp_location) return false;
        auto space = s.held.find(' ');
        return s.held.substr(0, space) == g.object;
      }
      default: return placed >= 1;
    }
  }

  /// Adds what the goal needs (target receptacle, object instances) and
  /// moves objects so the goal does not already hold at reset.
  static void make_feasible(State& s, std::uint64_t seed) {
    auto rng = Rng::substream(seed, "toyhouse-feasible:" + render_house_goal(s.goal));
    auto& w = s.world;
    if (!s.goal.target.empty() && !w.has_type(s.goal.target)) {
      bool openable = detail::is_openable_type(s.goal.target);
      w.receptacles.push_back({s.goal.target, 1, openable, !openable});
    }
    if (s.goal.task == HouseTask::Look && !w.receptacle(w.lamp_location)) w.lamp_location = w.receptacles.front().name();
    std::size_t need = s.goal.task == HouseTask::Pick2 ? 2 : 1;
    auto count_of = [&] {
      return static_cast<std::size_t>(std::count_if(w.objects.begin(), w.objects.end(), [&](const auto& o) { return o.type == s.goal.object; }));
    };
    while (count_of() < need) {
      int number = 1;
      for (const auto& o : w.objects)
        if (o.type == s.goal.object) number = std::max(number, o.number + 1);
      w.objects.push_back({s.goal.object, number, place_object(rng, w, s.goal.object)});
    }
    if (s.goal.task == HouseTask::Look) return;
    for (auto& o : w.objects) {
      if (!in_target(s, o)) continue;
      for (const auto& r : w.receptacles)
        if (r.type != s.goal.target && r.type != "microwave") {
          o.location = r.name();
          break;
        }
    }
  }

  static std::string list_items(const std::vector<std::string>& items) {
    if (items.empty()) return "nothing";
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (i) out += (i + 1 == items.size()) ? ", and " : ", ";
      out += "a " + items[i];
    }
    return out;
  }

  std::string room_listing(const std::string& prefix) const {
    std::vector<std::string> names;
    for (const auto& r : state_.world.receptacles) names.push_back(r.name());
    return prefix + " Looking quickly around you, you see " + list_items(names) + ".";
  }

  static std::vector<std::string> contents(const State& s, std::string_view where) {
    std::vector<std::string> items;
    for (const auto& o : s.world.objects)
      if (o.location == where) items.push_back(o.name());
    if (s.world.lamp_location == where) items.push_back("desklamp 1");
    return items;
  }

  static StepOutcome ok(std::string observation) { return StepOutcome{true, std::move(observation), false, std::nullopt}; }
  static StepOutcome no(std::string message) { return StepOutcome{false, std::move(message), false, std::nullopt}; }

  StepOutcome apply(State& s, const std::string& action) const {
    static const std::regex go_re(R"(^go to ([a-z]+ [0-9]+)$)");
    static const std::regex open_re(R"(^(open|close) ([a-z]+ [0-9]+)$)");
    static const std::regex take_re(R"(^take ([a-z]+ [0-9]+) from ([a-z]+ [0-9]+)$)");
    static const std::regex put_re(R"(^put ([a-z]+ [0-9]+) (?:in/on|in|on) ([a-z]+ [0-9]+)$)");
    static const std::regex modify_re(R"(^(cool|heat|clean) ([a-z]+ [0-9]+) with ([a-z]+ [0-9]+)$)");
    static const std::regex use_re(R"(^use (desklamp [0-9]+)$)");
    static const std::regex examine_re(R"(^examine ([a-z]+ [0-9]+)$)");
    std::smatch m;
    auto& w = s.world;

    if (std::regex_match(action, m, go_re)) {
      auto* r = w.receptacle(m[1].str());
      if (!r) return no("There is no " + m[1].str() + " here.");
      s.location = r->name();
      if (r->openable && !r->open) return ok("You arrive at the " + r->name() + ". The " + r->name() + " is closed.");
      if (r->openable)
        return ok("You arrive at the " + r->name() + ". The " + r->name() + " is open. In it, you see " +
                  list_items(contents(s, r->name())) + ".");
      return ok("You arrive at the " + r->name() + ". On the " + r->name() + ", you see " + list_items(contents(s, r->name())) + ".");
    }
    if (std::regex_match(action, m, open_re)) {
      bool opening = m[1].str() == "open";
      auto* r = w.receptacle(m[2].str());
      if (!r) return no("There is no " + m[2].str() + " here.");
      if (s.location != r->name()) return no("You are not at " + r->name() + ".");
      if (!r->openable) return no(r->name() + " cannot be opened or closed.");
      if (r->open == opening) return no(r->name() + " is already " + (opening ? "open." : "closed."));
      r->open = opening;
      if (!opening) return ok("You close the " + r->name() + ".");
      return ok("You open the " + r->name() + ". The " + r->name() + " is open. In it, you see " +
                list_items(contents(s, r->name())) + ".");
    }
    if (std::regex_match(action, m, take_re)) {
      auto* r = w.receptacle(m[2].str());
      if (!r) return no("There is no " + m[2].str() + " here.");
      if (r->openable && !r->open) return no(r->name() + " is closed");
      if (s.location != r->name()) return no("You are not at " + r->name() + ".");
      if (!s.held.empty()) return no("You are already carrying " + s.held + ".");
      auto* o = w.object(m[1].str());
      if (!o || o->location != r->name()) return no("There is no " + m[1].str() + " on " + r->name() + ".");
      o->location.clear();
      s.held = o->name();
      return ok("You pick up the " + o->name() + " from the " + r->name() + ".");
    }
    if (std::regex_match(action, m, put_re)) {
      auto* r = w.receptacle(m[2].str());
      if (!r) return no("There is no " + m[2].str() + " here.");
      if (s.held != m[1].str()) return no("You are not carrying " + m[1].str() + ".");
      if (s.location != r->name()) return no("You are not at " + r->name() + ".");
      if (r->openable && !r->open) return no(r->name() + " is closed");
      w.object(s.held)->location = r->name();
      auto name = s.held;
      s.held.clear();
      return ok("You put the " + name + " in/on the " + r->name() + ".");
    }
    if (std::regex_match(action, m, modify_re)) {
      auto verb = m[1].str();
      auto* r = w.receptacle(m[3].str());
      if (!r) return no("There is no " + m[3].str() + " here.");
      const std::string needed = verb == "cool" ? "fridge" : verb == "heat" ? "microwave" : "sinkbasin";
      if (r->type != needed) return no("You cannot " + verb + " things with " + r->name() + ".");
      if (s.location != r->name()) return no("You are not at " + r->name() + ".");
      if (s.held != m[2].str()) return no("You are not carrying " + m[2].str() + ".");
      auto* o = w.object(s.held);
      (verb == "cool" ? o->cooled : verb == "heat" ? o->heated : o->cleaned) = true;
      return ok("You " + verb + " the " + o->name() + " using the " + r->name() + ".");
    }
    if (std::regex_match(action, m, use_re)) {
      if (m[1].str() != "desklamp 1" || s.location != w.lamp_location) return no("There is no " + m[1].str() + " here.");
      s.lamp_on = true;
      return ok("You turn on the desklamp 1.");
    }
    if (std::regex_match(action, m, examine_re)) {
      auto name = m[1].str();
      if (name == s.held) return ok("This is a normal " + name + ".");
      if (name == s.location) {
        const auto* r = w.receptacle(name);
        if (r->openable && !r->open) return ok("The " + name + " is closed.");
        return ok("On the " + name + ", you see " + list_items(contents(s, name)) + ".");
      }
      return no("There is no " + name + " here to examine.");
    }
    if (action == "look") {
      std::vector<std::string> names;
      for (const auto& r : w.receptacles) names.push_back(r.name());
      auto where = s.location.empty() ? std::string("in the middle of a room") : "at the " + s.location;
      return ok("You are " + where + ". Looking quickly around you, you see " + list_items(names) + ".");
    }
    if (action == "inventory") {
      return ok(s.held.empty() ? "You are not carrying anything." : "You are carrying: a " + s.held + ".");
    }
    return no("Nothing happens: \"" + action + "\" is not a recognized action.");
  }

  std::optional<HouseWorld> fixed_world_;
  State state_;
  std::uint64_t run_id_ = 0;
};

}  // namespace ldm::env
