#pragma once

// Deterministic stand-in for a language model. Each prompt kind is answered
// by reading the payload layout from payload.hpp; the answer depends on
// nothing but the request, so identical requests give identical text.

#include <algorithm>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "ldm/llm/grammar.hpp"
#include "ldm/llm/payload.hpp"
#include "ldm/llm/prompt.hpp"
#include "ldm/text.hpp"

namespace ldm::llm::rules {

/// Cluster key for a goal: its first two content words.
inline std::string goal_key(std::string_view goal) {
  auto tokens = text::content_tokens(goal);
  if (tokens.size() > 2) tokens.resize(2);
  return tokens.empty() ? "misc" : text::join(tokens, " ");
}

/// Cluster key for an observation: its first five words that carry no digit.
inline std::string observation_key(std::string_view observation) {
  std::vector<std::string> words;
  for (auto& t : text::tokenize(observation)) {
    if (std::any_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; })) continue;
    words.push_back(std::move(t));
    if (words.size() == 5) break;
  }
  return words.empty() ? "misc" : text::join(words, " ");
}

/// True when `name` occurs in `s` without a letter or digit glued to either side.
inline bool mentions(std::string_view s, std::string_view name) {
  if (name.empty()) return false;
  auto hay = text::lower(s);
  auto needle = text::lower(name);
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) {
    bool left = pos == 0 || !std::isalnum(static_cast<unsigned char>(hay[pos - 1]));
    auto end = pos + needle.size();
    bool right = end >= hay.size() || !std::isalnum(static_cast<unsigned char>(hay[end]));
    if (left && right) return true;
  }
  return false;
}

// --- Summary text ------------------------------------------------------------------
//
// "Saw cabinet 1, fridge 1. Done: go to fridge 1; open fridge 1"

struct PastView {
  std::vector<std::string> room;
  std::vector<std::string> actions;
};

inline std::vector<std::string> room_listing(std::string_view observation) {
  static const std::string marker = "you see ";
  auto lowered = text::lower(observation);
  if (lowered.find("looking quickly around you") == std::string::npos) return {};
  auto pos = lowered.find(marker);
  if (pos == std::string::npos) return {};
  std::string body(text::trim(observation.substr(pos + marker.size())));
  if (!body.empty() && body.back() == '.') body.pop_back();
  std::vector<std::string> out;
  static const std::regex item(R"((?:and )?an? ([a-z]+ [0-9]+))");
  for (const auto& part : text::split(body, ", ")) {
    std::smatch m;
    auto p = std::string(text::trim(part));
    if (std::regex_match(p, m, item)) out.push_back(m[1].str());
  }
  return out;
}

inline std::string render_past(const PastView& view) {
  std::string out;
  if (!view.room.empty()) out = "Saw " + text::join(view.room, ", ") + ". ";
  return out + "Done: " + text::join(view.actions, "; ");
}

inline PastView parse_past(std::string_view past) {
  PastView view;
  std::string s(text::trim(past));
  auto done = s.find("Done: ");
  if (text::starts_with(s, "Saw ")) {
    auto end = s.find(". ", 4);
    if (end != std::string::npos) view.room = text::split(s.substr(4, end - 4), ", ");
  }
  if (done != std::string::npos) {
    auto body = s.substr(done + 6);
    if (!body.empty()) view.actions = text::split(body, "; ");
  }
  return view;
}

// --- Action adaptation ----------------------------------------------------------------

namespace detail {

inline bool has_digit(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

inline std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  for (auto w : text::split(text::flatten(s), " ")) {
    while (!w.empty() && (w.back() == '.' || w.back() == ',')) w.pop_back();
    if (!w.empty()) out.push_back(text::lower(w));
  }
  return out;
}

/// Word substitutions turning the example goal into the current goal, when
/// the two share a sentence shape.
inline std::map<std::string, std::string> goal_substitutions(std::string_view from, std::string_view to) {
  std::map<std::string, std::string> subs;
  auto a = words(from);
  auto b = words(to);
  if (a.size() != b.size()) return subs;
  std::size_t differing = 0;
  for (std::size_t i = 0; i < a.size(); ++i) differing += a[i] != b[i];
  if (differing * 2 > a.size()) return subs;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i] && !has_digit(a[i]) && !has_digit(b[i])) subs.emplace(a[i], b[i]);
  return subs;
}

inline std::string apply_substitutions(std::string_view action, const std::map<std::string, std::string>& subs) {
  if (subs.empty()) return std::string(action);
  std::vector<std::string> out;
  for (const auto& w : text::split(action, " ")) {
    auto it = subs.find(w);
    out.push_back(it == subs.end() ? w : it->second);
  }
  return text::join(out, " ");
}

/// Instances named "<word> <n>" that appear in `s`, in order.
inline std::vector<std::string> instances_of(std::string_view s, std::string_view word) {
  std::vector<std::string> out;
  std::regex re("\\b" + std::string(word) + " ([0-9]+)\\b", std::regex::icase);
  std::string str(s);
  for (std::sregex_iterator it(str.begin(), str.end(), re), end; it != end; ++it) {
    auto name = text::lower(it->str());
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
  }
  return out;
}

/// Rewrites "<word> <n>" references to instances that exist here.
inline std::string ground_instances(const std::string& action, std::string_view observation,
                                    const std::vector<std::string>& room) {
  static const std::regex ref(R"(\b([a-z]+) ([0-9]+)\b)");
  auto room_text = text::join(room, ", ");
  std::string out;
  std::size_t last = 0;
  for (std::sregex_iterator it(action.begin(), action.end(), ref), end; it != end; ++it) {
    const auto& m = *it;
    auto name = m.str();
    std::string replacement = name;
    if (!mentions(observation, name) && !mentions(room_text, name)) {
      auto here = instances_of(observation, m[1].str());
      auto known = instances_of(room_text, m[1].str());
      if (!here.empty()) replacement = here.front();
      else if (!known.empty()) replacement = known.front();
    }
    out += action.substr(last, static_cast<std::size_t>(m.position()) - last) + replacement;
    last = static_cast<std::size_t>(m.position() + m.length());
  }
  return out + action.substr(last);
}

inline bool is_shop(const StateBlock& current) {
  return text::icontains(current.observation, "[Search]") || text::icontains(current.observation, "[Back to Search]");
}

inline std::optional<std::string> bracket_arg(std::string_view action, std::string_view verb) {
  auto a = text::trim(action);
  if (!text::istarts_with(a, verb) || a.size() < verb.size() + 2 || a[verb.size()] != '[' || a.back() != ']')
    return std::nullopt;
  return std::string(a.substr(verb.size() + 1, a.size() - verb.size() - 2));
}

inline std::vector<std::string> bracketed(std::string_view observation) {
  std::vector<std::string> out;
  for (const auto& line : text::split_lines(observation)) {
    auto t = text::trim(line);
    if (t.size() > 2 && t.front() == '[' && t.back() == ']') out.emplace_back(t.substr(1, t.size() - 2));
  }
  return out;
}

inline bool contains_ci(const std::vector<std::string>& items, std::string_view s) {
  return std::any_of(items.begin(), items.end(), [&](const std::string& x) { return text::iequals(x, s); });
}

}  // namespace detail

// --- Shop helpers -----------------------------------------------------------------------

/// Search text a shopper would type for an instruction.
inline std::string shop_query(std::string_view goal) {
  std::string s = text::lower(text::flatten(goal));
  if (auto cut = s.find(", and price"); cut != std::string::npos) s = s.substr(0, cut);
  static const std::regex lead(R"(^(i need|i want|i am looking for|find me)\s+)");
  static const std::regex label(R"((,\s*with\s+|\s+and\s+)?\b[a-z]+:\s)");
  static const std::regex glue(R"(\s+that is\s+|\s+and\s+|,\s*)");
  s = std::regex_replace(s, lead, "");
  s = std::regex_replace(s, label, " ");
  s = std::regex_replace(s, glue, " ");
  return text::flatten(s);
}

/// Requested option values ("size: 8 ounce" gives group size, value 8 ounce).
inline std::vector<std::pair<std::string, std::string>> shop_options(std::string_view goal) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string s = text::flatten(goal);
  auto with = s.find(", with ");
  if (with == std::string::npos) return out;
  auto end = s.find(", and price", with);
  auto body = s.substr(with + 7, end == std::string::npos ? std::string::npos : end - with - 7);
  static const std::regex pair_re(R"(([a-z]+): (.+?)(?= and [a-z]+: |$))", std::regex::icase);
  for (std::sregex_iterator it(body.begin(), body.end(), pair_re), e; it != e; ++it)
    out.emplace_back(text::lower((*it)[1].str()), std::string(text::trim((*it)[2].str())));
  return out;
}

struct ShopState {
  std::vector<std::string> visited_codes;   // since the last search
  std::vector<std::string> clicked_options;  // since the last product click
};

inline bool looks_like_code(std::string_view s) {
  return s.size() == 10 && s[0] == 'B' &&
         std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)) || std::isupper(static_cast<unsigned char>(c)); });
}

inline ShopState shop_state(const std::vector<std::string>& actions) {
  ShopState st;
  for (const auto& a : actions) {
    if (detail::bracket_arg(a, "search")) {
      st.visited_codes.clear();
      st.clicked_options.clear();
    } else if (auto arg = detail::bracket_arg(a, "click")) {
      if (looks_like_code(*arg)) {
        st.visited_codes.push_back(*arg);
        st.clicked_options.clear();
      } else if (!text::iequals(*arg, "< Prev") && !text::iequals(*arg, "Next >") &&
                 !text::iequals(*arg, "Back to Search") && !text::iequals(*arg, "Buy Now")) {
        st.clicked_options.push_back(*arg);
      } else if (text::iequals(*arg, "Back to Search")) {
        st.visited_codes.clear();
      }
    }
  }
  return st;
}

/// Product codes on a results page with their titles.
inline std::vector<std::pair<std::string, std::string>> shop_listing(std::string_view observation) {
  std::vector<std::pair<std::string, std::string>> out;
  auto lines = text::split_lines(observation);
  for (std::size_t i = 0; i + 1 < lines.size(); ++i) {
    auto t = std::string(text::trim(lines[i]));
    if (t.size() > 2 && t.front() == '[' && t.back() == ']' && looks_like_code(t.substr(1, t.size() - 2)))
      out.emplace_back(t.substr(1, t.size() - 2), std::string(text::trim(lines[i + 1])));
  }
  return out;
}

inline std::vector<std::string> ranked_products(std::string_view goal, std::string_view observation,
                                                const ShopState& st) {
  auto want = text::token_set(shop_query(goal));
  std::vector<std::pair<std::size_t, std::string>> scored;
  for (const auto& [code, title] : shop_listing(observation)) {
    if (detail::contains_ci(st.visited_codes, code)) continue;
    scored.emplace_back(text::overlap(want, text::token_set(title)), code);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<std::string> out;
  for (auto& [s, code] : scored) out.push_back(std::move(code));
  return out;
}

inline std::vector<std::string> pending_options(std::string_view goal, std::string_view observation,
                                                const ShopState& st) {
  std::vector<std::string> out;
  auto offered = detail::bracketed(observation);
  for (const auto& [group, value] : shop_options(goal))
    if (detail::contains_ci(offered, value) && !detail::contains_ci(st.clicked_options, value)) out.push_back(value);
  return out;
}

// --- House helpers -------------------------------------------------------------------

struct HouseView {
  std::string location;
  std::string holding;
  std::vector<std::string> visited;  // since the last take or put
  std::vector<std::string> done;
};

inline HouseView house_view(const std::vector<std::string>& actions) {
  static const std::regex go(R"(^go to (.+)$)");
  static const std::regex take(R"(^take (.+?) from (.+)$)");
  static const std::regex put(R"(^put (.+?) (?:in/on|in|on) (.+)$)");
  HouseView v;
  for (const auto& a : actions) {
    std::smatch m;
    if (std::regex_match(a, m, go)) {
      v.location = m[1].str();
      v.visited.push_back(v.location);
    } else if (std::regex_match(a, m, take)) {
      v.holding = m[1].str();
      v.visited = {v.location};
    } else if (std::regex_match(a, m, put)) {
      v.holding.clear();
      v.visited = {v.location};
    }
    v.done.push_back(a);
  }
  return v;
}

// --- Candidate generation -------------------------------------------------------------

struct Candidate {
  std::string action;
  double score = 0.0;
};

struct ActionContext {
  ActionPayload payload;
  PastView past;
  bool shop = false;
};

inline ActionContext action_context(std::string_view raw_payload) {
  ActionContext ctx;
  ctx.payload = parse_action_payload(raw_payload);
  ctx.past = parse_past(ctx.payload.current.past);
  ctx.shop = detail::is_shop(ctx.payload.current);
  if (auto listing = room_listing(ctx.payload.current.observation); !listing.empty()) ctx.past.room = listing;
  return ctx;
}

inline std::string adapt(const ActionContext& ctx, const StateBlock& example) {
  const auto& cur = ctx.payload.current;
  if (ctx.shop) {
    if (detail::bracket_arg(example.action, "search")) return "search[" + shop_query(cur.goal) + "]";
    auto arg = detail::bracket_arg(example.action, "click");
    if (!arg) return example.action;
    auto offered = detail::bracketed(cur.observation);
    if (detail::contains_ci(offered, *arg)) return example.action;
    auto st = shop_state(ctx.past.actions);
    if (looks_like_code(*arg)) {
      auto ranked = ranked_products(cur.goal, cur.observation, st);
      return ranked.empty() ? example.action : "click[" + ranked.front() + "]";
    }
    for (const auto& [group, value] : shop_options(example.goal)) {
      if (!text::iequals(value, *arg)) continue;
      for (const auto& [g, v] : shop_options(cur.goal))
        if (g == group) return "click[" + v + "]";
    }
    auto pending = pending_options(cur.goal, cur.observation, st);
    return pending.empty() ? example.action : "click[" + pending.front() + "]";
  }
  auto action = detail::apply_substitutions(text::lower(text::flatten(example.action)),
                                            detail::goal_substitutions(example.goal, cur.goal));
  return detail::ground_instances(action, cur.observation, ctx.past.room);
}

inline bool plausible_shop(const ActionContext& ctx, const std::string& action) {
  const auto& cur = ctx.payload.current;
  if (detail::bracket_arg(action, "search")) return text::icontains(cur.observation, "[Search]");
  auto arg = detail::bracket_arg(action, "click");
  if (!arg) return false;
  auto offered = detail::bracketed(cur.observation);
  if (!detail::contains_ci(offered, *arg)) return false;
  auto st = shop_state(ctx.past.actions);
  if (looks_like_code(*arg)) return !detail::contains_ci(st.visited_codes, *arg);
  if (text::iequals(*arg, "Buy Now")) return pending_options(cur.goal, cur.observation, st).empty();
  if (text::iequals(*arg, "< Prev") || text::iequals(*arg, "Next >") || text::iequals(*arg, "Back to Search"))
    return true;
  for (const auto& [g, v] : shop_options(cur.goal))
    if (text::iequals(v, *arg)) return !detail::contains_ci(st.clicked_options, *arg);
  return false;
}

inline bool plausible_house(const ActionContext& ctx, const std::string& action) {
  const auto& obs = ctx.payload.current.observation;
  auto v = house_view(ctx.past.actions);
  static const std::regex go(R"(^go to (.+)$)");
  static const std::regex take(R"(^take (.+?) from (.+)$)");
  static const std::regex put(R"(^put (.+?) (?:in/on|in|on) (.+)$)");
  static const std::regex open(R"(^open (.+)$)");
  static const std::regex modify(R"(^(cool|heat|clean) (.+?) with (.+)$)");
  std::smatch m;
  if (std::regex_match(action, m, go)) {
    auto where = m[1].str();
    if (where == v.location) return false;
    if (!ctx.past.room.empty() && !detail::contains_ci(ctx.past.room, where)) return false;
    return !v.holding.empty() || !detail::contains_ci(v.visited, where);
  }
  if (std::regex_match(action, m, take))
    return v.holding.empty() && mentions(obs, m[1].str()) && (v.location.empty() || v.location == m[2].str());
  if (std::regex_match(action, m, put))
    return v.holding == m[1].str() && v.location == m[2].str() && !mentions(obs, m[2].str() + " is closed");
  if (std::regex_match(action, m, open)) return mentions(obs, m[1].str() + " is closed");
  if (std::regex_match(action, m, modify))
    return v.holding == m[2].str() && v.location == m[3].str() &&
           std::find(v.done.begin(), v.done.end(), action) == v.done.end();
  if (action == "use desklamp 1" || text::starts_with(action, "use "))
    return !v.holding.empty() && mentions(obs, action.substr(4));
  return false;
}

inline bool rejected(const ActionContext& ctx, const std::string& action) {
  return std::any_of(ctx.payload.rejected.begin(), ctx.payload.rejected.end(),
                     [&](const Rejection& r) { return text::iequals(text::trim(r.action), action); });
}

/// Example actions adapted to the current state, best imitation first.
inline std::vector<Candidate> imitation_candidates(const ActionContext& ctx) {
  const auto& cur = ctx.payload.current;
  auto g = text::token_set(cur.goal);
  auto o = text::token_set(cur.observation);
  auto p = text::token_set(cur.past);
  std::vector<Candidate> out;
  for (const auto& ex : ctx.payload.examples) {
    auto action = adapt(ctx, ex);
    bool ok = ctx.shop ? plausible_shop(ctx, action) : plausible_house(ctx, action);
    if (!ok || rejected(ctx, action)) continue;
    double score = 3.0 * text::jaccard(g, text::token_set(ex.goal)) +
                   2.0 * text::jaccard(o, text::token_set(ex.observation)) +
                   1.0 * text::jaccard(p, text::token_set(ex.past));
    auto it = std::find_if(out.begin(), out.end(), [&](const Candidate& c) { return c.action == action; });
    if (it == out.end()) out.push_back({action, score});
    else it->score = std::max(it->score, score);
  }
  std::stable_sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
  return out;
}

/// Moves any reader of the goal would make in the current house state; the
/// examples are consulted only to learn which appliance a verb needs.
inline std::vector<Candidate> obvious_house_moves(const ActionContext& ctx) {
  const auto& cur = ctx.payload.current;
  auto v = house_view(ctx.past.actions);
  auto goal_tokens = text::content_tokens(cur.goal);
  std::vector<Candidate> out;
  auto push = [&](const std::string& action) {
    if (!rejected(ctx, action) && plausible_house(ctx, action)) out.push_back({action, 2.0});
  };
  auto type_of = [](const std::string& name) { return name.substr(0, name.rfind(' ')); };
  std::set<std::string> room_types;
  for (const auto& r : ctx.past.room) room_types.insert(type_of(r));

  std::string target;
  for (const auto& t : goal_tokens)
    if (room_types.contains(t)) target = t;
  auto words = detail::words(cur.goal);
  std::string verb = words.empty() ? "" : words.front();
  bool modifies = verb == "cool" || verb == "heat" || verb == "clean";
  bool modified = std::any_of(v.done.begin(), v.done.end(), [&](const std::string& a) { return text::starts_with(a, verb + " "); });

  std::string appliance;
  if (modifies) {
    for (const auto& ex : ctx.payload.examples) {
      auto a = text::lower(text::flatten(ex.action));
      auto with = a.find(" with ");
      if (text::starts_with(a, verb + " ") && with != std::string::npos) {
        appliance = detail::ground_instances(a.substr(with + 6), cur.observation, ctx.past.room);
        break;
      }
    }
  }
  const std::string here = v.location.empty() ? "" : type_of(v.location);

  if (!v.holding.empty()) {
    if (modifies && !modified) {
      // Unknown appliance: try the one at hand, a rejection rules it out.
      if (appliance.empty()) {
        if (!v.location.empty()) push(verb + " " + v.holding + " with " + v.location);
        return out;
      }
      if (v.location == appliance) push(verb + " " + v.holding + " with " + appliance);
      else push("go to " + appliance);
      return out;
    }
    if (text::icontains(cur.goal, "desklamp")) {
      auto lamps = detail::instances_of(cur.observation, "desklamp");
      if (!lamps.empty()) push("use " + lamps.front());
      return out;
    }
    if (target.empty()) return out;
    if (here == target) {
      if (mentions(cur.observation, v.location + " is closed")) push("open " + v.location);
      else push("put " + v.holding + " in/on " + v.location);
      return out;
    }
    for (const auto& r : ctx.past.room)
      if (type_of(r) == target) {
        push("go to " + r);
        break;
      }
    return out;
  }

  if (here.empty() || here == target) return out;
  for (const auto& t : goal_tokens) {
    if (t == target || t == "desklamp") continue;
    for (const auto& inst : detail::instances_of(cur.observation, t)) push("take " + inst + " from " + v.location);
  }
  if (out.empty() && mentions(cur.observation, v.location + " is closed")) push("open " + v.location);
  return out;
}

/// Moves that make progress without any example to copy.
inline std::vector<Candidate> exploration_candidates(const ActionContext& ctx) {
  const auto& cur = ctx.payload.current;
  std::vector<Candidate> out;
  auto push = [&](std::string action, double weight) {
    if (rejected(ctx, action)) return;
    for (const auto& c : out)
      if (c.action == action) return;
    out.push_back({std::move(action), weight});
  };
  if (ctx.shop) {
    auto st = shop_state(ctx.past.actions);
    if (text::icontains(cur.observation, "[Search]") && !text::icontains(cur.observation, "[Back to Search]")) {
      push("search[" + shop_query(cur.goal) + "]", 1.0);
      return out;
    }
    if (text::icontains(cur.observation, "[Buy Now]")) {
      for (const auto& v : pending_options(cur.goal, cur.observation, st)) push("click[" + v + "]", 1.0);
      push("click[Buy Now]", 0.5);
      return out;
    }
    auto want = text::token_set(shop_query(cur.goal));
    for (const auto& code : ranked_products(cur.goal, cur.observation, st)) {
      std::string title;
      for (const auto& [c, t] : shop_listing(cur.observation))
        if (c == code) title = t;
      auto hit = text::overlap(want, text::token_set(title));
      push("click[" + code + "]", 0.5 + static_cast<double>(hit) / static_cast<double>(std::max<std::size_t>(1, want.size())));
    }
    if (text::icontains(cur.observation, "[Next >]")) push("click[Next >]", 0.1);
    return out;
  }
  auto v = house_view(ctx.past.actions);
  std::vector<std::string> places;
  for (const auto& ex : ctx.payload.examples) {
    auto a = adapt(ctx, ex);
    if (text::starts_with(a, "go to ")) places.push_back(a.substr(6));
  }
  places.insert(places.end(), ctx.past.room.begin(), ctx.past.room.end());
  double weight = 0.3;
  auto add_places = [&](bool ignore_visits) {
    for (const auto& where : places) {
      auto action = "go to " + where;
      bool ok = ignore_visits ? where != v.location : plausible_house(ctx, action);
      if (ok) {
        push(action, weight);
        weight *= 0.9;
      }
    }
  };
  add_places(false);
  // Every known place has been searched: start another round.
  if (out.empty()) add_places(true);
  push("look", 0.01);
  return out;
}

// --- Responses per prompt kind ---------------------------------------------------------

inline std::string respond_summary(std::string_view payload) {
  PastView view;
  auto lines = text::split_lines(payload);
  std::vector<std::string> observation;
  bool in_obs = false;
  for (const auto& line : lines) {
    if (text::starts_with(line, "Step ")) {
      in_obs = false;
    } else if (line == "The interface is:") {
      in_obs = true;
      observation.clear();
    } else if (text::starts_with(line, "Action: ")) {
      if (auto listing = room_listing(text::join(observation, "\n")); !listing.empty()) view.room = listing;
      in_obs = false;
      view.actions.push_back(line.substr(8));
    } else if (in_obs) {
      observation.push_back(line);
    }
  }
  if (view.actions.empty()) return render_summary(kNoPastActions);
  return render_summary(render_past(view));
}

inline std::vector<std::string> split_subgoals(std::string_view goal) {
  std::string s = text::lower(text::flatten(goal));
  while (!s.empty() && s.back() == '.') s.pop_back();
  if (auto cut = s.find(", and price"); cut != std::string::npos) {
    auto price = s.substr(cut + 6);
    s = s.substr(0, cut) + ", " + price;
  }
  static const std::regex sep(R"(,\s*|\s+and\s+)");
  std::vector<std::string> out;
  for (std::sregex_token_iterator it(s.begin(), s.end(), sep, -1), end; it != end; ++it) {
    auto part = std::string(text::trim(it->str()));
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

inline std::string respond_evaluation(std::string_view payload) {
  auto goal = payload_goal(payload);
  std::set<std::string> seen;
  for (const auto& a : payload_actions(payload))
    for (auto& t : text::content_tokens(a)) seen.insert(std::move(t));
  std::vector<SubgoalState> states;
  for (const auto& sub : split_subgoals(goal)) {
    auto tokens = text::content_tokens(sub);
    bool complete = !tokens.empty() && !seen.empty() &&
                    std::all_of(tokens.begin(), tokens.end(), [&](const std::string& t) { return seen.contains(t); });
    states.push_back({sub, complete ? SubgoalStatus::Complete : SubgoalStatus::Incomplete});
  }
  if (states.empty()) states.push_back({text::lower(goal), SubgoalStatus::Incomplete});
  return render_evaluation(states);
}

inline std::string sanitize_name(std::string name) {
  std::erase_if(name, [](char c) { return c == '[' || c == ']' || c == '\n'; });
  return name;
}

inline std::string respond_cluster(std::string_view payload, bool goals) {
  auto items = parse_numbered_list(payload);
  std::vector<ClusterEntry> entries;
  std::map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto key = sanitize_name(goals ? goal_key(items[i]) : observation_key(items[i]));
    auto [it, fresh] = slot.emplace(key, entries.size());
    if (fresh) entries.push_back({key, {}});
    entries[it->second].member_ids.push_back(static_cast<long long>(i + 1));
  }
  if (entries.empty()) return "High-level Type1: misc []";
  return render_cluster(entries);
}

inline std::string respond_index(std::string_view payload, bool goals) {
  auto parsed = parse_index_payload(payload);
  if (parsed.types.empty()) return "[1]: no types listed";
  auto key = goals ? goal_key(parsed.query) : observation_key(parsed.query);
  for (std::size_t i = 0; i < parsed.types.size(); ++i)
    if (parsed.types[i].name == key) return render_classification(static_cast<long long>(i + 1), "same type");
  auto q = text::token_set(parsed.query);
  std::size_t best = 0;
  double best_score = -1.0;
  for (std::size_t i = 0; i < parsed.types.size(); ++i) {
    auto doc = text::token_set(parsed.types[i].name + " " + text::join(parsed.types[i].examples, " "));
    auto score = text::jaccard(q, doc);
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return render_classification(static_cast<long long>(best + 1), "closest match");
}

inline std::string respond_action(std::string_view payload) {
  auto ctx = action_context(payload);
  if (!ctx.shop) {
    auto obvious = obvious_house_moves(ctx);
    if (!obvious.empty()) return obvious.front().action;
  }
  auto imitation = imitation_candidates(ctx);
  if (!imitation.empty()) return imitation.front().action;
  auto explore = exploration_candidates(ctx);
  if (!explore.empty()) return explore.front().action;
  return ctx.shop ? "click[Back to Search]" : "look";
}

inline std::string respond_tree(std::string_view payload) {
  auto ctx = action_context(payload);
  std::vector<Proposal> proposals;
  auto add = [&](const std::string& action, double weight) {
    for (auto& p : proposals)
      if (p.action == action) {
        p.confidence += weight;
        return;
      }
    proposals.push_back({action, weight});
  };
  if (!ctx.shop)
    for (const auto& c : obvious_house_moves(ctx)) add(c.action, 1.0 + c.score);
  for (const auto& c : imitation_candidates(ctx)) add(c.action, 1.0 + c.score);
  for (const auto& c : exploration_candidates(ctx))
    if (c.action != "look") add(c.action, c.score);
  if (proposals.empty()) add(respond_action(payload), 1.0);
  std::stable_sort(proposals.begin(), proposals.end(),
                   [](const Proposal& a, const Proposal& b) { return a.confidence > b.confidence; });
  if (proposals.size() > 6) proposals.resize(6);
  renormalize(proposals);
  return render_proposals(proposals);
}

inline std::string respond_compare(std::string_view payload) {
  auto listing = parse_process_payload(payload);
  if (listing.processes.size() < 2) return render_key_step(1, "only one process given");
  const auto& a = listing.processes[0];
  const auto& b = listing.processes[1];
  std::size_t i = 0;
  while (i < a.size() && i < b.size() && a[i] == b[i]) ++i;
  return render_key_step(static_cast<long long>(std::min(i + 1, std::max<std::size_t>(a.size(), 1))),
                         "the processes first differ here");
}

inline std::string respond_final_choice(std::string_view payload) {
  auto listing = parse_process_payload(payload);
  auto g = text::token_set(listing.goal);
  std::size_t best = 0, best_hit = 0;
  for (std::size_t i = 0; i < listing.processes.size(); ++i) {
    auto hit = text::overlap(g, text::token_set(text::join(listing.processes[i], " ")));
    if (hit > best_hit) {
      best_hit = hit;
      best = i;
    }
  }
  return render_classification(static_cast<long long>(best + 1), "covers the goal best");
}

inline std::string respond(const LlmRequest& request) {
  // A format reminder appended on retry must not change the answer.
  std::string_view payload = request.payload;
  if (payload.ends_with(kFormatReminder)) payload.remove_suffix(kFormatReminder.size());
  switch (request.kind) {
    case PromptKind::Summarization: return respond_summary(payload);
    case PromptKind::Evaluation: return respond_evaluation(payload);
    case PromptKind::ClusterGoals: return respond_cluster(payload, true);
    case PromptKind::ClusterObservations: return respond_cluster(payload, false);
    case PromptKind::IndexGoal: return respond_index(payload, true);
    case PromptKind::IndexObservation: return respond_index(payload, false);
    case PromptKind::Action: return respond_action(payload);
    case PromptKind::TreeExploration: return respond_tree(payload);
    case PromptKind::Compare: return respond_compare(payload);
    case PromptKind::FinalChoice: return respond_final_choice(payload);
  }
  return {};
}

}  // namespace ldm::llm::rules
