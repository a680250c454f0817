#pragma once

// Miniature e-commerce site: search, result pages, product pages with option
// groups, and a purchase that is scored by requirement coverage.

#include <algorithm>
#include <map>
#include <memory>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ldm/env/environment.hpp"
#include "ldm/rng.hpp"
#include "ldm/text.hpp"

namespace ldm::env {

struct OptionGroup {
  std::string name;
  std::vector<std::string> values;

  friend bool operator==(const OptionGroup&, const OptionGroup&) = default;
};

struct Product {
  std::string code;
  std::string title;
  std::string category;
  std::vector<std::string> attributes;
  std::vector<OptionGroup> options;
  long long price_cents = 0;

  double price() const { return static_cast<double>(price_cents) / 100.0; }

  friend bool operator==(const Product&, const Product&) = default;
};

struct Catalog {
  std::vector<Product> products;

  const Product* find(std::string_view code) const {
    for (const auto& p : products)
      if (text::iequals(p.code, code)) return &p;
    return nullptr;
  }

  void validate() const {
    std::set<std::string> codes;
    for (const auto& p : products)
      if (!codes.insert(text::lower(p.code)).second) fail(ErrorCode::ConfigError, "duplicate product code " + p.code);
  }

  friend bool operator==(const Catalog&, const Catalog&) = default;
};

inline std::string format_price(long long cents) { return text::format_fixed(static_cast<double>(cents) / 100.0, 2); }

inline nlohmann::ordered_json to_json(const Catalog& catalog) {
  nlohmann::ordered_json products = nlohmann::ordered_json::array();
  for (const auto& p : catalog.products) {
    nlohmann::ordered_json options = nlohmann::ordered_json::array();
    for (const auto& g : p.options) options.push_back({{"name", g.name}, {"values", g.values}});
    products.push_back({{"code", p.code},
                        {"title", p.title},
                        {"category", p.category},
                        {"attributes", p.attributes},
                        {"options", options},
                        {"price", format_price(p.price_cents)}});
  }
  return {{"products", products}};
}

inline Catalog catalog_from_json(const nlohmann::json& doc) {
  Catalog catalog;
  try {
    for (const auto& item : doc.at("products")) {
      Product p;
      p.code = item.at("code").get<std::string>();
      p.title = item.at("title").get<std::string>();
      p.category = item.value("category", "");
      p.attributes = item.value("attributes", std::vector<std::string>{});
      for (const auto& g : item.value("options", nlohmann::json::array()))
        p.options.push_back({g.at("name").get<std::string>(), g.at("values").get<std::vector<std::string>>()});
      const auto& price = item.at("price");
      double value = 0.0;
      if (price.is_string()) {
        if (!text::parse_real(price.get<std::string>(), value)) fail(ErrorCode::ConfigError, "bad price");
      } else {
        value = price.get<double>();
      }
      p.price_cents = static_cast<long long>(value * 100.0 + 0.5);
      catalog.products.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ConfigError, std::string("catalog: ") + e.what());
  }
  catalog.validate();
  return catalog;
}

// --- Instructions -------------------------------------------------------------

struct ShopGoal {
  std::string category;
  std::vector<std::string> attributes;
  std::vector<std::pair<std::string, std::string>> options;  // group -> value
  long long price_ceiling_cents = 0;

  std::size_t requirement_count() const { return attributes.size() + options.size() + 1; }

  /// Query an expert would type: category, attributes and option values.
  std::string query() const {
    std::vector<std::string> parts{category};
    parts.insert(parts.end(), attributes.begin(), attributes.end());
    for (const auto& [group, value] : options) parts.push_back(value);
    return text::join(parts, " ");
  }

  friend bool operator==(const ShopGoal&, const ShopGoal&) = default;
};

inline std::string render_shop_goal(const ShopGoal& goal) {
  std::string out = "i need " + goal.category;
  if (!goal.attributes.empty()) out += " that is " + text::join(goal.attributes, " and ");
  if (!goal.options.empty()) {
    std::vector<std::string> parts;
    for (const auto& [group, value] : goal.options) parts.push_back(group + ": " + value);
    out += ", with " + text::join(parts, " and ");
  }
  out += ", and price lower than " + format_price(goal.price_ceiling_cents) + " dollars";
  return out;
}

inline ShopGoal parse_shop_goal(std::string_view instruction) {
  static const std::regex re(
      R"(^i need (.+?)(?: that is (.+?))?(?:, with (.+?))?, and price lower than ([0-9]+(?:\.[0-9]{1,2})?) dollars\.?$)",
      std::regex::icase);
  std::string s(text::trim(instruction));
  std::smatch m;
  if (!std::regex_match(s, m, re)) fail(ErrorCode::UnparseableGoal, "not a shop instruction: " + s);
  ShopGoal goal;
  goal.category = m[1].str();
  if (m[2].matched)
    for (auto& a : text::split(m[2].str(), " and ")) goal.attributes.emplace_back(text::trim(a));
  if (m[3].matched) {
    for (auto& part : text::split(m[3].str(), " and ")) {
      auto colon = part.find(": ");
      if (colon == std::string::npos) fail(ErrorCode::UnparseableGoal, "option without 'group: value': " + part);
      goal.options.emplace_back(std::string(text::trim(part.substr(0, colon))),
                                std::string(text::trim(part.substr(colon + 2))));
    }
  }
  double price = 0.0;
  text::parse_real(m[4].str(), price);
  goal.price_ceiling_cents = static_cast<long long>(price * 100.0 + 0.5);
  return goal;
}

/// Fraction of requirements a purchase satisfies; steps of 1/m.
inline double purchase_reward(const ShopGoal& goal, const Product& product,
                              const std::map<std::string, std::string>& selected) {
  std::size_t matched = 0;
  for (const auto& attr : goal.attributes)
    for (const auto& have : product.attributes)
      if (text::iequals(attr, have)) {
        ++matched;
        break;
      }
  for (const auto& [group, value] : goal.options) {
    auto it = selected.find(text::lower(group));
    if (it != selected.end() && text::iequals(it->second, value)) ++matched;
  }
  if (product.price_cents <= goal.price_ceiling_cents) ++matched;
  return static_cast<double>(matched) / static_cast<double>(goal.requirement_count());
}

// --- Environment --------------------------------------------------------------

class ToyShop final : public Environment {
 public:
  static constexpr std::size_t kPageSize = 3;

  explicit ToyShop(Catalog catalog) : catalog_(std::make_shared<const Catalog>(std::move(catalog))) {
    catalog_->validate();
  }

  const Catalog& catalog() const { return *catalog_; }
  const ShopGoal& goal() const { return state_.goal; }

  std::string family() const override { return "toyshop"; }

  std::string reset(const std::string& goal, std::uint64_t seed) override {
    State fresh;
    fresh.goal = parse_shop_goal(goal);
    fresh.goal_text = std::string(text::trim(goal));
    fresh.seed = seed;
    state_ = std::move(fresh);
    run_id_ = next_run_id();
    state_.observation = render();
    return state_.observation;
  }

  StepOutcome step(const std::string& action) override {
    if (run_id_ == 0) return reject("The environment has not been reset.");
    if (state_.done) return reject("The episode is over.");
    static const std::regex re(R"(^\s*(search|click)\s*\[(.*)\]\s*$)", std::regex::icase);
    std::smatch m;
    if (!std::regex_match(action, m, re)) return reject("Unrecognized action \"" + action + "\"; use search[...] or click[...].");
    auto verb = text::lower(m[1].str());
    auto arg = std::string(text::trim(m[2].str()));
    auto key = text::lower(arg);

    State next = state_;
    next.last_click.clear();
    if (verb == "search") {
      if (state_.page != Page::Search) return reject("search is only available on the search page.");
      if (arg.empty()) return reject("search query is empty.");
      next.ranking = rank(arg);
      next.page = Page::Results;
      next.page_index = 0;
    } else if (key == "back to search") {
      if (state_.page == Page::Search) return reject("You are already on the search page.");
      next.page = Page::Search;
      next.ranking.clear();
    } else if (state_.page == Page::Results) {
      if (key == "next >") {
        if ((state_.page_index + 1) * kPageSize >= state_.ranking.size()) return reject("There is no next page.");
        ++next.page_index;
      } else if (key == "< prev") {
        if (state_.page_index == 0) return reject("There is no previous page.");
        --next.page_index;
      } else {
        auto idx = code_on_page(arg);
        if (!idx) return reject("\"" + arg + "\" is not a product on this page.");
        next.page = Page::Product;
        next.product = *idx;
        next.selected.clear();
      }
    } else if (state_.page == Page::Product) {
      const auto& product = catalog_->products[state_.product];
      if (key == "< prev") {
        next.page = Page::Results;
      } else if (key == "buy now") {
        next.done = true;
        next.reward = purchase_reward(state_.goal, product, state_.selected);
      } else {
        bool found = false;
        for (const auto& group : product.options) {
          for (const auto& value : group.values) {
            if (text::iequals(value, arg)) {
              next.selected[text::lower(group.name)] = value;
              next.last_click = value;
              found = true;
              break;
            }
          }
          if (found) break;
        }
        if (!found) return reject("\"" + arg + "\" is not an option of this product.");
      }
    } else {
      return reject("Only search[...] is available on the search page.");
    }

    ++next.step_count;
    state_ = std::move(next);
    state_.observation = state_.done ? "Thank you for shopping with us!" : render();
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
    switch (state_.page) {
      case Page::Search:
        out.push_back("search[" + state_.goal.query() + "]");
        break;
      case Page::Results: {
        out.push_back("click[Back to Search]");
        if (state_.page_index > 0) out.push_back("click[< Prev]");
        if ((state_.page_index + 1) * kPageSize < state_.ranking.size()) out.push_back("click[Next >]");
        for (auto idx : page_items()) out.push_back("click[" + catalog_->products[idx].code + "]");
        break;
      }
      case Page::Product: {
        out.push_back("click[Back to Search]");
        out.push_back("click[< Prev]");
        for (const auto& group : catalog_->products[state_.product].options)
          for (const auto& value : group.values) out.push_back("click[" + value + "]");
        out.push_back("click[Buy Now]");
        break;
      }
    }
    return out;
  }

  std::optional<double> exhaustion_reward() const override { return std::nullopt; }

  std::unique_ptr<Environment> clone() const override { return std::make_unique<ToyShop>(*this); }

 private:
  enum class Page { Search, Results, Product };

  struct State {
    ShopGoal goal;
    std::string goal_text;
    Page page = Page::Search;
    std::vector<std::size_t> ranking;
    std::size_t page_index = 0;
    std::size_t product = 0;
    std::map<std::string, std::string> selected;
    std::string last_click;
    std::string observation;
    std::size_t step_count = 0;
    bool done = false;
    std::optional<double> reward;
    std::uint64_t seed = 0;
  };

  StepOutcome reject(const std::string& message) const { return StepOutcome{false, message, state_.done, std::nullopt}; }

  /// Every product, by descending query-token overlap, ties by code.
  std::vector<std::size_t> rank(std::string_view query) const {
    auto q = text::token_set(query);
    std::vector<std::pair<std::size_t, std::size_t>> scored;
    for (std::size_t i = 0; i < catalog_->products.size(); ++i) {
      const auto& p = catalog_->products[i];
      auto doc = text::token_set(p.title + " " + p.category + " " + text::join(p.attributes, " "));
      scored.emplace_back(text::overlap(q, doc), i);
    }
    std::stable_sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return catalog_->products[a.second].code < catalog_->products[b.second].code;
    });
    std::vector<std::size_t> out;
    for (const auto& [score, idx] : scored) out.push_back(idx);
    return out;
  }

  std::vector<std::size_t> page_items() const {
    std::vector<std::size_t> out;
    auto begin = state_.page_index * kPageSize;
    for (auto i = begin; i < std::min(begin + kPageSize, state_.ranking.size()); ++i) out.push_back(state_.ranking[i]);
    return out;
  }

  std::optional<std::size_t> code_on_page(std::string_view code) const {
    for (auto idx : page_items())
      if (text::iequals(catalog_->products[idx].code, code)) return idx;
    return std::nullopt;
  }

  std::string render() const {
    std::string out;
    switch (state_.page) {
      case Page::Search:
        out = "Instruction: " + state_.goal_text + "\n[Search]";
        break;
      case Page::Results: {
        out = "[Back to Search]\nPage " + std::to_string(state_.page_index + 1) +
              " (Total results: " + std::to_string(state_.ranking.size()) + ")\n";
        if (state_.page_index > 0) out += "[< Prev]\n";
        if ((state_.page_index + 1) * kPageSize < state_.ranking.size()) out += "[Next >]\n";
        for (auto idx : page_items()) {
          const auto& p = catalog_->products[idx];
          out += "[" + p.code + "]\n" + p.title + "\n" + format_price(p.price_cents) + "\n";
        }
        if (!out.empty() && out.back() == '\n') out.pop_back();
        break;
      }
      case Page::Product: {
        const auto& p = catalog_->products[state_.product];
        out = "[Back to Search]\n[< Prev]\n";
        for (const auto& group : p.options) {
          out += group.name + "\n";
          for (const auto& v : group.values) out += "  [" + v + "]\n";
        }
        out += p.title + "\n";
        out += "Price: " + format_price(p.price_cents) + "\n";
        out += "Features: " + text::join(p.attributes, ", ") + "\n";
        out += "[Buy Now]";
        if (!state_.last_click.empty()) out += "\nYou have clicked " + state_.last_click + ".";
        break;
      }
    }
    return out;
  }

  std::shared_ptr<const Catalog> catalog_;
  State state_;
  std::uint64_t run_id_ = 0;
};

// --- Generation ---------------------------------------------------------------

namespace detail {

struct CategorySpec {
  std::string category;
  std::vector<std::string> attributes;
  std::vector<OptionGroup> options;
};

inline const std::vector<CategorySpec>& shop_categories() {
  static const std::vector<CategorySpec> specs = {
      {"shoes",
       {"steel toe", "rubber sole", "slip resistant", "waterproof", "arch support", "lightweight"},
       {{"color", {"khaki", "black", "brown", "white", "gray"}},
        {"size", {"8 women | 6.5 men", "9 women | 7.5 men", "10.5 women | 9 men", "11 women | 9 men", "11.5 women | 9.5 men"}}}},
      {"shorts",
       {"loose fit", "elastic waistband", "moisture wicking", "polyester cotton", "quick dry", "long lasting"},
       {{"color", {"black", "navy", "gray", "khaki", "green"}}, {"size", {"small", "medium", "large", "x-large", "4x-large"}}}},
      {"lounge pants",
       {"drawstring closure", "elastic waistband", "fleece lined", "machine wash", "relaxed fit"},
       {{"color", {"charcoal", "black", "navy", "heather gray"}}, {"size", {"medium", "large", "x-large", "5x-large"}}}},
      {"fleece jacket",
       {"warm", "full zip", "water resistant", "machine wash", "lightweight"},
       {{"color", {"gray", "black", "red", "blue"}}, {"size", {"small", "medium", "large", "x-large"}}}},
      {"speaker",
       {"bluetooth", "high power", "3d surround", "portable", "subwoofer", "waterproof"},
       {{"color", {"black", "blue", "red"}}}},
      {"face cream",
       {"long lasting", "paraben free", "dry skin", "natural ingredients", "fragrance free"},
       {{"size", {"1.7 ounce", "3.4 fl oz", "8 ounce"}}}},
  };
  return specs;
}

inline std::string title_case(std::string_view s) {
  std::string out(s);
  bool start = true;
  for (auto& c : out) {
    if (start && c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
    start = c == ' ';
  }
  return out;
}

template <typename T>
std::vector<T> sample_subset(Rng& rng, const std::vector<T>& pool, std::size_t lo, std::size_t hi) {
  std::vector<std::size_t> idx(pool.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  rng.shuffle(idx);
  auto n = std::min(pool.size(), lo + rng.below(hi - lo + 1));
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  std::vector<T> out;
  for (auto i : idx) out.push_back(pool[i]);
  return out;
}

}  // namespace detail

inline std::string random_product_code(Rng& rng) {
  static constexpr char alphabet[] = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ";
  std::string code = "B0";
  for (int i = 0; i < 8; ++i) code += alphabet[rng.below(36)];
  return code;
}

inline Product random_product(Rng& rng, const detail::CategorySpec& spec) {
  static const std::vector<std::string> brands = {"Carol Wright", "Yinimo", "ASICS",  "HAUKLIE",
                                                  "Foggs",        "ZSpzx",  "Cozee", "InterestPrint"};
  Product p;
  p.code = random_product_code(rng);
  p.category = spec.category;
  p.attributes = detail::sample_subset(rng, spec.attributes, 2, 4);
  for (const auto& group : spec.options) p.options.push_back({group.name, detail::sample_subset(rng, group.values, 2, 4)});
  std::string title = rng.pick(brands);
  for (std::size_t i = 0; i < p.attributes.size() && i < 2; ++i) title += " " + detail::title_case(p.attributes[i]);
  title += " " + detail::title_case(spec.category);
  p.title = title;
  p.price_cents = 1000 + static_cast<long long>(rng.below(9000));
  return p;
}

/// Catalog of `count` products drawn across all categories, codes unique.
inline Catalog generate_catalog(Rng& rng, std::size_t count) {
  const auto& specs = detail::shop_categories();
  Catalog catalog;
  std::set<std::string> codes;
  while (catalog.products.size() < count) {
    auto p = random_product(rng, specs[catalog.products.size() % specs.size()]);
    if (codes.insert(p.code).second) catalog.products.push_back(std::move(p));
  }
  return catalog;
}

/// Goal fully satisfiable by `product`: 1-2 of its attributes, one value per
/// option group, and a ceiling at the next multiple of ten dollars.
inline ShopGoal goal_for_product(Rng& rng, const Product& product) {
  ShopGoal goal;
  goal.category = product.category;
  goal.attributes = detail::sample_subset(rng, product.attributes, 1, 2);
  for (const auto& group : product.options) goal.options.emplace_back(group.name, rng.pick(group.values));
  goal.price_ceiling_cents = (product.price_cents / 1000 + 1) * 1000;
  return goal;
}

}  // namespace ldm::env
