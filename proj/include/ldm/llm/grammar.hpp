#pragma once

// Parsers and renderers for the response formats requested by each prompt.
// Parsers are total: they return a value or throw ldm::Error, never crash.

#include <cmath>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "ldm/error.hpp"
#include "ldm/text.hpp"

namespace ldm::llm {

enum class SubgoalStatus { Complete, Incomplete };

struct SubgoalState {
  std::string subgoal;
  SubgoalStatus status = SubgoalStatus::Incomplete;

  friend bool operator==(const SubgoalState&, const SubgoalState&) = default;
};

struct ClusterEntry {
  std::string type_name;
  std::vector<long long> member_ids;

  friend bool operator==(const ClusterEntry&, const ClusterEntry&) = default;
};

struct Proposal {
  std::string action;
  double confidence = 0.0;

  friend bool operator==(const Proposal&, const Proposal&) = default;
};

namespace detail {

[[noreturn]] inline void violation(const std::string& what) { fail(ErrorCode::FormatViolation, what); }

inline void require_nonempty(std::string_view raw) {
  if (text::trim(raw).empty()) violation("empty response");
}

}  // namespace detail

// --- Summarization ---------------------------------------------------------

inline std::string parse_summary(std::string_view raw) {
  detail::require_nonempty(raw);
  auto pos = text::lower(raw).find("summary:");
  if (pos == std::string::npos) detail::violation("missing 'Summary:' marker");
  auto body = text::trim(raw.substr(pos + 8));
  if (body.empty()) detail::violation("empty summary");
  return std::string(body);
}

inline std::string render_summary(std::string_view summary) { return "Summary: " + std::string(summary); }

// --- Evaluation -------------------------------------------------------------

inline std::vector<SubgoalState> parse_evaluation(std::string_view raw) {
  detail::require_nonempty(raw);
  static const std::regex marker(R"(subgoal\s*[0-9]+\s*:)", std::regex::icase);
  std::string s(raw);
  std::vector<std::pair<std::size_t, std::size_t>> marks;  // (start, end of marker)
  for (auto it = std::sregex_iterator(s.begin(), s.end(), marker); it != std::sregex_iterator(); ++it)
    marks.emplace_back(static_cast<std::size_t>(it->position()),
                       static_cast<std::size_t>(it->position() + it->length()));
  if (marks.empty()) detail::violation("no 'Subgoal k:' entries");

  std::vector<SubgoalState> out;
  for (std::size_t i = 0; i < marks.size(); ++i) {
    auto end = i + 1 < marks.size() ? marks[i + 1].first : s.size();
    auto segment = std::string(text::trim(std::string_view(s).substr(marks[i].second, end - marks[i].second)));
    auto low = text::lower(segment);

    SubgoalStatus status;
    std::size_t cut;
    if (low.ends_with("in complete")) {
      status = SubgoalStatus::Incomplete;
      cut = low.size() - 11;
    } else if (low.ends_with("incomplete")) {
      status = SubgoalStatus::Incomplete;
      cut = low.size() - 10;
    } else if (low.ends_with("complete")) {
      status = SubgoalStatus::Complete;
      cut = low.size() - 8;
    } else {
      detail::violation("subgoal without complete/incomplete status");
    }
    std::string_view name = text::trim(std::string_view(segment).substr(0, cut));
    if (!name.empty() && name.back() == '-') name.remove_suffix(1);
    out.push_back({std::string(text::trim(name)), status});
  }
  return out;
}

inline std::string render_evaluation(const std::vector<SubgoalState>& subgoals) {
  std::string out;
  for (std::size_t i = 0; i < subgoals.size(); ++i) {
    if (i) out += '\n';
    out += "Subgoal " + std::to_string(i + 1) + ": " + subgoals[i].subgoal + " -" +
           (subgoals[i].status == SubgoalStatus::Complete ? "Complete" : "Incomplete");
  }
  return out;
}

// --- Cluster ----------------------------------------------------------------

inline std::vector<ClusterEntry> parse_cluster(std::string_view raw) {
  detail::require_nonempty(raw);
  static const std::regex line_re(R"(^\s*high-level\s+type\s*[0-9]+\s*:(.*)$)", std::regex::icase);
  static const std::regex bracket_re(R"(\[([^\]]*)\])");

  std::vector<ClusterEntry> out;
  std::set<long long> seen;
  for (const auto& line : text::split_lines(raw)) {
    std::smatch m;
    if (!std::regex_match(line, m, line_re)) continue;
    std::string rest = m[1].str();
    auto first_bracket = rest.find('[');
    ClusterEntry entry;
    entry.type_name = std::string(text::trim(std::string_view(rest).substr(0, first_bracket)));
    if (entry.type_name.empty()) detail::violation("cluster type without a name");
    if (first_bracket == std::string::npos) detail::violation("cluster type without members");

    auto tail = rest.substr(first_bracket);
    for (auto it = std::sregex_iterator(tail.begin(), tail.end(), bracket_re); it != std::sregex_iterator(); ++it) {
      for (const auto& piece : text::split((*it)[1].str(), ",")) {
        long long id = 0;
        if (!text::parse_positive_int(piece, id)) detail::violation("non-numeric cluster member");
        if (!seen.insert(id).second)
          fail(ErrorCode::DuplicateMember, "member " + std::to_string(id) + " assigned twice");
        entry.member_ids.push_back(id);
      }
    }
    out.push_back(std::move(entry));
  }
  if (out.empty()) detail::violation("no 'High-level TypeK:' lines");
  return out;
}

inline std::string render_cluster(const std::vector<ClusterEntry>& entries) {
  std::string out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (i) out += '\n';
    out += "High-level Type" + std::to_string(i + 1) + ": " + entries[i].type_name + " ";
    for (auto id : entries[i].member_ids) out += "[" + std::to_string(id) + "]";
  }
  return out;
}

// --- Index classification / final choice ------------------------------------

inline long long parse_classification(std::string_view raw) {
  detail::require_nonempty(raw);
  static const std::regex re(R"(\[\s*([0-9]{1,18})\s*\])");
  std::string s(raw);
  std::smatch m;
  if (!std::regex_search(s, m, re)) detail::violation("no bracketed type number");
  long long id = 0;
  if (!text::parse_positive_int(m[1].str(), id)) detail::violation("type number must be positive");
  return id;
}

inline std::string render_classification(long long type_id, std::string_view reason) {
  return "[" + std::to_string(type_id) + "]: " + std::string(reason);
}

// --- Tree exploration proposals --------------------------------------------

/// Grammar: one "<action> | <confidence>" per line. The separator is the last
/// " | " on the line so actions such as "click[11 women | 9 men]" survive.
inline std::vector<Proposal> parse_proposals(std::string_view raw) {
  detail::require_nonempty(raw);
  std::vector<Proposal> merged;
  std::map<std::string, std::size_t> slot;
  bool any_line = false;
  for (const auto& line : text::split_lines(raw)) {
    if (text::trim(line).empty()) continue;
    auto sep = line.rfind(" | ");
    if (sep == std::string::npos) detail::violation("proposal line without ' | ' separator");
    auto action = std::string(text::trim(std::string_view(line).substr(0, sep)));
    double conf = 0.0;
    if (action.empty()) detail::violation("proposal without action text");
    if (!text::parse_real(std::string_view(line).substr(sep + 3), conf) || !std::isfinite(conf))
      detail::violation("proposal confidence is not a decimal number");
    any_line = true;
    if (conf <= 0.0) continue;
    if (auto it = slot.find(action); it != slot.end()) {
      merged[it->second].confidence += conf;
    } else {
      slot.emplace(action, merged.size());
      merged.push_back({action, conf});
    }
  }
  if (!any_line) detail::violation("no proposal lines");
  if (merged.empty()) fail(ErrorCode::NoValidProposal, "all proposal confidences are <= 0");

  double sum = 0.0;
  for (const auto& p : merged) sum += p.confidence;
  if (sum != 1.0)
    for (auto& p : merged) p.confidence /= sum;
  return merged;
}

inline std::string render_proposals(const std::vector<Proposal>& proposals) {
  std::string out;
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    if (i) out += '\n';
    out += proposals[i].action + " | " + text::format_real(proposals[i].confidence);
  }
  return out;
}

/// Rescales so the confidences sum to one (no-op when they already do).
inline void renormalize(std::vector<Proposal>& proposals) {
  double sum = 0.0;
  for (const auto& p : proposals) sum += p.confidence;
  if (sum > 0.0 && sum != 1.0)
    for (auto& p : proposals) p.confidence /= sum;
}

// --- Compare ------------------------------------------------------------------

inline long long parse_key_step(std::string_view raw) {
  detail::require_nonempty(raw);
  auto body = text::trim(raw);
  auto colon = body.find(':');
  if (colon == std::string_view::npos) detail::violation("missing 'Number:' prefix");
  long long step = 0;
  if (!text::parse_positive_int(body.substr(0, colon), step)) detail::violation("key step is not a positive integer");
  return step;
}

inline std::string render_key_step(long long step, std::string_view reason) {
  return std::to_string(step) + ": " + std::string(reason);
}

}  // namespace ldm::llm
