#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ldm/io.hpp"
#include "ldm/memory/types.hpp"
#include "ldm/text.hpp"

namespace ldm::memory {

inline nlohmann::ordered_json to_json(const Trajectory& t) {
  nlohmann::ordered_json steps = nlohmann::ordered_json::array();
  for (const auto& s : t.steps) steps.push_back({{"observation", s.observation}, {"action", s.action}});
  nlohmann::ordered_json j;
  j["id"] = t.id;
  j["env"] = t.env;
  j["seed"] = t.seed;
  j["goal"] = t.goal;
  j["steps"] = std::move(steps);
  j["reward"] = t.reward ? nlohmann::ordered_json(*t.reward) : nlohmann::ordered_json(nullptr);
  return j;
}

inline Trajectory trajectory_from_json(const nlohmann::json& j) {
  Trajectory t;
  t.id = j.at("id").get<std::string>();
  t.env = j.value("env", std::string{});
  t.seed = j.value("seed", std::uint64_t{0});
  t.goal = j.at("goal").get<std::string>();
  for (const auto& s : j.at("steps"))
    t.steps.push_back({s.at("observation").get<std::string>(), s.at("action").get<std::string>()});
  if (j.contains("reward") && !j["reward"].is_null()) t.reward = j["reward"].get<double>();
  return t;
}

inline std::string trajectories_to_jsonl(const std::vector<Trajectory>& trajectories) {
  std::string out;
  for (const auto& t : trajectories) out += to_json(t).dump() + "\n";
  return out;
}

inline std::vector<Trajectory> trajectories_from_jsonl(std::string_view content, std::string_view origin = "input") {
  std::vector<Trajectory> out;
  std::size_t line_no = 0;
  for (const auto& line : text::split_lines(content)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      auto t = trajectory_from_json(nlohmann::json::parse(line));
      t.validate();
      out.push_back(std::move(t));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::IoError, std::string(origin) + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline void write_trajectories(const std::filesystem::path& path, const std::vector<Trajectory>& trajectories) {
  io::write_file_atomic(path, trajectories_to_jsonl(trajectories));
}

inline std::vector<Trajectory> read_trajectories(const std::filesystem::path& path) {
  return trajectories_from_jsonl(io::read_file(path), path.string());
}

}  // namespace ldm::memory
