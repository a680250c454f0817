#pragma once

// On-disk layout of a memory set:
//   memory.json              manifest (schema version, environment, seed, batches)
//   batch_NNN.tuples.jsonl   one tuple per line, in insertion order
//   batch_NNN.index.json     goal/observation types and cells

#include <cstdio>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "ldm/io.hpp"
#include "ldm/memory/batch_memory.hpp"

namespace ldm::memory {

inline constexpr int kSchemaVersion = 1;

namespace detail {

inline std::string batch_stem(int batch_id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "batch_%03d", batch_id);
  return buf;
}

inline void check_schema(const nlohmann::json& doc, const std::string& what) {
  if (!doc.contains("schema_version") || !doc["schema_version"].is_number_integer())
    fail(ErrorCode::SchemaVersionMismatch, what + " has no schema_version");
  if (doc["schema_version"].get<int>() != kSchemaVersion)
    fail(ErrorCode::SchemaVersionMismatch,
         what + " has schema_version " + doc["schema_version"].dump() + ", expected " + std::to_string(kSchemaVersion));
}

inline llm::SubgoalStatus status_from(const std::string& s) {
  if (s == "Complete") return llm::SubgoalStatus::Complete;
  if (s == "Incomplete") return llm::SubgoalStatus::Incomplete;
  fail(ErrorCode::CorruptMemory, "unknown subgoal status " + s);
}

}  // namespace detail

inline std::string tuples_to_jsonl(const BatchMemory& memory) {
  std::string out;
  for (const auto& st : memory.tuples()) {
    const auto& t = st.tuple;
    nlohmann::ordered_json subgoals = nlohmann::ordered_json::array();
    for (const auto& s : t.history.subgoal_status)
      subgoals.push_back({{"subgoal", s.subgoal}, {"status", s.status == llm::SubgoalStatus::Complete ? "Complete" : "Incomplete"}});
    nlohmann::ordered_json j;
    j["id"] = st.id;
    j["batch_id"] = memory.batch_id();
    j["goal"] = t.goal;
    j["summary"] = t.history.summary;
    j["subgoals"] = std::move(subgoals);
    j["observation"] = t.observation;
    j["action"] = t.action;
    j["source"] = to_string(t.source);
    j["origin"] = t.origin_trajectory;
    j["step"] = t.step_index;
    j["goal_type"] = st.goal_type;
    j["obs_type"] = st.obs_type;
    out += j.dump() + "\n";
  }
  return out;
}

inline std::string index_to_json(const BatchMemory& memory) {
  nlohmann::ordered_json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["batch_id"] = memory.batch_id();
  doc["capacity"] = {{"N", memory.capacity().total_trajectories},
                     {"B", memory.capacity().batch_size},
                     {"n", memory.capacity().batch_count}};
  nlohmann::ordered_json goals = nlohmann::ordered_json::array();
  for (const auto& g : memory.goal_types()) {
    nlohmann::ordered_json obs = nlohmann::ordered_json::array();
    for (const auto& o : g.observation_types) obs.push_back({{"id", o.id}, {"name", o.name}});
    goals.push_back({{"id", g.id},
                     {"name", g.name},
                     {"examples", g.examples},
                     {"cell_size", memory.cell_size(g.id)},
                     {"obs_types", std::move(obs)}});
  }
  doc["goal_types"] = std::move(goals);
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const auto& [key, ids] : memory.cells())
    cells.push_back({{"goal_type", key.first}, {"obs_type", key.second}, {"tuples", ids}});
  doc["cells"] = std::move(cells);
  return doc.dump(2) + "\n";
}

inline BatchMemory batch_from_files(const std::string& index_text, const std::string& tuples_text,
                                    const std::string& origin) {
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(index_text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::IoError, origin + ": " + e.what());
  }
  detail::check_schema(index, origin);
  try {
    const auto& cap = index.at("capacity");
    BatchMemory memory(index.at("batch_id").get<int>(),
                       {cap.at("N").get<std::size_t>(), cap.at("B").get<std::size_t>(), cap.at("n").get<std::size_t>()});
    for (const auto& g : index.at("goal_types")) {
      auto id = memory.add_goal_type(g.at("name").get<std::string>(), g.at("examples").get<std::vector<std::string>>());
      if (id != g.at("id").get<TypeId>()) fail(ErrorCode::CorruptMemory, origin + ": goal type ids are not 1..K");
      for (const auto& o : g.at("obs_types")) {
        auto oid = memory.add_observation_type(id, o.at("name").get<std::string>());
        if (oid != o.at("id").get<TypeId>()) fail(ErrorCode::CorruptMemory, origin + ": observation type ids are not 1..K");
      }
    }
    std::size_t line_no = 0;
    for (const auto& line : text::split_lines(tuples_text)) {
      if (text::trim(line).empty()) continue;
      auto j = nlohmann::json::parse(line);
      StateActionTuple t;
      t.goal = j.at("goal").get<std::string>();
      t.history.summary = j.at("summary").get<std::string>();
      for (const auto& s : j.at("subgoals"))
        t.history.subgoal_status.push_back({s.at("subgoal").get<std::string>(), detail::status_from(s.at("status").get<std::string>())});
      t.observation = j.at("observation").get<std::string>();
      t.action = j.at("action").get<std::string>();
      auto source = j.at("source").get<std::string>();
      t.source = source == "Exploration" ? TupleSource::Exploration : TupleSource::Demonstration;
      t.origin_trajectory = j.at("origin").get<std::string>();
      t.step_index = j.at("step").get<std::size_t>();
      auto [id, added] = memory.insert(std::move(t), j.at("goal_type").get<TypeId>(), j.at("obs_type").get<TypeId>());
      if (!added || id != j.at("id").get<TupleId>() || id != line_no)
        fail(ErrorCode::CorruptMemory, origin + ": tuple ids must be 0..N-1 and unique");
      ++line_no;
    }
    for (const auto& c : index.at("cells")) {
      auto ids = c.at("tuples").get<std::vector<TupleId>>();
      if (memory.cell(c.at("goal_type").get<TypeId>(), c.at("obs_type").get<TypeId>()) != ids)
        fail(ErrorCode::CorruptMemory, origin + ": cell listing disagrees with tuple records");
    }
    for (const auto& g : index.at("goal_types"))
      if (g.contains("cell_size") && g["cell_size"].get<std::size_t>() != memory.cell_size(g.at("id").get<TypeId>()))
        fail(ErrorCode::CorruptMemory, origin + ": cell_size disagrees with cells");
    memory.check_invariants();
    return memory;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::CorruptMemory, origin + ": " + e.what());
  }
}

/// Writes every file of the set; unchanged files are left untouched.
/// Returns the number of files actually rewritten.
inline std::size_t save_memory(const MemorySet& set, const std::filesystem::path& dir) {
  std::size_t written = 0;
  nlohmann::ordered_json manifest;
  manifest["schema_version"] = kSchemaVersion;
  manifest["environment"] = set.environment;
  manifest["seed"] = set.seed;
  nlohmann::ordered_json batches = nlohmann::ordered_json::array();
  for (const auto& b : set.batches) {
    auto stem = detail::batch_stem(b.batch_id());
    written += io::write_file_atomic(dir / (stem + ".tuples.jsonl"), tuples_to_jsonl(b));
    written += io::write_file_atomic(dir / (stem + ".index.json"), index_to_json(b));
    batches.push_back({{"batch_id", b.batch_id()},
                       {"tuples", stem + ".tuples.jsonl"},
                       {"index", stem + ".index.json"},
                       {"tuple_count", b.size()}});
  }
  manifest["batches"] = std::move(batches);
  written += io::write_file_atomic(dir / "memory.json", manifest.dump(2) + "\n");
  return written;
}

inline MemorySet load_memory(const std::filesystem::path& dir) {
  auto manifest_path = dir / "memory.json";
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(io::read_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::IoError, manifest_path.string() + ": " + e.what());
  }
  detail::check_schema(manifest, manifest_path.string());
  MemorySet set;
  try {
    set.environment = manifest.value("environment", std::string{});
    set.seed = manifest.value("seed", std::uint64_t{0});
    for (const auto& b : manifest.at("batches")) {
      auto index_path = dir / b.at("index").get<std::string>();
      auto tuples_path = dir / b.at("tuples").get<std::string>();
      set.batches.push_back(batch_from_files(io::read_file(index_path), io::read_file(tuples_path), index_path.string()));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::CorruptMemory, manifest_path.string() + ": " + e.what());
  }
  return set;
}

}  // namespace ldm::memory
