#pragma once

// JSON snapshots. Every top-level document carries "schema_version".

#include "envagent/bandit.hpp"
#include "envagent/env_model.hpp"
#include "envagent/refine.hpp"
#include "envagent/selector.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>

namespace envagent {

inline constexpr int kSchemaVersion = 1;

void to_json(nlohmann::json& j, const Environment& e);
void from_json(const nlohmann::json& j, Environment& e);
void to_json(nlohmann::json& j, const AlgorithmSpec& a);
void from_json(const nlohmann::json& j, AlgorithmSpec& a);
void to_json(nlohmann::json& j, const Description& d);
void from_json(const nlohmann::json& j, Description& d);
void to_json(nlohmann::json& j, const BehaviorTable& c);
void from_json(const nlohmann::json& j, BehaviorTable& c);
void to_json(nlohmann::json& j, const TestSuite& t);
void from_json(const nlohmann::json& j, TestSuite& t);
void to_json(nlohmann::json& j, const ExecutionMatrix& m);
void from_json(const nlohmann::json& j, ExecutionMatrix& m);
void to_json(nlohmann::json& j, const BoundReport& r);
void to_json(nlohmann::json& j, const Trajectory& t);

/// Wraps `payload` as {"schema_version": 1, "kind": kind, "data": payload}.
nlohmann::json snapshot(std::string_view kind, nlohmann::json payload);
/// Checks version and kind and returns the payload.
nlohmann::json unwrap_snapshot(const nlohmann::json& doc, std::string_view kind);

void save_execution_matrix(const std::filesystem::path& path, const ExecutionMatrix& m);
ExecutionMatrix load_execution_matrix(const std::filesystem::path& path);

/// Serializes with sorted keys and two-space indentation.
std::string canonical_dump(const nlohmann::json& j);

}  // namespace envagent
