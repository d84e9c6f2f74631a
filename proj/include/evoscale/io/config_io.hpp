#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "evoscale/core/config.hpp"
#include "evoscale/core/task.hpp"
#include "evoscale/urn/urn.hpp"

namespace evoscale::core {

// Checkpoint-internal serialization (fully resolved, no file indirection).
nlohmann::json task_to_json(const TaskSpec& task);
TaskSpec task_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& config);
RunConfig config_from_json(const nlohmann::json& j);

}  // namespace evoscale::core

namespace evoscale::io {

// Task definition file: one JSON document per task. `instruction` may be
// inline or given as `instruction_path`; the initial solution always comes
// from `initial_solution_path`. Relative paths resolve against the task
// file's directory.
core::TaskSpec load_task_file(const std::string& path);

core::RunConfig load_run_config_file(const std::string& path);

urn::UrnConfig urn_config_from_json(const nlohmann::json& j);
urn::UrnConfig load_urn_config_file(const std::string& path);

// "key=value" overrides applied after file parsing. Known keys: C, L, K,
// seed, restarts, selector, insp_count, lambda, gamma, mode, max_unresolved,
// checkpoint_every, reflection, failure_patterns, temperature.
void apply_override(core::RunConfig& config, const std::string& key,
                    const std::string& value);
void apply_overrides(core::RunConfig& config,
                     const std::vector<std::string>& key_value_pairs);

nlohmann::json load_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace evoscale::io
