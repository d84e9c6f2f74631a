#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "evoscale/core/event_log.hpp"

namespace evoscale::exporter {

struct TrajectoryNode {
  int step = 0;            // commit order, 1-based
  std::string prompt;      // fully rendered proposal text
  std::string response;    // raw generator output (reasoning + solution)
  double score = 0.0;
  bool failed = false;
};

// One refinement chain as training data. trajectory_id is globally unique
// ("<run_id>/t<index>") so replay-buffer merges can reject duplicates.
struct TrajectoryRecord {
  std::string task_id;
  std::string trajectory_id;
  int iteration = 0;
  std::vector<TrajectoryNode> nodes;  // commit order
  double max_score = 0.0;

  void recompute_max();
  nlohmann::json to_json() const;
  static TrajectoryRecord from_json(const nlohmann::json& j);
};

struct RSpan {
  int iteration_from = 1;
  int iteration_to = 1;  // inclusive
  double r_percent = 10.0;
};

struct ExportConfig {
  std::vector<RSpan> r_schedule;  // empty = flat default_r
  double default_r = 10.0;
  bool truncate_after_peak = true;
  bool per_task_grouping = true;
  bool include_zero_weight = false;

  double r_for_iteration(int iteration) const;
  void validate() const;
};

// Binary trajectory-level credit: per task, the top ceil(R/100 * n)
// trajectories by max_score get weight 1 (boundary ties included), the rest
// 0. With per-task grouping off, all records form one group.
std::map<std::string, int> assign_credit_irft(const std::vector<TrajectoryRecord>& records,
                                              double r_percent,
                                              bool per_task_grouping = true);

// Drops every node after the first one attaining max_score. Idempotent;
// max_score is unchanged.
TrajectoryRecord truncate_after_peak(TrajectoryRecord record);

struct ExportSummary {
  std::size_t rows_emitted = 0;
  std::size_t rows_skipped = 0;   // malformed records
  std::size_t trajectories_kept = 0;
  std::size_t trajectories_total = 0;
  std::vector<std::string> warnings;
};

// One JSONL row per kept node: {task_id, trajectory_id, step, prompt,
// response, weight}. Rows come out sorted by (task_id, trajectory_id, step)
// so re-exports are byte-identical. Zero-weight rows are dropped unless
// requested.
ExportSummary export_dataset(const std::vector<TrajectoryRecord>& records,
                             const std::map<std::string, int>& credits,
                             const ExportConfig& config, const std::string& output_path);

// --- replay buffer --------------------------------------------------------
//
// Directory of per-run JSONL record files plus a manifest. Merges are
// idempotent: records whose trajectory_id is already present are rejected.
struct MergeResult {
  std::size_t added = 0;
  std::size_t duplicates = 0;
};

MergeResult replay_buffer_merge(const std::string& buffer_dir,
                                const std::vector<TrajectoryRecord>& records,
                                int iteration);

std::vector<TrajectoryRecord> replay_buffer_load(const std::string& buffer_dir);

// --- event-log reconstruction ----------------------------------------------

// Rebuilds committed-chain records from a run event log (joins gen_request
// proposals with commit events per trajectory/depth).
std::vector<TrajectoryRecord> records_from_events(const std::vector<core::Event>& events,
                                                  int iteration);

}  // namespace evoscale::exporter
