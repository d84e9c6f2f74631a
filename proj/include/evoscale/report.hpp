#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "evoscale/core/event_log.hpp"

namespace evoscale::report {

// Everything here is recomputed from the event log alone; no engine state.
struct RunSection {
  std::string run_id;
  double best_score = 0.0;
  core::NodeId best_node = 0;
  std::int64_t consumed_evaluations = 0;
  std::int64_t consumed_generations = 0;
  std::int64_t planned_evaluations = 0;
  std::string status;
  std::map<core::TrajectoryId, double> per_trajectory_max;
  std::vector<nlohmann::json> prune_events;
  int active_after_prunes = -1;  // -1 when no prune happened
};

struct RunReport {
  std::vector<RunSection> runs;  // log order: base run then restarts
  double best_score = 0.0;
  double restart_delta = 0.0;  // last best - first best
  bool saturated = false;      // a restart failed to improve
  std::int64_t total_consumed_evaluations = 0;  // summed across restarts
  std::int64_t total_planned_evaluations = 0;
  // (consumed evaluations, best score so far) samples for plotting
  std::vector<std::pair<std::int64_t, double>> score_over_budget;

  nlohmann::json to_json() const;
};

RunReport report_from_events(const std::vector<core::Event>& events);
RunReport report_from_log_file(const std::string& path);

}  // namespace evoscale::report
