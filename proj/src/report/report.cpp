#include "evoscale/report.hpp"

#include <algorithm>

#include "evoscale/sandbox/outcome.hpp"

namespace evoscale::report {

using nlohmann::json;

RunReport report_from_events(const std::vector<core::Event>& events) {
  RunReport report;
  RunSection* current = nullptr;
  std::int64_t consumed_total = 0;
  double best_so_far = sandbox::kSentinelWorstScore;
  bool any_score = false;

  auto section_for = [&](const std::string& run_id) -> RunSection* {
    for (auto& section : report.runs)
      if (section.run_id == run_id) return &section;
    report.runs.emplace_back();
    report.runs.back().run_id = run_id;
    return &report.runs.back();
  };

  for (const auto& event : events) {
    current = section_for(event.run_id);
    switch (event.kind) {
      case core::EventKind::setup:
        current->planned_evaluations =
            event.payload.value("planned_evaluations", std::int64_t{0});
        if (event.payload.contains("initial_score")) {
          const double s = event.payload["initial_score"].get<double>();
          if (!any_score || s > best_so_far) best_so_far = s;
          any_score = true;
          report.score_over_budget.emplace_back(consumed_total, best_so_far);
        }
        break;
      case core::EventKind::eval_done: {
        if (!event.payload.value("synthetic", false)) {
          ++current->consumed_evaluations;
          ++consumed_total;
        }
        if (event.payload.contains("score")) {
          const double s = event.payload["score"].get<double>();
          if (!any_score || s > best_so_far) {
            best_so_far = s;
            any_score = true;
            report.score_over_budget.emplace_back(consumed_total, best_so_far);
          }
        }
        if (event.trajectory && event.payload.contains("score")) {
          auto& per_max = current->per_trajectory_max;
          const double s = event.payload["score"].get<double>();
          auto it = per_max.find(*event.trajectory);
          if (it == per_max.end() || s > it->second) per_max[*event.trajectory] = s;
        }
        break;
      }
      case core::EventKind::gen_response:
        ++current->consumed_generations;
        break;
      case core::EventKind::prune: {
        current->prune_events.push_back(event.payload);
        current->active_after_prunes =
            static_cast<int>(event.payload.value("kept", std::vector<int>{}).size());
        current->planned_evaluations =
            event.payload.value("planned_after", current->planned_evaluations);
        break;
      }
      case core::EventKind::finish: {
        current->best_score = event.payload.value("best_score", 0.0);
        current->best_node = event.payload.value("best_node_id", core::NodeId{0});
        current->status = event.payload.value("status", std::string());
        break;
      }
      default:
        break;
    }
  }

  if (!report.runs.empty()) {
    report.best_score = report.runs.front().best_score;
    for (const auto& section : report.runs) {
      report.best_score = std::max(report.best_score, section.best_score);
      report.total_consumed_evaluations += section.consumed_evaluations;
      report.total_planned_evaluations += section.planned_evaluations;
    }
    report.restart_delta = report.runs.back().best_score - report.runs.front().best_score;
    for (std::size_t i = 1; i < report.runs.size(); ++i)
      if (report.runs[i].best_score <= report.runs[i - 1].best_score)
        report.saturated = true;
  }
  return report;
}

RunReport report_from_log_file(const std::string& path) {
  return report_from_events(core::read_event_log(path).events);
}

json RunReport::to_json() const {
  json run_rows = json::array();
  for (const auto& section : runs) {
    json per_trajectory = json::object();
    for (const auto& [trajectory, score] : section.per_trajectory_max)
      per_trajectory[std::to_string(trajectory)] = score;
    run_rows.push_back({{"run_id", section.run_id},
                        {"best_score", section.best_score},
                        {"best_node_id", section.best_node},
                        {"consumed_evaluations", section.consumed_evaluations},
                        {"consumed_generations", section.consumed_generations},
                        {"planned_evaluations", section.planned_evaluations},
                        {"status", section.status},
                        {"per_trajectory_max", std::move(per_trajectory)},
                        {"prune_events", section.prune_events},
                        {"active_after_prunes", section.active_after_prunes}});
  }
  json series = json::array();
  for (const auto& [consumed, score] : score_over_budget)
    series.push_back(json::array({consumed, score}));
  return json{{"runs", std::move(run_rows)},
              {"best_score", best_score},
              {"restart_delta", restart_delta},
              {"saturated", saturated},
              {"total_consumed_evaluations", total_consumed_evaluations},
              {"total_planned_evaluations", total_planned_evaluations},
              {"score_over_budget", std::move(series)}};
}

}  // namespace evoscale::report
