#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "evoscale/core/event_log.hpp"
#include "evoscale/core/run_state.hpp"
#include "evoscale/gateway/generator.hpp"
#include "evoscale/sandbox/evaluator.hpp"

namespace evoscale::scheduler {

// The generator endpoint stayed unreachable past the bounded retry budget;
// the partial event log is preserved.
class RunAbortedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EngineOptions {
  core::EventLog* log = nullptr;
  std::string checkpoint_path;  // written every config.checkpoint_every commits
};

// Executes the refinement search over a RunState: C independent trajectories,
// each repeating propose -> generate K -> evaluate K -> commit best until the
// depth limit, with prune barriers in between. Generation and evaluation run
// on two worker pools connected by bounded queues; a single coordinator owns
// the state and applies completions serially, so out-of-order worker results
// never race.
class Engine {
 public:
  Engine(std::shared_ptr<gateway::Generator> generator,
         std::shared_ptr<sandbox::Evaluator> evaluator);

  // Runs to completion and returns the best node id. Throws RunAbortedError
  // on a permanently unreachable generator.
  core::NodeId run(core::RunState& state, const EngineOptions& options = {});

  // Graceful drain: stop admitting work, resolve open batches, checkpoint.
  void request_stop() { stop_requested_.store(true); }

 private:
  friend class Coordinator;
  std::shared_ptr<gateway::Generator> generator_;
  std::shared_ptr<sandbox::Evaluator> evaluator_;
  std::atomic<bool> stop_requested_{false};
};

// Ranks active trajectories by their current best committed score and keeps
// the top ceil(keep_fraction * active); the rest are marked pruned and their
// remaining budget is released from the ledger. Requires every active
// trajectory to have reached the cutoff depth.
void apply_prune(core::RunState& state, const core::PruneCutoff& cutoff,
                 core::EventLog* log);

struct RunSummary {
  std::string run_id;
  core::NodeId best_node = 0;
  double best_score = 0.0;
  core::BudgetLedger ledger;
  bool saturated = false;  // restart failed to improve on its seed
  double wall_time_s = 0.0;
};

struct MultiRunResult {
  std::vector<RunSummary> runs;  // base run first, restarts after
  std::string best_solution;
  double best_score = 0.0;
};

// Base run plus config.restarts best-solution restarts: each restart reseeds
// the task with the previous best solution and resets every trajectory
// history, selection count and memory. All runs append to the same log.
MultiRunResult run_with_restarts(const core::TaskSpec& task, const core::RunConfig& config,
                                 std::shared_ptr<gateway::Generator> generator,
                                 std::shared_ptr<sandbox::Evaluator> evaluator,
                                 const std::string& run_id, const EngineOptions& options,
                                 Engine* engine = nullptr);

// Fresh RunState for a best-solution restart of `prior`.
std::unique_ptr<core::RunState> restart_from_best(const core::RunState& prior,
                                                  sandbox::Evaluator& evaluator,
                                                  const std::string& new_run_id,
                                                  core::EventLog* log);

struct SweepPoint {
  int global_width = 1;
  int depth_limit = 1;
  int local_k = 1;
};

struct SweepRow {
  SweepPoint point;
  std::uint64_t seed = 0;
  double best_score = 0.0;
  std::int64_t consumed_evaluations = 0;
  std::int64_t planned_evaluations = 0;
};

// One run per grid point with derived seeds. When fixed_N is given, every
// point must satisfy C*L*K == fixed_N; violations reject the whole sweep
// before any run starts.
std::vector<SweepRow> sweep(const core::TaskSpec& task, const core::RunConfig& base_config,
                            const std::vector<SweepPoint>& grid,
                            std::optional<std::int64_t> fixed_N,
                            std::shared_ptr<gateway::Generator> generator,
                            std::shared_ptr<sandbox::Evaluator> evaluator,
                            const std::string& run_id_prefix);

}  // namespace evoscale::scheduler
