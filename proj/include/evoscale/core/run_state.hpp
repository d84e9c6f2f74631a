#pragma once

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "evoscale/core/config.hpp"
#include "evoscale/core/event_log.hpp"
#include "evoscale/core/node.hpp"
#include "evoscale/core/task.hpp"
#include "evoscale/sandbox/evaluator.hpp"
#include "evoscale/selection/elite_pool.hpp"

namespace evoscale::core {

struct BudgetLedger {
  std::int64_t planned_evaluations = 0;
  std::int64_t consumed_evaluations = 0;
  std::int64_t consumed_generations = 0;
};

// Raised when the run cannot even start (unreadable config, unscoreable
// seed solution, missing evaluator).
class SetupError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RunStatus { running, finished, aborted, interrupted };
const char* run_status_name(RunStatus status);

// Candidate outcome pair fed to commit_local_best; exactly K per batch, with
// failed candidates carrying sentinel-worst canonical scores.
struct CandidateOutcome {
  int k = 0;
  std::string candidate_text;  // raw generator output (reasoning + solution)
  std::string solution;        // extracted region; empty when extraction failed
  sandbox::EvalOutcome outcome;
};

// All mutable search state of one run. Mutated only by the scheduler's
// coordinator thread; every contained type is value-like and copyable, so
// selection code works over consistent snapshots.
class RunState {
 public:
  RunState(TaskSpec task, RunConfig config, std::string run_id);

  // Evaluates the seed solution once (not charged against the budget), seeds
  // C trajectories sharing the initial node, and sets planned = C*L*K.
  // Throws SetupError if the seed cannot be scored.
  static std::unique_ptr<RunState> init_run(TaskSpec task, RunConfig config,
                                            sandbox::Evaluator& evaluator,
                                            std::string run_id, EventLog* log);

  // Commits the best-scoring entry of a complete local batch (ties broken by
  // lowest batch index; an all-failed batch degenerates to its first entry,
  // which keeps the trajectory alive but carries the error class).
  // Returns the committed node id.
  NodeId commit_local_best(TrajectoryId trajectory,
                           const std::vector<CandidateOutcome>& batch,
                           const std::vector<NodeId>& inspiration_parents);

  // Registers one evaluated candidate as a node without committing it.
  NodeId record_candidate(TrajectoryId trajectory, int depth,
                          const CandidateOutcome& candidate,
                          const std::vector<NodeId>& inspiration_parents);

  // Highest canonical score across every evaluated node, committed or not;
  // ties go to the earliest creation ordinal.
  const Node& best_overall() const;

  // Committed history visible to trajectory selection: the shared initial
  // node followed by the trajectory's commits in order.
  std::vector<const Node*> history_view(TrajectoryId trajectory) const;

  const Node& node(NodeId id) const;
  Node& node(NodeId id);
  bool has_node(NodeId id) const { return nodes_.count(id) > 0; }

  const TaskSpec& task() const { return task_; }
  const RunConfig& config() const { return config_; }
  const std::string& run_id() const { return run_id_; }
  BudgetLedger& ledger() { return ledger_; }
  const BudgetLedger& ledger() const { return ledger_; }
  std::vector<Trajectory>& trajectories() { return trajectories_; }
  const std::vector<Trajectory>& trajectories() const { return trajectories_; }
  Trajectory& trajectory(TrajectoryId id) { return trajectories_.at(id); }
  const std::map<NodeId, Node>& nodes() const { return nodes_; }

  selection::ElitePool& elite_pool(TrajectoryId id) { return elite_pools_.at(id); }

  RunStatus status() const { return status_; }
  void set_status(RunStatus s) { status_ = s; }

  // Best committed score of a trajectory's own chain (used for pruning
  // ranks); falls back to the shared seed score at depth 0.
  double trajectory_current_score(TrajectoryId id) const;

  std::int64_t total_commits() const { return total_commits_; }

  // prune-schedule cursor, persisted so resumed runs skip applied cutoffs
  int applied_prune_cutoffs() const { return applied_prune_cutoffs_; }
  void mark_prune_applied() { ++applied_prune_cutoffs_; }

  nlohmann::json snapshot() const;
  static std::unique_ptr<RunState> restore(const nlohmann::json& snapshot);

 private:
  NodeId add_node(Node node);

  TaskSpec task_;
  RunConfig config_;
  std::string run_id_;
  std::map<NodeId, Node> nodes_;
  std::vector<Trajectory> trajectories_;
  std::vector<selection::ElitePool> elite_pools_;
  BudgetLedger ledger_;
  RunStatus status_ = RunStatus::running;
  NodeId best_id_ = kInitialNodeId;
  std::int64_t total_commits_ = 0;
  int applied_prune_cutoffs_ = 0;
};

}  // namespace evoscale::core
