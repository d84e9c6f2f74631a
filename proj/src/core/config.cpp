#include "evoscale/core/config.hpp"

#include <stdexcept>

#include "evoscale/core/node.hpp"
#include "evoscale/core/task.hpp"

namespace evoscale::core {

const char* trajectory_status_name(TrajectoryStatus s) {
  switch (s) {
    case TrajectoryStatus::active: return "active";
    case TrajectoryStatus::pruned: return "pruned";
    case TrajectoryStatus::finished: return "finished";
  }
  return "unknown";
}

const char* selector_kind_name(SelectorKind kind) {
  switch (kind) {
    case SelectorKind::rpucg: return "rpucg";
    case SelectorKind::balance: return "balance";
    case SelectorKind::random_uniform: return "random";
    case SelectorKind::llm_elite: return "llm_elite";
  }
  return "unknown";
}

SelectorKind selector_kind_from_name(const std::string& name) {
  if (name == "rpucg") return SelectorKind::rpucg;
  if (name == "balance") return SelectorKind::balance;
  if (name == "random") return SelectorKind::random_uniform;
  if (name == "llm_elite") return SelectorKind::llm_elite;
  throw std::invalid_argument("selector.kind: unknown selector '" + name + "'");
}

void SelectorConfig::validate() const {
  if (insp_count < 0) throw std::invalid_argument("selector.insp_count: must be >= 0");
  if (rpucg_lambda < 0) throw std::invalid_argument("selector.lambda: must be >= 0");
  if (!(rpucg_gamma > 0.0 && rpucg_gamma <= 1.0))
    throw std::invalid_argument("selector.gamma: must lie in (0, 1]");
  if (balance.p_exploit < 0 || balance.p_explore < 0 ||
      balance.p_exploit + balance.p_explore > 1.0)
    throw std::invalid_argument(
        "selector.balance: p_exploit + p_explore must lie in [0, 1]");
  if (!(balance.explore_lo_percentile < balance.explore_hi_percentile) ||
      balance.explore_lo_percentile < 0 || balance.explore_hi_percentile > 100)
    throw std::invalid_argument(
        "selector.balance: explore percentiles need 0 <= lo < hi <= 100");
  if (!(balance.elite_fraction > 0 && balance.elite_fraction <= 1))
    throw std::invalid_argument("selector.balance: elite_fraction must lie in (0, 1]");
  if (elite_capacity < 1)
    throw std::invalid_argument("selector.elite_capacity: must be >= 1");
}

void PruneSchedule::validate(int depth_limit) const {
  int last_depth = 0;
  for (const auto& cutoff : cutoffs) {
    if (cutoff.at_depth <= last_depth)
      throw std::invalid_argument("pruning.cutoffs: at_depth must be strictly increasing");
    if (cutoff.at_depth >= depth_limit)
      throw std::invalid_argument("pruning.cutoffs: at_depth must be < L");
    if (!(cutoff.keep_fraction > 0.0 && cutoff.keep_fraction <= 1.0))
      throw std::invalid_argument("pruning.cutoffs: keep_fraction must lie in (0, 1]");
    last_depth = cutoff.at_depth;
  }
}

void RunConfig::validate() const {
  if (global_width < 1) throw std::invalid_argument("C: must be >= 1");
  if (depth_limit < 1) throw std::invalid_argument("L: must be >= 1");
  if (local_k < 1) throw std::invalid_argument("K: must be >= 1");
  if (restarts < 0) throw std::invalid_argument("restarts: must be >= 0");
  if (dispatch.max_unresolved_batches_per_trajectory < 1)
    throw std::invalid_argument("dispatch.max_unresolved: must be >= 1");
  if (workers.generation < 1 || workers.evaluation < 1)
    throw std::invalid_argument("workers: pool sizes must be >= 1");
  selector.validate();
  token_budget.validate();
  if (pruning) pruning->validate(depth_limit);
}

void TaskSpec::validate() const {
  if (task_id.empty()) throw std::invalid_argument("task_id: must be non-empty");
  if (instruction.empty()) throw std::invalid_argument("instruction: must be non-empty");
  if (initial_solution.empty())
    throw std::invalid_argument("initial_solution: must be present");
  evaluator.validate();
}

}  // namespace evoscale::core
