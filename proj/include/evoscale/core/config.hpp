#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "evoscale/gateway/generator.hpp"

namespace evoscale::core {

enum class SelectorKind { rpucg, balance, random_uniform, llm_elite };

const char* selector_kind_name(SelectorKind kind);
SelectorKind selector_kind_from_name(const std::string& name);

struct BalanceTiers {
  double elite_fraction = 0.25;     // top fraction forming the exploit tier
  double explore_lo_percentile = 10.0;
  double explore_hi_percentile = 60.0;
  double p_exploit = 0.5;
  double p_explore = 0.3;
};

struct SelectorConfig {
  SelectorKind kind = SelectorKind::rpucg;
  int insp_count = 3;          // inspirations per proposal
  double rpucg_lambda = 1.0;   // exploration weight
  double rpucg_gamma = 0.8;    // propagation discount, in (0, 1]
  BalanceTiers balance;
  int elite_capacity = 8;      // bounded elite-pool size

  void validate() const;
};

struct PruneCutoff {
  int at_depth = 0;
  double keep_fraction = 1.0;  // in (0, 1]
};

struct PruneSchedule {
  std::vector<PruneCutoff> cutoffs;  // strictly increasing at_depth, all < L

  bool empty() const { return cutoffs.empty(); }
  void validate(int depth_limit) const;
};

enum class DispatchMode { batched, streamed };

struct DispatchPolicy {
  DispatchMode mode = DispatchMode::batched;
  int max_unresolved_batches_per_trajectory = 1;  // 1 = strict synchronization
};

struct WorkerConfig {
  int generation = 4;
  int evaluation = 8;
  int queue_capacity = 0;  // 0 = derived from pool sizes
};

struct FeatureConfig {
  bool failure_patterns = true;
  int failure_top_k = 3;
  bool reflection = false;
  int reflection_max_chars = 2048;
};

// The full design-space point plus selector, scheduler and pruning
// parameters. Planned evaluator budget is exactly C*L*K; restart runs add
// another full budget each.
struct RunConfig {
  int global_width = 32;   // C
  int depth_limit = 100;   // L
  int local_k = 16;        // K
  SelectorConfig selector;
  gateway::TokenBudget token_budget;
  std::optional<PruneSchedule> pruning;
  int restarts = 0;
  std::uint64_t rng_seed = 1;
  DispatchPolicy dispatch;
  WorkerConfig workers;
  FeatureConfig features;
  gateway::RetryPolicy retry;
  int max_transport_failures = 10;  // consecutive, before the run aborts
  int checkpoint_every = 0;         // commits between snapshots; 0 = off
  double temperature = 1.0;
  std::string reasoning_mode = "high";

  std::int64_t planned_evaluations() const {
    return static_cast<std::int64_t>(global_width) * depth_limit * local_k;
  }

  void validate() const;
};

}  // namespace evoscale::core
