#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "evoscale/sandbox/failure_patterns.hpp"
#include "evoscale/sandbox/outcome.hpp"

namespace evoscale::core {

using NodeId = std::uint64_t;
using TrajectoryId = std::uint32_t;

inline constexpr NodeId kInitialNodeId = 0;

// Node ids double as canonical creation ordinals: the shared initial node is
// 0 and candidate k of step `depth` in trajectory c gets a depth-major
// ordinal. Being a pure function of (c, depth, k) keeps ids stable under
// out-of-order parallel completion.
inline NodeId node_ordinal(int global_width, int local_k, TrajectoryId trajectory,
                           int depth, int k) {
  return 1 + (static_cast<NodeId>(depth - 1) * static_cast<NodeId>(global_width) +
              trajectory) *
                 static_cast<NodeId>(local_k) +
         static_cast<NodeId>(k);
}

// One evaluated attempt: solution text, canonical score, evaluation metadata,
// lineage links and selection bookkeeping.
struct Node {
  NodeId id = 0;
  TrajectoryId trajectory = 0;
  std::string solution;
  double score = sandbox::kSentinelWorstScore;  // canonical, larger is better
  sandbox::EvalOutcome outcome;
  int depth = 0;  // proposal index within the trajectory; 0 for the seed
  int k = 0;      // slot within the local batch
  std::vector<NodeId> inspiration_parents;
  std::uint64_t selection_count = 0;  // times included in a proposal context
  std::optional<std::string> reflection;
  bool committed = false;

  bool failed() const { return outcome.failed(); }
};

enum class TrajectoryStatus { active, pruned, finished };

const char* trajectory_status_name(TrajectoryStatus s);

// Chain-local memory surfaced to the generator through proposal signals.
struct LocalMemory {
  sandbox::FailureMemory failures;
};

// One refinement chain: the committed set in commit order plus local memory.
struct Trajectory {
  TrajectoryId id = 0;
  std::vector<NodeId> committed;  // excludes the shared initial node
  int depth = 0;                  // committed refinement steps so far
  LocalMemory memory;
  TrajectoryStatus status = TrajectoryStatus::active;

  bool active() const { return status == TrajectoryStatus::active; }
};

}  // namespace evoscale::core
