#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace evoscale::selection {

struct EliteEntry {
  std::uint64_t node_id = 0;
  double score = 0.0;
  std::string summary;
};

enum class EliteAction { add, replace, reject };

struct EliteDecision {
  EliteAction action = EliteAction::reject;
  int replace_index = -1;  // valid for replace
};

// Gatekeeper callback: given the candidate and the current pool, returns a
// decision. In production this is a generator call; tests script it. A
// nullopt (provider failure) is treated as reject.
using DecisionProvider = std::function<std::optional<EliteDecision>(
    const EliteEntry& candidate, const std::vector<EliteEntry>& pool)>;

// Bounded pool of high-quality, semantically diverse nodes maintained under
// a strict monotonic override: a candidate scoring above the current pool
// maximum is admitted no matter what the provider says.
struct ElitePool {
  std::vector<EliteEntry> entries;
  std::size_t capacity = 8;

  bool empty() const { return entries.empty(); }
  bool full() const { return entries.size() >= capacity; }
  double max_score() const;
  std::size_t lowest_index() const;
};

ElitePool elite_pool_update(ElitePool pool, const EliteEntry& candidate,
                            const DecisionProvider& provider);

// Parses a gatekeeper reply of the form "ADD" | "REPLACE <j>" | "REJECT"
// (case-insensitive, first line wins). Unparseable text yields nullopt.
std::optional<EliteDecision> parse_elite_decision(const std::string& reply);

}  // namespace evoscale::selection
