#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "evoscale/core/config.hpp"
#include "evoscale/core/node.hpp"
#include "evoscale/core/task.hpp"

namespace evoscale::selection {

// One prior attempt as presented to the generator.
struct InspirationEntry {
  std::uint64_t node_id = 0;
  std::string solution;
  double score = 0.0;
  bool failed = false;
  std::string metadata_summary;  // error class / evaluator feedback line
  std::optional<std::string> reflection;
};

struct AccumulatedSignals {
  std::vector<std::string> failure_patterns;
  std::string artifacts;            // opaque warm-start text
  std::string elite_pool_overview;  // populated by the llm-elite policy
};

// Everything a proposal carries: instruction, evaluation configuration,
// selected prior attempts, accumulated signals.
struct ProposalBundle {
  std::string instruction;
  std::string eval_config_summary;
  std::vector<InspirationEntry> inspirations;
  AccumulatedSignals signals;
};

// Assembles the bundle. When no inspirations were selected (insp_count of 0,
// or an empty pool at the first step) the task's baseline solution stands in
// so the generator always sees at least the seed attempt.
ProposalBundle build_proposal(const core::TaskSpec& task,
                              std::vector<InspirationEntry> inspirations,
                              const core::LocalMemory& memory,
                              const core::FeatureConfig& features);

// Deterministic rendering with fixed section headers, machine-parseable from
// logs:  === INSTRUCTION === / === EVALUATION === / === PRIOR ATTEMPTS === /
// === SIGNALS ===
std::string render_proposal(const ProposalBundle& bundle);

// Splits rendered proposal text back into its sections (header -> body).
std::map<std::string, std::string> parse_rendered_sections(const std::string& text);

inline constexpr const char* kSectionInstruction = "INSTRUCTION";
inline constexpr const char* kSectionEvaluation = "EVALUATION";
inline constexpr const char* kSectionPriorAttempts = "PRIOR ATTEMPTS";
inline constexpr const char* kSectionSignals = "SIGNALS";

}  // namespace evoscale::selection
