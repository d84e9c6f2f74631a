#include "evoscale/selection/proposal.hpp"

#include <sstream>

#include "evoscale/gateway/extract.hpp"
#include "evoscale/sandbox/outcome.hpp"

namespace evoscale::selection {

ProposalBundle build_proposal(const core::TaskSpec& task,
                              std::vector<InspirationEntry> inspirations,
                              const core::LocalMemory& memory,
                              const core::FeatureConfig& features) {
  ProposalBundle bundle;
  bundle.instruction = task.instruction;

  std::ostringstream eval_summary;
  eval_summary << "timeout_s: " << task.evaluator.timeout_s << "\n"
               << "memory_limit_mb: " << task.evaluator.memory_limit_mb << "\n"
               << "score: higher is better; the evaluator prints the final line "
                  "\"SCORE <value>\"";
  if (task.solution_markers)
    eval_summary << "\nwrap the solution between " << gateway::kEvolveStartMarker
                 << " and " << gateway::kEvolveEndMarker << " markers";
  bundle.eval_config_summary = eval_summary.str();

  if (inspirations.empty()) {
    InspirationEntry seed;
    seed.node_id = 0;
    seed.solution = task.initial_solution;
    seed.score = 0.0;
    seed.metadata_summary = "baseline seed solution";
    inspirations.push_back(std::move(seed));
  }
  bundle.inspirations = std::move(inspirations);

  if (features.failure_patterns)
    bundle.signals.failure_patterns = memory.failures.top_patterns(features.failure_top_k);
  bundle.signals.artifacts = task.artifacts;
  return bundle;
}

std::string render_proposal(const ProposalBundle& bundle) {
  std::ostringstream out;
  out.precision(12);
  out << "=== " << kSectionInstruction << " ===\n" << bundle.instruction << "\n\n";
  out << "=== " << kSectionEvaluation << " ===\n" << bundle.eval_config_summary << "\n\n";
  out << "=== " << kSectionPriorAttempts << " ===\n";
  for (std::size_t i = 0; i < bundle.inspirations.size(); ++i) {
    const auto& insp = bundle.inspirations[i];
    out << "--- attempt " << (i + 1) << " (node " << insp.node_id << ", score ";
    if (insp.failed)
      out << "failed";
    else
      out << insp.score;
    out << ") ---\n";
    if (!insp.metadata_summary.empty()) out << "feedback: " << insp.metadata_summary << "\n";
    if (insp.reflection) out << "reflection: " << *insp.reflection << "\n";
    out << insp.solution << "\n";
  }
  out << "\n=== " << kSectionSignals << " ===\n";
  if (!bundle.signals.failure_patterns.empty()) {
    out << "recurring failures:\n";
    for (const auto& pattern : bundle.signals.failure_patterns) out << "- " << pattern << "\n";
  }
  if (!bundle.signals.elite_pool_overview.empty())
    out << "elite pool overview:\n" << bundle.signals.elite_pool_overview << "\n";
  if (!bundle.signals.artifacts.empty())
    out << "artifacts:\n" << bundle.signals.artifacts << "\n";
  return out.str();
}

std::map<std::string, std::string> parse_rendered_sections(const std::string& text) {
  std::map<std::string, std::string> sections;
  std::istringstream in(text);
  std::string line, current;
  while (std::getline(in, line)) {
    if (line.size() > 8 && line.rfind("=== ", 0) == 0 &&
        line.compare(line.size() - 4, 4, " ===") == 0) {
      current = line.substr(4, line.size() - 8);
      sections[current];
      continue;
    }
    if (!current.empty()) {
      auto& body = sections[current];
      if (!body.empty()) body += '\n';
      body += line;
    }
  }
  return sections;
}

}  // namespace evoscale::selection
