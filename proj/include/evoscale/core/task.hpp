#pragma once

#include <string>

#include "evoscale/sandbox/spec.hpp"

namespace evoscale::core {

enum class ScoreDirection { maximize, minimize };

// The problem definition. Scores are canonicalized to "larger is better" at
// ingestion; minimize-style metrics are negated when outcomes become nodes.
struct TaskSpec {
  std::string task_id;
  std::string instruction;       // x0
  std::string initial_solution;  // y0, may be a trivial baseline
  sandbox::EvaluatorSpec evaluator;
  ScoreDirection score_direction = ScoreDirection::maximize;
  bool solution_markers = false;  // candidates carry EVOLVE-BLOCK markers
  std::string artifacts;          // optional warm-start text surfaced in signals

  double per_eval_time_limit() const { return evaluator.timeout_s; }

  // Applies the ingestion normalization to a raw evaluator score.
  double canonicalize(double raw_score) const {
    return score_direction == ScoreDirection::minimize ? -raw_score : raw_score;
  }

  void validate() const;  // throws std::invalid_argument with field messages
};

}  // namespace evoscale::core
