#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <string>

#include "evoscale/sandbox/outcome.hpp"
#include "evoscale/sandbox/spec.hpp"

namespace evoscale::sandbox {

// Scoring backend. Implementations must be safe for concurrent evaluate()
// calls from the evaluation worker pool.
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual EvalOutcome evaluate(const std::string& solution) = 0;
};

// Subprocess-backed evaluator with resource limits and optional independent
// score verification. evaluate() runs the evaluator command and, when a
// verifier is configured, verify() afterwards.
class SandboxEvaluator : public Evaluator {
 public:
  explicit SandboxEvaluator(EvaluatorSpec spec);

  EvalOutcome evaluate(const std::string& solution) override;

  // Reruns the score through the verifier command in its own sandbox. Only
  // meaningful for outcomes with error_class none; a verifier failure or an
  // out-of-tolerance recompute downgrades the outcome to
  // verification_mismatch.
  EvalOutcome verify(EvalOutcome outcome, const std::string& solution) const;

  const EvaluatorSpec& spec() const { return spec_; }

 private:
  EvaluatorSpec spec_;
};

// Deterministic in-process evaluator for tests and mock runs.
//
// Score resolution order: exact match in the table, then the scripted
// function if set, then the default mode. Modes: "constant" (default_score),
// "hash" (a stable pseudo-score in [0,1) derived from the solution text).
class MockEvaluator : public Evaluator {
 public:
  using ScoreFn = std::function<EvalOutcome(const std::string&)>;

  MockEvaluator() = default;
  explicit MockEvaluator(ScoreFn fn) : fn_(std::move(fn)) {}
  MockEvaluator(MockEvaluator&& other) noexcept
      : table_(std::move(other.table_)),
        fn_(std::move(other.fn_)),
        hash_default_(other.hash_default_),
        default_score_(other.default_score_),
        calls_(other.calls_.load()) {}
  MockEvaluator& operator=(MockEvaluator&& other) noexcept {
    table_ = std::move(other.table_);
    fn_ = std::move(other.fn_);
    hash_default_ = other.hash_default_;
    default_score_ = other.default_score_;
    calls_.store(other.calls_.load());
    return *this;
  }

  // Loads a JSONL script: {"match": "<solution>", "score": x} or
  // {"match": "...", "error": "<class>"} rows plus an optional
  // {"default_mode": "hash"|"constant", "default_score": x} row.
  // Defined in io/mock_io.cpp.
  static MockEvaluator from_script(const std::string& path);

  void set_table_entry(const std::string& solution, EvalOutcome outcome);
  void set_default_constant(double score);
  void set_default_hash();

  EvalOutcome evaluate(const std::string& solution) override;

  long call_count() const { return calls_.load(); }

 private:
  std::map<std::string, EvalOutcome> table_;  // read-only once the run starts
  ScoreFn fn_;
  bool hash_default_ = false;
  double default_score_ = 0.0;
  std::atomic<long> calls_{0};
};

// SIGKILLs every evaluation process group still alive. Called from the CLI's
// interrupt drain.
void kill_all_live_evaluations();

}  // namespace evoscale::sandbox
