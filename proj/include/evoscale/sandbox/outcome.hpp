#pragma once

#include <limits>
#include <optional>
#include <string>

namespace evoscale::sandbox {

enum class ErrorClass {
  none,
  timeout,
  crash,
  malformed_output,
  missing_dependency,
  invalid_solution,
  verification_mismatch,
};

const char* error_class_name(ErrorClass ec);
ErrorClass error_class_from_name(const std::string& name);

// Worst representable finite score; assigned to failed candidates so argmax
// logic never needs a failure branch.
inline constexpr double kSentinelWorstScore = std::numeric_limits<double>::lowest();

struct EvalOutcome {
  std::optional<double> reported_score;
  std::optional<double> verified_score;
  ErrorClass error_class = ErrorClass::none;
  std::string stderr_excerpt;
  double wall_time_s = 0.0;
  bool verifier_ran = false;
  bool synthetic = false;  // generation-side failure, evaluator never invoked

  bool failed() const { return error_class != ErrorClass::none; }

  // Canonical score: the verifier's recomputed value when one ran, the
  // reported value otherwise, and the sentinel on any failure.
  double canonical_score() const {
    if (failed()) return kSentinelWorstScore;
    if (verifier_ran && verified_score) return *verified_score;
    return reported_score ? *reported_score : kSentinelWorstScore;
  }

  static EvalOutcome success(double score) {
    EvalOutcome o;
    o.reported_score = score;
    return o;
  }

  static EvalOutcome failure(ErrorClass ec, std::string stderr_excerpt = {},
                             bool synthetic = false) {
    EvalOutcome o;
    o.error_class = ec;
    o.stderr_excerpt = std::move(stderr_excerpt);
    o.synthetic = synthetic;
    return o;
  }
};

}  // namespace evoscale::sandbox
