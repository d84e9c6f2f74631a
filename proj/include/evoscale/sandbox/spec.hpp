#pragma once

#include <string>
#include <vector>

namespace evoscale::sandbox {

enum class Isolation { process, container };
enum class NetworkPolicy { disabled, allowed };

// Contract for one evaluator (or verifier) command. The argv template is the
// command followed by its arguments; every occurrence of {SOLUTION_PATH} is
// replaced with the materialized solution file. The child runs in a fresh
// temporary working directory with stdin closed and the environment scrubbed
// to an allowlist, and must print "SCORE <real>" as its final stdout line.
struct CommandSpec {
  std::string command;
  std::vector<std::string> args;

  bool empty() const { return command.empty(); }
  std::vector<std::string> argv(const std::string& solution_path) const;
};

struct EvaluatorSpec {
  CommandSpec evaluator;
  CommandSpec verifier;  // optional independent recompute
  double timeout_s = 30.0;
  long memory_limit_mb = 1024;
  Isolation isolation = Isolation::process;
  NetworkPolicy network = NetworkPolicy::allowed;
  std::string workdir;  // base for per-evaluation temp dirs; system default if empty
  std::string container_image;  // required when isolation == container
  double verify_abs_tol = 1e-9;
  double verify_rel_tol = 1e-6;
  int stderr_excerpt_limit = 2000;

  bool has_verifier() const { return !verifier.empty(); }
  void validate() const;  // throws std::invalid_argument with field messages
};

}  // namespace evoscale::sandbox
