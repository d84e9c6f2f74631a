#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "evoscale/sandbox/outcome.hpp"

namespace evoscale::sandbox {

// Strips run-specific noise (per-evaluation temp paths, hex addresses) so
// that repeated failures collapse to one signature.
std::string normalize_stderr_line(const std::string& line);

// Signature of one failure: error class plus the normalized first stderr
// line.
std::string failure_signature(const EvalOutcome& outcome);

// Frequency-ranked failure signatures accumulated over a trajectory.
class FailureMemory {
 public:
  void record(const EvalOutcome& outcome, std::uint64_t seen_order);
  void record_batch(const std::vector<EvalOutcome>& outcomes, std::uint64_t base_order);

  // Top-k signatures by (count desc, first seen asc), rendered one per line
  // as "<count>x <signature>".
  std::vector<std::string> top_patterns(int k = 3) const;

  bool empty() const { return counts_.empty(); }
  std::size_t distinct() const { return counts_.size(); }

  struct Entry {
    std::uint64_t count = 0;
    std::uint64_t first_seen = 0;
  };
  const std::map<std::string, Entry>& counts() const { return counts_; }
  std::map<std::string, Entry>& counts() { return counts_; }

 private:
  std::map<std::string, Entry> counts_;
};

}  // namespace evoscale::sandbox
