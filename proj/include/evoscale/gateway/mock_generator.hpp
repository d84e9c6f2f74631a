#pragma once

#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "evoscale/gateway/generator.hpp"

namespace evoscale::gateway {

// Pure-function mock: candidates derived from the request alone. Identical
// requests always yield identical responses.
class FunctionGenerator : public Generator {
 public:
  using Fn = std::function<GenResult(const GeneratorRequest&)>;
  explicit FunctionGenerator(Fn fn) : fn_(std::move(fn)) {}

  GenResult generate(const GeneratorRequest& request) override { return fn_(request); }

 private:
  Fn fn_;
};

// Deterministic stateful mock: the i-th candidate ever produced for a given
// prompt is fn(prompt_hash_hex, i), so batched and streamed dispatch see the
// same candidate sequence.
class SequenceGenerator : public Generator {
 public:
  using Fn = std::function<std::string(const std::string& prompt_hash, long index)>;
  explicit SequenceGenerator(Fn fn) : fn_(std::move(fn)) {}

  GenResult generate(const GeneratorRequest& request) override;

 private:
  std::mutex mu_;
  std::map<std::string, long> counters_;
  Fn fn_;
};

// Script-driven mock. Entries are keyed by prompt hash and consumed in file
// order; requests whose hash has no (remaining) entry fall back to the "*"
// wildcard queue. Candidate counts follow sample_count: a request for n
// samples consumes up to n candidates from the matched queue, reporting a
// shortfall rather than padding.
class ScriptedGenerator : public Generator {
 public:
  struct Entry {
    std::string prompt_hash;  // hex hash or "*"
    std::vector<std::string> candidates;
  };

  explicit ScriptedGenerator(std::vector<Entry> entries);

  // JSONL file of {"prompt_hash": "...", "candidates": ["...", ...]}.
  // Defined in io/mock_io.cpp.
  static std::vector<Entry> entries_from_script(const std::string& path);

  GenResult generate(const GeneratorRequest& request) override;

  std::size_t remaining() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::deque<std::string>> queues_;
  std::deque<std::string> wildcard_;
};

}  // namespace evoscale::gateway
