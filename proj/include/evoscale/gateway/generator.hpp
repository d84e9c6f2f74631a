#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace evoscale::gateway {

// Context-window partition: generated-program tokens and input+reasoning
// tokens must add up to the context total exactly.
struct TokenBudget {
  int context_total = 49152;
  int program_max = 15536;
  int input_plus_reasoning_max = 33616;

  void validate() const;  // throws std::invalid_argument on a broken partition
};

// Pluggable prompt-size estimator. The default chars/4 heuristic carries a
// 10% safety margin so it over- rather than under-estimates.
using TokenCounter = std::function<int(const std::string&)>;
int heuristic_token_count(const std::string& text);

struct GeneratorRequest {
  std::string rendered_prompt;
  int sample_count = 1;
  double temperature = 1.0;
  int max_output_tokens = 0;
  std::string reasoning_mode;        // opaque pass-through
  // 0 = server default; forwarded as "seed". The i-th sample of a request is
  // seeded sampling_seed + i, and the engine offsets streamed requests by
  // their slot, so sample k of a local batch sees the same seed under either
  // dispatch mode.
  std::uint64_t sampling_seed = 0;
};

struct GeneratorUsage {
  long prompt_tokens = 0;
  std::vector<long> output_tokens;  // per candidate
};

struct GeneratorResponse {
  std::vector<std::string> candidates;  // length <= sample_count, never padded
  GeneratorUsage usage;
  double latency_ms = 0.0;
};

enum class GenErrorKind { none, transport, prompt_too_large, protocol };

struct GenResult {
  GeneratorResponse response;
  GenErrorKind error = GenErrorKind::none;
  std::string message;

  bool ok() const { return error == GenErrorKind::none; }
  bool retryable() const { return error == GenErrorKind::transport; }

  static GenResult failure(GenErrorKind kind, std::string message) {
    GenResult r;
    r.error = kind;
    r.message = std::move(message);
    return r;
  }
};

// Transport for the generator model. Implementations must tolerate unbounded
// concurrent calls; retries are the caller's concern.
class Generator {
 public:
  virtual ~Generator() = default;
  virtual GenResult generate(const GeneratorRequest& request) = 0;
};

struct RetryPolicy {
  int attempts = 3;
  int backoff_ms = 100;  // doubled per attempt
};

// Budget-enforcing front door: preflights the prompt-size estimate, clamps
// max_output_tokens to the program budget, and retries transport errors.
class Gateway {
 public:
  Gateway(std::shared_ptr<Generator> generator, TokenBudget budget,
          RetryPolicy retry = {}, TokenCounter counter = heuristic_token_count);

  GenResult generate(GeneratorRequest request);

  const TokenBudget& budget() const { return budget_; }

 private:
  std::shared_ptr<Generator> generator_;
  TokenBudget budget_;
  RetryPolicy retry_;
  TokenCounter counter_;
};

// FNV-1a over the rendered prompt; the key used by scripted mocks and logs.
std::uint64_t prompt_hash(const std::string& prompt);
std::string prompt_hash_hex(const std::string& prompt);

}  // namespace evoscale::gateway
