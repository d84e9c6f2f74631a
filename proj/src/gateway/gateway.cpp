#include "evoscale/gateway/generator.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <thread>

namespace evoscale::gateway {

void TokenBudget::validate() const {
  if (context_total < 1) throw std::invalid_argument("token_budget.context_total: must be >= 1");
  if (program_max < 1) throw std::invalid_argument("token_budget.program_max: must be >= 1");
  if (input_plus_reasoning_max < 1)
    throw std::invalid_argument("token_budget.input_plus_reasoning_max: must be >= 1");
  if (program_max + input_plus_reasoning_max != context_total)
    throw std::invalid_argument(
        "token_budget: program_max + input_plus_reasoning_max must equal context_total");
}

int heuristic_token_count(const std::string& text) {
  // chars/4 with a 10% margin, rounded up (integer arithmetic, no fp drift)
  const std::size_t base = (text.size() + 3) / 4;
  return static_cast<int>((base * 11 + 9) / 10);
}

Gateway::Gateway(std::shared_ptr<Generator> generator, TokenBudget budget,
                 RetryPolicy retry, TokenCounter counter)
    : generator_(std::move(generator)),
      budget_(budget),
      retry_(retry),
      counter_(std::move(counter)) {
  budget_.validate();
}

GenResult Gateway::generate(GeneratorRequest request) {
  const int estimate = counter_(request.rendered_prompt);
  if (estimate > budget_.input_plus_reasoning_max) {
    char msg[128];
    std::snprintf(msg, sizeof(msg), "prompt estimate %d tokens exceeds input budget %d",
                  estimate, budget_.input_plus_reasoning_max);
    return GenResult::failure(GenErrorKind::prompt_too_large, msg);
  }
  if (request.max_output_tokens <= 0 || request.max_output_tokens > budget_.program_max)
    request.max_output_tokens = budget_.program_max;

  GenResult result;
  int backoff = retry_.backoff_ms;
  for (int attempt = 0; attempt < std::max(1, retry_.attempts); ++attempt) {
    result = generator_->generate(request);
    if (!result.retryable()) return result;
    if (attempt + 1 < retry_.attempts && backoff > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
      backoff *= 2;
    }
  }
  return result;
}

std::uint64_t prompt_hash(const std::string& prompt) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : prompt) h = (h ^ c) * 0x100000001b3ull;
  return h;
}

std::string prompt_hash_hex(const std::string& prompt) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(prompt_hash(prompt)));
  return buf;
}

}  // namespace evoscale::gateway
