#include "evoscale/gateway/mock_generator.hpp"

namespace evoscale::gateway {

GenResult SequenceGenerator::generate(const GeneratorRequest& request) {
  std::lock_guard<std::mutex> lock(mu_);
  const std::string key = prompt_hash_hex(request.rendered_prompt);
  long& counter = counters_[key];
  GenResult result;
  for (int i = 0; i < request.sample_count; ++i)
    result.response.candidates.push_back(fn_(key, counter++));
  result.response.usage.prompt_tokens =
      static_cast<long>(request.rendered_prompt.size() / 4);
  for (const auto& c : result.response.candidates)
    result.response.usage.output_tokens.push_back(static_cast<long>(c.size() / 4));
  return result;
}

ScriptedGenerator::ScriptedGenerator(std::vector<Entry> entries) {
  for (auto& entry : entries) {
    auto& queue = entry.prompt_hash == "*" ? wildcard_ : queues_[entry.prompt_hash];
    for (auto& candidate : entry.candidates) queue.push_back(std::move(candidate));
  }
}

GenResult ScriptedGenerator::generate(const GeneratorRequest& request) {
  std::lock_guard<std::mutex> lock(mu_);
  const std::string key = prompt_hash_hex(request.rendered_prompt);
  std::deque<std::string>* queue = nullptr;
  if (auto it = queues_.find(key); it != queues_.end() && !it->second.empty())
    queue = &it->second;
  else
    queue = &wildcard_;

  GenResult result;
  for (int i = 0; i < request.sample_count && !queue->empty(); ++i) {
    result.response.candidates.push_back(std::move(queue->front()));
    queue->pop_front();
  }
  result.response.usage.prompt_tokens =
      static_cast<long>(request.rendered_prompt.size() / 4);
  for (const auto& c : result.response.candidates)
    result.response.usage.output_tokens.push_back(static_cast<long>(c.size() / 4));
  return result;
}

std::size_t ScriptedGenerator::remaining() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::size_t total = wildcard_.size();
  for (const auto& [_, q] : queues_) total += q.size();
  return total;
}

}  // namespace evoscale::gateway
