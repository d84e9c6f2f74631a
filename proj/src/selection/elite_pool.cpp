#include "evoscale/selection/elite_pool.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace evoscale::selection {

double ElitePool::max_score() const {
  double best = -1e308;
  for (const auto& e : entries) best = std::max(best, e.score);
  return best;
}

std::size_t ElitePool::lowest_index() const {
  std::size_t lowest = 0;
  for (std::size_t i = 1; i < entries.size(); ++i)
    if (entries[i].score < entries[lowest].score) lowest = i;
  return lowest;
}

ElitePool elite_pool_update(ElitePool pool, const EliteEntry& candidate,
                            const DecisionProvider& provider) {
  if (pool.empty()) {
    pool.entries.push_back(candidate);
    return pool;
  }
  // monotonic override: a strictly better candidate always enters
  if (candidate.score > pool.max_score()) {
    if (pool.full())
      pool.entries[pool.lowest_index()] = candidate;
    else
      pool.entries.push_back(candidate);
    return pool;
  }

  std::optional<EliteDecision> decision;
  if (provider) {
    try {
      decision = provider(candidate, pool.entries);
    } catch (...) {
      decision = std::nullopt;
    }
  }
  if (!decision) return pool;  // provider failure is a reject

  switch (decision->action) {
    case EliteAction::add:
      if (!pool.full()) pool.entries.push_back(candidate);
      break;  // add into a full pool is invalid; treated as reject
    case EliteAction::replace: {
      const int j = decision->replace_index;
      if (j >= 0 && j < static_cast<int>(pool.entries.size()))
        pool.entries[static_cast<std::size_t>(j)] = candidate;
      break;
    }
    case EliteAction::reject:
      break;
  }
  return pool;
}

std::optional<EliteDecision> parse_elite_decision(const std::string& reply) {
  std::string first_line = reply;
  if (const std::size_t nl = first_line.find('\n'); nl != std::string::npos)
    first_line.resize(nl);
  std::istringstream in(first_line);
  std::string word;
  if (!(in >> word)) return std::nullopt;
  std::transform(word.begin(), word.end(), word.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  if (word == "ADD") return EliteDecision{EliteAction::add, -1};
  if (word == "REJECT") return EliteDecision{EliteAction::reject, -1};
  if (word == "REPLACE") {
    int index = -1;
    if (in >> index) return EliteDecision{EliteAction::replace, index};
    return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace evoscale::selection
