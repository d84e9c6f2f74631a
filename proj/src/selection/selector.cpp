#include "evoscale/selection/selector.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

namespace evoscale::selection {

namespace {

// view-index adjacency from inspiration links (parents point backwards in
// creation order, so children always sit later in the view)
std::vector<std::vector<std::size_t>> children_of(const HistoryView& history) {
  std::map<NodeId, std::size_t> index_of;
  for (std::size_t i = 0; i < history.size(); ++i) index_of[history[i]->id] = i;
  std::vector<std::vector<std::size_t>> children(history.size());
  for (std::size_t i = 0; i < history.size(); ++i) {
    for (NodeId parent : history[i]->inspiration_parents) {
      auto it = index_of.find(parent);
      if (it != index_of.end()) children[it->second].push_back(i);
    }
  }
  return children;
}

}  // namespace

std::vector<double> propagate_values(const HistoryView& history, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw std::invalid_argument("gamma: must lie in (0, 1]");
  const auto children = children_of(history);
  std::vector<double> values(history.size(), 0.0);
  for (std::size_t i = history.size(); i-- > 0;) {
    double value = history[i]->score;
    if (!children[i].empty()) {
      double best_child = values[children[i].front()];
      for (std::size_t j : children[i]) best_child = std::max(best_child, values[j]);
      value = std::max(value, gamma * best_child);
    }
    values[i] = value;
  }
  return values;
}

std::vector<double> percentile_ranks(const HistoryView& history) {
  std::vector<double> ranks(history.size(), 0.0);
  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < history.size(); ++i)
    if (!history[i]->failed()) valid.push_back(i);
  if (valid.empty()) return ranks;
  if (valid.size() == 1) {
    ranks[valid.front()] = 1.0;
    return ranks;
  }
  const double denom = static_cast<double>(valid.size() - 1);
  for (std::size_t i : valid) {
    std::size_t strictly_lower = 0;
    for (std::size_t j : valid)
      if (history[j]->score < history[i]->score) ++strictly_lower;
    ranks[i] = static_cast<double>(strictly_lower) / denom;
  }
  return ranks;
}

double rpucg_score(double propagated_value, double percentile_rank,
                   std::uint64_t selection_count, std::size_t history_size,
                   double lambda) {
  const double exploration = lambda * percentile_rank *
                             std::sqrt(1.0 + static_cast<double>(history_size)) /
                             (1.0 + static_cast<double>(selection_count));
  return propagated_value + exploration;
}

std::vector<std::size_t> select_inspirations_rpucg(const HistoryView& history,
                                                   const core::SelectorConfig& config) {
  if (history.empty()) return {};
  const auto values = propagate_values(history, config.rpucg_gamma);
  const auto priors = percentile_ranks(history);
  const auto children = children_of(history);

  std::vector<double> scores(history.size());
  for (std::size_t i = 0; i < history.size(); ++i)
    scores[i] = rpucg_score(values[i], priors[i], history[i]->selection_count,
                            history.size(), config.rpucg_lambda);

  std::map<NodeId, std::size_t> index_of;
  for (std::size_t i = 0; i < history.size(); ++i) index_of[history[i]->id] = i;

  std::vector<bool> eligible(history.size(), true);
  std::vector<std::size_t> picks;
  while (static_cast<int>(picks.size()) < config.insp_count) {
    std::size_t best = history.size();
    for (std::size_t i = 0; i < history.size(); ++i) {
      if (!eligible[i]) continue;
      if (best == history.size() || scores[i] > scores[best]) best = i;
    }
    if (best == history.size()) break;
    picks.push_back(best);
    eligible[best] = false;
    for (NodeId parent : history[best]->inspiration_parents) {
      auto it = index_of.find(parent);
      if (it != index_of.end()) eligible[it->second] = false;
    }
    for (std::size_t child : children[best]) eligible[child] = false;
  }
  return picks;
}

BalanceTier pick_tier(const core::BalanceTiers& tiers, evoscale::CounterRng& rng) {
  const double u = rng.next_double();
  if (u < tiers.p_exploit) return BalanceTier::exploit;
  if (u < tiers.p_exploit + tiers.p_explore) return BalanceTier::explore;
  return BalanceTier::random_all;
}

namespace {

template <typename ScoreAt>
std::vector<std::size_t> stratified_draw(std::size_t count, int n,
                                         const core::BalanceTiers& tiers,
                                         evoscale::CounterRng& rng, ScoreAt score_at) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return score_at(a) > score_at(b);
  });

  std::vector<std::size_t> picks;
  if (n <= 0 || count == 0) return picks;
  if (count <= static_cast<std::size_t>(n)) return order;  // exhaustion

  std::set<std::size_t> taken;
  picks.push_back(order.front());  // s1 always included
  taken.insert(order.front());

  const std::size_t m = count;
  const std::size_t elite_count =
      std::max<std::size_t>(1, static_cast<std::size_t>(
                                   std::ceil(tiers.elite_fraction * static_cast<double>(m))));
  // mid band by bottom-percentile of descending rank: rank i has percentile
  // 100*(m-1-i)/(m-1)
  std::vector<std::size_t> explore_tier;
  if (m > 1) {
    for (std::size_t i = 0; i < m; ++i) {
      const double pct =
          100.0 * static_cast<double>(m - 1 - i) / static_cast<double>(m - 1);
      if (pct >= tiers.explore_lo_percentile && pct <= tiers.explore_hi_percentile)
        explore_tier.push_back(order[i]);
    }
  }

  auto draw_from = [&](const std::vector<std::size_t>& tier) -> bool {
    std::vector<std::size_t> available;
    for (std::size_t idx : tier)
      if (!taken.count(idx)) available.push_back(idx);
    if (available.empty()) return false;
    const std::size_t pick = available[rng.next_below(available.size())];
    picks.push_back(pick);
    taken.insert(pick);
    return true;
  };

  std::vector<std::size_t> elite_tier(order.begin(),
                                      order.begin() + static_cast<std::ptrdiff_t>(elite_count));

  while (static_cast<int>(picks.size()) < n) {
    const BalanceTier tier = pick_tier(tiers, rng);
    bool drew = false;
    switch (tier) {
      case BalanceTier::exploit: drew = draw_from(elite_tier); break;
      case BalanceTier::explore: drew = draw_from(explore_tier); break;
      case BalanceTier::random_all: drew = draw_from(order); break;
    }
    if (!drew) drew = draw_from(order);  // exhausted tier falls back to all
    if (!drew) break;
  }
  return picks;
}

}  // namespace

std::vector<std::size_t> select_inspirations_balance(const HistoryView& history, int n,
                                                     const core::BalanceTiers& tiers,
                                                     evoscale::CounterRng& rng) {
  return stratified_draw(history.size(), n, tiers, rng,
                         [&](std::size_t i) { return history[i]->score; });
}

std::vector<std::size_t> select_inspirations_random(const HistoryView& history, int n,
                                                    evoscale::CounterRng& rng) {
  std::vector<std::size_t> indices(history.size());
  std::iota(indices.begin(), indices.end(), 0);
  const std::size_t want = std::min<std::size_t>(static_cast<std::size_t>(std::max(n, 0)),
                                                 indices.size());
  // partial Fisher-Yates
  for (std::size_t i = 0; i < want; ++i) {
    const std::size_t j = i + rng.next_below(indices.size() - i);
    std::swap(indices[i], indices[j]);
  }
  indices.resize(want);
  return indices;
}

std::vector<std::uint64_t> select_inspirations_elite(const ElitePool& pool, int n,
                                                     const core::BalanceTiers& tiers,
                                                     evoscale::CounterRng& rng) {
  const auto picks = stratified_draw(pool.entries.size(), n, tiers, rng,
                                     [&](std::size_t i) { return pool.entries[i].score; });
  std::vector<std::uint64_t> ids;
  ids.reserve(picks.size());
  for (std::size_t i : picks) ids.push_back(pool.entries[i].node_id);
  return ids;
}

}  // namespace evoscale::selection
