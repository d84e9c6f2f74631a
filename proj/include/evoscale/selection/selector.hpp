#pragma once

#include <cstddef>
#include <vector>

#include "evoscale/core/config.hpp"
#include "evoscale/core/node.hpp"
#include "evoscale/rng.hpp"
#include "evoscale/selection/elite_pool.hpp"

namespace evoscale::selection {

using core::Node;
using core::NodeId;

// Immutable snapshot of a trajectory's committed history in creation order
// (shared initial node first). All selection operations are pure over it.
using HistoryView = std::vector<const Node*>;

// Fixed point of U_i = max(r_i, gamma * max_{j in Ch(i)} U_j) where Ch(i)
// are the nodes whose proposals included i. Returned aligned with the view;
// leaves carry their own score.
std::vector<double> propagate_values(const HistoryView& history, double gamma);

// Score-percentile priors in [0, 1]: rank among valid-score nodes only, ties
// sharing the lower rank; failed nodes get 0, a lone valid node gets 1.
std::vector<double> percentile_ranks(const HistoryView& history);

// U_i + lambda * rho_i * sqrt(1 + |S|) / (1 + n_i).
double rpucg_score(double propagated_value, double percentile_rank,
                   std::uint64_t selection_count, std::size_t history_size,
                   double lambda);

// Greedy pick by descending score with one-hop exclusion: picking a node
// removes its inspiration parents and children from the eligible set. Stops
// at insp_count or exhaustion. Returns indices into the view in pick order.
std::vector<std::size_t> select_inspirations_rpucg(const HistoryView& history,
                                                   const core::SelectorConfig& config);

// Tier used by the stratified (Balance) draw.
enum class BalanceTier { exploit, explore, random_all };
BalanceTier pick_tier(const core::BalanceTiers& tiers, evoscale::CounterRng& rng);

// Stratified sampling: the best node is always included; the remaining n-1
// are drawn without replacement from the tier chosen per draw. Histories
// smaller than n are returned whole.
std::vector<std::size_t> select_inspirations_balance(const HistoryView& history, int n,
                                                     const core::BalanceTiers& tiers,
                                                     evoscale::CounterRng& rng);

// Uniform without-replacement sample of size min(n, |history|).
std::vector<std::size_t> select_inspirations_random(const HistoryView& history, int n,
                                                    evoscale::CounterRng& rng);

// Stratified draw over the elite pool (same mechanism as Balance). Returns
// node ids because pool entries are not view indices.
std::vector<std::uint64_t> select_inspirations_elite(const ElitePool& pool, int n,
                                                     const core::BalanceTiers& tiers,
                                                     evoscale::CounterRng& rng);

}  // namespace evoscale::selection
