#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "evoscale/rng.hpp"

namespace evoscale::urn {

// Parameters of the multidimensional reinforced-urn refinement model plus the
// local-batch extension (K proposals per step, each improving with
// probability p).
struct UrnConfig {
  int dims = 8;                 // D
  double lambda = 0.98;         // refinement strength, in (0,1)
  double beta = 4.0;            // path-dependence bias, >= 0
  std::int64_t steps = 4096;    // refinement steps per chain
  int chains = 32;              // independent chains per simulation (C)
  int local_k = 1;              // proposals per step (K)
  double improve_prob = 1.0;    // per-proposal improvement probability (p)
  std::int64_t num_sims = 2048; // ensemble size
  std::uint64_t seed = 1;

  // Throws std::invalid_argument with a field-level message.
  void validate() const;
};

struct UrnState {
  std::vector<std::int64_t> y;  // per-dimension refinement counts
  std::int64_t t = 0;           // completed steps; t - sum(y) = failed steps

  std::int64_t successes() const;
  std::int64_t failures() const { return t - successes(); }
};

// Bottleneck score V(y) = 1 - lambda^(min_d y_d), in [0, 1).
double urn_score(const std::vector<std::int64_t>& y, double lambda);

// Per-dimension selection probabilities for step t (1-based) of the base
// model: p_d = (1 + beta*y_d) / (D + beta*(t-1)). Requires sum(y) == t-1,
// which makes the vector sum to 1 exactly.
std::vector<double> urn_step_probs(const std::vector<std::int64_t>& y, double beta,
                                   std::int64_t t);

// Step distribution of the general model: one entry per dimension plus a
// trailing entry carrying the reinforcement mass of failed steps. Reduces to
// urn_step_probs when no step has failed. Always sums to 1 exactly.
std::vector<double> urn_step_probs_extended(const UrnState& state, int dims, double beta);

struct ChainResult {
  UrnState state;
  std::vector<double> score_trace;  // V after each step
  std::int64_t dim_draws = 0;       // steps where a live dimension was drawn
  std::int64_t successes = 0;
  double final_score = 0.0;
};

// Simulates one chain. Each step draws a category from the extended urn
// distribution; a live dimension then improves with probability
// 1 - (1-p)^K (best of the K proposals applied), otherwise the step's mass
// joins the failure residue. Base model is the special case K=1, p=1.
ChainResult simulate_chain(const UrnConfig& config, CounterRng& rng,
                           bool keep_trace = true);

struct EnsembleStats {
  double mean_best_score = 0.0;
  double std_best_score = 0.0;
  double failure_rate = 0.0;  // fraction of sims whose best chain < target
  std::int64_t num_sims = 0;
  std::vector<double> best_scores;  // one per simulation
};

// Runs num_sims simulations of `chains` chains each and aggregates the best
// final score per simulation. Embarrassingly parallel; per-sim RNG streams
// are derived from (seed, sim, chain) so results are thread-count invariant.
EnsembleStats simulate_ensemble(const UrnConfig& config,
                                std::optional<double> target_score = std::nullopt,
                                int threads = 0);

struct SweepCell {
  double p = 0.0;
  int k = 0;
  std::int64_t steps = 0;
  int chains = 0;
  double mean_score = 0.0;
  double std_score = 0.0;
  double norm_score = 0.0;  // mean / sweep maximum
  double failure_rate = 0.0;
  std::int64_t num_sims = 0;
  bool skipped = false;  // K does not divide the proposal budget
};

// Sweeps (p, K) at a fixed per-chain proposal budget (config.steps); each
// admissible K runs budget/K refinement steps. Cells where K does not divide
// the budget are emitted with skipped=true and no simulation.
std::vector<SweepCell> allocation_sweep(const UrnConfig& base,
                                        const std::vector<int>& k_values,
                                        const std::vector<double>& p_values,
                                        std::optional<double> target_score = std::nullopt,
                                        int threads = 0);

// CSV with header  p,K,steps,chains,mean_score,std,failure_rate,n_sims
// (skipped cells are omitted from the file).
std::string sweep_to_csv(const std::vector<SweepCell>& cells);

}  // namespace evoscale::urn
