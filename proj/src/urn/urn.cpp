#include "evoscale/urn/urn.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace evoscale::urn {

void UrnConfig::validate() const {
  if (dims < 1) throw std::invalid_argument("dims: must be >= 1");
  if (!(lambda > 0.0 && lambda < 1.0))
    throw std::invalid_argument("lambda: must lie strictly inside (0, 1)");
  if (!(beta >= 0.0)) throw std::invalid_argument("beta: must be >= 0");
  if (steps < 1) throw std::invalid_argument("steps: must be >= 1");
  if (chains < 1) throw std::invalid_argument("chains: must be >= 1");
  if (local_k < 1) throw std::invalid_argument("local_k: must be >= 1");
  if (!(improve_prob >= 0.0 && improve_prob <= 1.0))
    throw std::invalid_argument("improve_prob: must lie in [0, 1]");
  if (num_sims < 1) throw std::invalid_argument("num_sims: must be >= 1");
}

std::int64_t UrnState::successes() const {
  return std::accumulate(y.begin(), y.end(), std::int64_t{0});
}

double urn_score(const std::vector<std::int64_t>& y, double lambda) {
  if (y.empty()) return 0.0;
  const std::int64_t m = *std::min_element(y.begin(), y.end());
  return 1.0 - std::pow(lambda, static_cast<double>(m));
}

std::vector<double> urn_step_probs(const std::vector<std::int64_t>& y, double beta,
                                   std::int64_t t) {
  if (t < 1) throw std::invalid_argument("t: must be >= 1");
  const std::int64_t total = std::accumulate(y.begin(), y.end(), std::int64_t{0});
  if (total != t - 1)
    throw std::invalid_argument("urn_step_probs: requires sum(y) == t-1 (base model)");
  const double denom = static_cast<double>(y.size()) + beta * static_cast<double>(t - 1);
  std::vector<double> probs(y.size());
  for (std::size_t d = 0; d < y.size(); ++d)
    probs[d] = (1.0 + beta * static_cast<double>(y[d])) / denom;
  return probs;
}

std::vector<double> urn_step_probs_extended(const UrnState& state, int dims, double beta) {
  const std::int64_t succ = state.successes();
  const std::int64_t failed = state.t - succ;
  const double denom = static_cast<double>(dims) + beta * static_cast<double>(state.t);
  std::vector<double> probs(static_cast<std::size_t>(dims) + 1);
  for (int d = 0; d < dims; ++d)
    probs[static_cast<std::size_t>(d)] =
        (1.0 + beta * static_cast<double>(state.y[static_cast<std::size_t>(d)])) / denom;
  probs.back() = beta * static_cast<double>(failed) / denom;
  return probs;
}

namespace {

// Draws a category from integer weights: dimensions carry 1 + beta*y_d and
// the failure residue carries beta*(t - sum(y)). Returns dims for the
// residue. Integer arithmetic keeps the total exact (beta is used scaled by
// 1000 to admit fractional beta without floating drift).
int draw_category(const UrnState& state, int dims, double beta, CounterRng& rng) {
  constexpr std::int64_t kScale = 1000;
  const std::int64_t b = static_cast<std::int64_t>(beta * kScale + 0.5);
  const std::int64_t failed = state.t - state.successes();
  const std::int64_t total =
      kScale * static_cast<std::int64_t>(dims) + b * state.t;
  std::int64_t r = static_cast<std::int64_t>(
      rng.next_below(static_cast<std::uint64_t>(total)));
  for (int d = 0; d < dims; ++d) {
    const std::int64_t w = kScale + b * state.y[static_cast<std::size_t>(d)];
    if (r < w) return d;
    r -= w;
  }
  (void)failed;
  return dims;  // failure residue
}

}  // namespace

ChainResult simulate_chain(const UrnConfig& config, CounterRng& rng, bool keep_trace) {
  config.validate();
  ChainResult result;
  result.state.y.assign(static_cast<std::size_t>(config.dims), 0);
  result.state.t = 0;
  if (keep_trace) result.score_trace.reserve(static_cast<std::size_t>(config.steps));

  const double fail_all =
      std::pow(1.0 - config.improve_prob, static_cast<double>(config.local_k));
  const double step_success = 1.0 - fail_all;

  for (std::int64_t step = 1; step <= config.steps; ++step) {
    const int cat = draw_category(result.state, config.dims, config.beta, rng);
    if (cat < config.dims) {
      ++result.dim_draws;
      bool improved;
      if (config.improve_prob >= 1.0) {
        improved = true;
      } else if (config.improve_prob <= 0.0) {
        improved = false;
      } else {
        improved = rng.next_double() < step_success;
      }
      if (improved) {
        ++result.state.y[static_cast<std::size_t>(cat)];
        ++result.successes;
      }
    }
    ++result.state.t;
    if (keep_trace)
      result.score_trace.push_back(urn_score(result.state.y, config.lambda));
  }
  result.final_score = urn_score(result.state.y, config.lambda);
  return result;
}

namespace {

double simulate_one(const UrnConfig& config, std::int64_t sim_index) {
  double best = 0.0;
  for (int c = 0; c < config.chains; ++c) {
    const std::uint64_t key =
        derive_seed(derive_seed(config.seed, static_cast<std::uint64_t>(sim_index)),
                    static_cast<std::uint64_t>(c));
    CounterRng rng(key);
    const ChainResult chain = simulate_chain(config, rng, /*keep_trace=*/false);
    best = std::max(best, chain.final_score);
  }
  return best;
}

}  // namespace

EnsembleStats simulate_ensemble(const UrnConfig& config, std::optional<double> target_score,
                                int threads) {
  config.validate();
  EnsembleStats stats;
  stats.num_sims = config.num_sims;
  stats.best_scores.assign(static_cast<std::size_t>(config.num_sims), 0.0);

  int n_threads = threads > 0 ? threads
                              : static_cast<int>(std::thread::hardware_concurrency());
  if (n_threads < 1) n_threads = 1;
  n_threads = static_cast<int>(
      std::min<std::int64_t>(n_threads, config.num_sims));

  std::vector<std::future<void>> futures;
  futures.reserve(static_cast<std::size_t>(n_threads));
  for (int w = 0; w < n_threads; ++w) {
    futures.push_back(std::async(std::launch::async, [&, w]() {
      for (std::int64_t s = w; s < config.num_sims; s += n_threads)
        stats.best_scores[static_cast<std::size_t>(s)] = simulate_one(config, s);
    }));
  }
  for (auto& f : futures) f.get();

  double sum = 0.0, sq = 0.0;
  std::int64_t failures = 0;
  for (double v : stats.best_scores) {
    sum += v;
    sq += v * v;
    if (target_score && v < *target_score) ++failures;
  }
  const double n = static_cast<double>(config.num_sims);
  stats.mean_best_score = sum / n;
  const double var = std::max(0.0, sq / n - stats.mean_best_score * stats.mean_best_score);
  stats.std_best_score = std::sqrt(var);
  stats.failure_rate = target_score ? static_cast<double>(failures) / n : 0.0;
  return stats;
}

std::vector<SweepCell> allocation_sweep(const UrnConfig& base,
                                        const std::vector<int>& k_values,
                                        const std::vector<double>& p_values,
                                        std::optional<double> target_score, int threads) {
  base.validate();
  const std::int64_t budget = base.steps;  // per-chain proposal budget
  std::vector<SweepCell> cells;
  double sweep_max = 0.0;
  for (double p : p_values) {
    for (int k : k_values) {
      SweepCell cell;
      cell.p = p;
      cell.k = k;
      cell.chains = base.chains;
      if (k < 1 || budget % k != 0) {
        cell.skipped = true;
        cells.push_back(cell);
        continue;
      }
      UrnConfig cfg = base;
      cfg.local_k = k;
      cfg.improve_prob = p;
      cfg.steps = budget / k;
      // decorrelate cells while keeping the whole sweep reproducible
      cfg.seed = derive_seed(base.seed,
                             static_cast<std::uint64_t>(k) * 1000003ull +
                                 static_cast<std::uint64_t>(p * 1e6));
      const EnsembleStats stats = simulate_ensemble(cfg, target_score, threads);
      cell.steps = cfg.steps;
      cell.mean_score = stats.mean_best_score;
      cell.std_score = stats.std_best_score;
      cell.failure_rate = stats.failure_rate;
      cell.num_sims = stats.num_sims;
      sweep_max = std::max(sweep_max, cell.mean_score);
      cells.push_back(cell);
    }
  }
  if (sweep_max > 0.0) {
    for (auto& cell : cells)
      if (!cell.skipped) cell.norm_score = cell.mean_score / sweep_max;
  }
  return cells;
}

std::string sweep_to_csv(const std::vector<SweepCell>& cells) {
  std::ostringstream out;
  out << "p,K,steps,chains,mean_score,std,failure_rate,n_sims\n";
  out.precision(12);
  for (const auto& c : cells) {
    if (c.skipped) continue;
    out << c.p << ',' << c.k << ',' << c.steps << ',' << c.chains << ','
        << c.mean_score << ',' << c.std_score << ',' << c.failure_rate << ','
        << c.num_sims << '\n';
  }
  return out.str();
}

}  // namespace evoscale::urn
