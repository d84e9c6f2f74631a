#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "evoscale/rng.hpp"
#include "evoscale/selection/elite_pool.hpp"
#include "evoscale/selection/proposal.hpp"
#include "evoscale/selection/selector.hpp"

using namespace evoscale;
using core::Node;
using core::NodeId;
using selection::HistoryView;

namespace {

// creation-ordered node storage for view construction
struct Graph {
  std::vector<Node> nodes;

  explicit Graph(std::size_t capacity) { nodes.reserve(capacity); }

  Node& add(double score, std::vector<NodeId> parents = {},
            std::uint64_t selection_count = 0, bool failed = false) {
    Node node;
    node.id = nodes.size();
    node.score = failed ? sandbox::kSentinelWorstScore : score;
    if (failed) node.outcome.error_class = sandbox::ErrorClass::crash;
    node.inspiration_parents = std::move(parents);
    node.selection_count = selection_count;
    nodes.push_back(std::move(node));
    return nodes.back();
  }

  HistoryView view() const {
    HistoryView v;
    for (const auto& node : nodes) v.push_back(&node);
    return v;
  }
};

// memoized brute-force recursion, the independent oracle for propagation
double brute_force_value(const HistoryView& history, std::size_t index, double gamma,
                         std::map<std::size_t, double>& memo) {
  if (auto it = memo.find(index); it != memo.end()) return it->second;
  double value = history[index]->score;
  double best_child = sandbox::kSentinelWorstScore;
  bool has_child = false;
  for (std::size_t j = 0; j < history.size(); ++j) {
    for (NodeId parent : history[j]->inspiration_parents) {
      if (parent == history[index]->id) {
        has_child = true;
        best_child = std::max(best_child, brute_force_value(history, j, gamma, memo));
      }
    }
  }
  if (has_child) value = std::max(value, gamma * best_child);
  memo[index] = value;
  return value;
}

Graph random_dag(CounterRng& rng, int max_nodes) {
  const int n = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(max_nodes)));
  Graph graph(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::vector<NodeId> parents;
    if (i > 0) {
      const int parent_count = static_cast<int>(rng.next_below(3));
      std::set<NodeId> chosen;
      for (int p = 0; p < parent_count; ++p)
        chosen.insert(rng.next_below(static_cast<std::uint64_t>(i)));
      parents.assign(chosen.begin(), chosen.end());
    }
    graph.add(rng.next_double() * 2.0 - 0.5, std::move(parents),
              rng.next_below(5));
  }
  return graph;
}

}  // namespace

TEST_CASE("propagate_values examples") {
  SUBCASE("leaf keeps its own score") {
    Graph graph(1);
    graph.add(0.6);
    const auto values = selection::propagate_values(graph.view(), 0.8);
    CHECK(values[0] == 0.6);
  }
  SUBCASE("discounted child value wins over a weak own score") {
    Graph graph(2);
    graph.add(0.5);
    graph.add(0.9, {0});
    const auto values = selection::propagate_values(graph.view(), 0.8);
    CHECK(values[1] == 0.9);
    CHECK(values[0] == doctest::Approx(0.72));
    CHECK(values[0] == std::max(0.5, 0.8 * 0.9));
  }
}

TEST_CASE("propagation matches the memoized brute force exactly on random DAGs") {
  CounterRng rng(1234);
  for (int round = 0; round < 300; ++round) {
    const Graph graph = random_dag(rng, 50);
    const HistoryView view = graph.view();
    for (double gamma : {0.5, 0.8, 1.0}) {
      const auto values = selection::propagate_values(view, gamma);
      std::map<std::size_t, double> memo;
      for (std::size_t i = 0; i < view.size(); ++i) {
        const double expected = brute_force_value(view, i, gamma, memo);
        CHECK(values[i] == expected);  // exact floating equality
      }
    }
  }
}

TEST_CASE("raising a descendant's score never lowers an ancestor's value") {
  CounterRng rng(77);
  for (int round = 0; round < 50; ++round) {
    Graph graph = random_dag(rng, 30);
    const auto before = selection::propagate_values(graph.view(), 0.8);
    const std::size_t bump = rng.next_below(graph.nodes.size());
    graph.nodes[bump].score += 1.0;
    const auto after = selection::propagate_values(graph.view(), 0.8);
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(after[i] >= before[i]);
  }
}

TEST_CASE("rpucg score formula") {
  SUBCASE("lambda 0 reduces to the propagated value") {
    CHECK(selection::rpucg_score(0.42, 0.7, 3, 10, 0.0) == 0.42);
  }
  SUBCASE("fresh top-prior node gets sqrt(1+|S|)/(1+0)") {
    // n=0, rho=1, |S|=3, lambda=1: U + sqrt(4)/1 = U + 2
    CHECK(selection::rpucg_score(0.1, 1.0, 0, 3, 1.0) == doctest::Approx(0.1 + 2.0));
  }
  SUBCASE("selection count damps exploration") {
    const double fresh = selection::rpucg_score(0.0, 1.0, 0, 8, 1.0);
    const double worn = selection::rpucg_score(0.0, 1.0, 9, 8, 1.0);
    CHECK(fresh == doctest::Approx(10.0 * worn));
  }
}

TEST_CASE("lambda 0 ordering equals ordering by propagated value") {
  CounterRng rng(4242);
  Graph graph = random_dag(rng, 40);
  const HistoryView view = graph.view();
  const auto values = selection::propagate_values(view, 0.8);
  const auto priors = selection::percentile_ranks(view);
  std::vector<std::size_t> by_rpucg(view.size()), by_value(view.size());
  for (std::size_t i = 0; i < view.size(); ++i) by_rpucg[i] = by_value[i] = i;
  std::stable_sort(by_rpucg.begin(), by_rpucg.end(), [&](std::size_t a, std::size_t b) {
    return selection::rpucg_score(values[a], priors[a], view[a]->selection_count,
                                  view.size(), 0.0) >
           selection::rpucg_score(values[b], priors[b], view[b]->selection_count,
                                  view.size(), 0.0);
  });
  std::stable_sort(by_value.begin(), by_value.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  CHECK(by_rpucg == by_value);
}

TEST_CASE("percentile ranks") {
  SUBCASE("single valid node maps to 1") {
    Graph graph(1);
    graph.add(0.3);
    CHECK(selection::percentile_ranks(graph.view())[0] == 1.0);
  }
  SUBCASE("ties share the lower rank; failures get zero") {
    Graph graph(5);
    graph.add(0.1);
    graph.add(0.4);
    graph.add(0.4);
    graph.add(0.9);
    graph.add(0.0, {}, 0, /*failed=*/true);
    const auto ranks = selection::percentile_ranks(graph.view());
    CHECK(ranks[0] == doctest::Approx(0.0));
    CHECK(ranks[1] == doctest::Approx(1.0 / 3.0));
    CHECK(ranks[2] == doctest::Approx(1.0 / 3.0));
    CHECK(ranks[3] == doctest::Approx(1.0));
    CHECK(ranks[4] == 0.0);
  }
}

namespace {

// eligibility oracle: recompute the eligible set from scratch after each pick
std::vector<std::size_t> greedy_oracle(const HistoryView& view,
                                       const core::SelectorConfig& config) {
  const auto values = selection::propagate_values(view, config.rpucg_gamma);
  const auto priors = selection::percentile_ranks(view);
  std::vector<double> scores(view.size());
  for (std::size_t i = 0; i < view.size(); ++i)
    scores[i] = selection::rpucg_score(values[i], priors[i], view[i]->selection_count,
                                       view.size(), config.rpucg_lambda);
  std::set<std::size_t> excluded;
  std::vector<std::size_t> picks;
  auto linked = [&](std::size_t a, std::size_t b) {
    for (NodeId p : view[a]->inspiration_parents)
      if (p == view[b]->id) return true;
    for (NodeId p : view[b]->inspiration_parents)
      if (p == view[a]->id) return true;
    return false;
  };
  while (static_cast<int>(picks.size()) < config.insp_count) {
    std::size_t best = view.size();
    for (std::size_t i = 0; i < view.size(); ++i) {
      if (excluded.count(i)) continue;
      if (best == view.size() || scores[i] > scores[best]) best = i;
    }
    if (best == view.size()) break;
    picks.push_back(best);
    excluded.insert(best);
    for (std::size_t i = 0; i < view.size(); ++i)
      if (linked(best, i)) excluded.insert(i);
  }
  return picks;
}

}  // namespace

TEST_CASE("rpucg selection with one-hop exclusion") {
  core::SelectorConfig config;
  config.insp_count = 3;

  SUBCASE("single node history selects that node") {
    Graph graph(1);
    graph.add(0.5);
    const auto picks = selection::select_inspirations_rpucg(graph.view(), config);
    REQUIRE(picks.size() == 1);
    CHECK(picks[0] == 0);
  }

  SUBCASE("picking the middle of a chain excludes both neighbors") {
    // chain 0 -> 1 -> 2 with 1 the strongest, plus detached 3 and 4
    Graph graph(5);
    graph.add(0.2);
    graph.add(0.95, {0});
    graph.add(0.3, {1});
    graph.add(0.1);
    graph.add(0.05);
    config.rpucg_lambda = 0.0;  // pure value ordering
    const auto picks = selection::select_inspirations_rpucg(graph.view(), config);
    REQUIRE(!picks.empty());
    CHECK(picks[0] == 1);
    for (std::size_t pick : picks) {
      CHECK(pick != 0);
      CHECK(pick != 2);
    }
  }

  SUBCASE("matches the from-scratch eligibility oracle on random graphs") {
    CounterRng rng(31337);
    for (int round = 0; round < 200; ++round) {
      const Graph graph = random_dag(rng, 12);
      const auto picks = selection::select_inspirations_rpucg(graph.view(), config);
      const auto expected = greedy_oracle(graph.view(), config);
      CHECK(picks == expected);
    }
  }

  SUBCASE("no two selected inspirations are directly linked") {
    CounterRng rng(999);
    for (int round = 0; round < 100; ++round) {
      const Graph graph = random_dag(rng, 20);
      const HistoryView view = graph.view();
      const auto picks = selection::select_inspirations_rpucg(view, config);
      for (std::size_t a : picks) {
        for (std::size_t b : picks) {
          if (a == b) continue;
          for (NodeId parent : view[a]->inspiration_parents) CHECK(parent != view[b]->id);
        }
      }
    }
  }

  SUBCASE("insp_count sweep") {
    CounterRng rng(5150);
    const Graph graph = random_dag(rng, 40);
    for (int insp : {1, 3, 5, 10}) {
      config.insp_count = insp;
      const auto picks = selection::select_inspirations_rpucg(graph.view(), config);
      CHECK(!picks.empty());
      CHECK(picks.size() <= static_cast<std::size_t>(insp));
    }
  }
}

TEST_CASE("balance selection") {
  core::BalanceTiers tiers;

  SUBCASE("n=1 returns exactly the best node") {
    Graph graph(4);
    graph.add(0.1);
    graph.add(0.9);
    graph.add(0.5);
    graph.add(0.2);
    CounterRng rng(1);
    const auto picks = selection::select_inspirations_balance(graph.view(), 1, tiers, rng);
    REQUIRE(picks.size() == 1);
    CHECK(picks[0] == 1);
  }

  SUBCASE("history smaller than n is returned whole") {
    Graph graph(3);
    graph.add(0.1);
    graph.add(0.3);
    graph.add(0.2);
    CounterRng rng(2);
    const auto picks = selection::select_inspirations_balance(graph.view(), 10, tiers, rng);
    CHECK(picks.size() == 3);
  }

  SUBCASE("best node always included and picks are duplicate-free") {
    Graph graph(30);
    CounterRng scores(12);
    for (int i = 0; i < 30; ++i) graph.add(scores.next_double());
    std::size_t best = 0;
    for (std::size_t i = 0; i < graph.nodes.size(); ++i)
      if (graph.nodes[i].score > graph.nodes[best].score) best = i;
    CounterRng rng(3);
    for (int round = 0; round < 200; ++round) {
      const auto picks = selection::select_inspirations_balance(graph.view(), 5, tiers, rng);
      CHECK(std::count(picks.begin(), picks.end(), best) == 1);
      std::set<std::size_t> unique(picks.begin(), picks.end());
      CHECK(unique.size() == picks.size());
    }
  }

  SUBCASE("tier draw frequencies match configured probabilities within 3 sigma") {
    tiers.p_exploit = 0.5;
    tiers.p_explore = 0.3;
    CounterRng rng(777);
    const int draws = 100000;
    int exploit = 0, explore = 0, random_all = 0;
    for (int i = 0; i < draws; ++i) {
      switch (selection::pick_tier(tiers, rng)) {
        case selection::BalanceTier::exploit: ++exploit; break;
        case selection::BalanceTier::explore: ++explore; break;
        case selection::BalanceTier::random_all: ++random_all; break;
      }
    }
    auto check_freq = [&](int count, double p) {
      const double sigma = std::sqrt(p * (1.0 - p) * draws);
      CHECK(std::fabs(count - p * draws) <= 3.0 * sigma);
    };
    check_freq(exploit, 0.5);
    check_freq(explore, 0.3);
    check_freq(random_all, 0.2);
  }
}

TEST_CASE("random selection") {
  Graph graph(10);
  for (int i = 0; i < 10; ++i) graph.add(i * 0.1);

  SUBCASE("n=0 is empty") {
    CounterRng rng(5);
    CHECK(selection::select_inspirations_random(graph.view(), 0, rng).empty());
  }
  SUBCASE("n == history returns a permutation") {
    CounterRng rng(6);
    const auto picks = selection::select_inspirations_random(graph.view(), 10, rng);
    std::set<std::size_t> unique(picks.begin(), picks.end());
    CHECK(unique.size() == 10);
  }
  SUBCASE("per-node inclusion frequency is n/|history|") {
    CounterRng rng(7);
    const int draws = 100000;
    std::vector<int> included(10, 0);
    for (int i = 0; i < draws; ++i)
      for (std::size_t pick : selection::select_inspirations_random(graph.view(), 3, rng))
        ++included[pick];
    const double p = 0.3;
    const double sigma = std::sqrt(p * (1.0 - p) * draws);
    for (int count : included) CHECK(std::fabs(count - p * draws) <= 4.0 * sigma);
  }
}

TEST_CASE("elite pool update") {
  using selection::EliteAction;
  using selection::EliteDecision;
  using selection::EliteEntry;
  using selection::ElitePool;

  auto reject_all = [](const EliteEntry&, const std::vector<EliteEntry>&) {
    return std::optional<EliteDecision>{EliteDecision{EliteAction::reject, -1}};
  };

  SUBCASE("empty pool always admits") {
    ElitePool pool;
    pool = selection::elite_pool_update(pool, {1, 0.5, "a"}, reject_all);
    CHECK(pool.entries.size() == 1);
  }

  SUBCASE("strictly better candidate overrides a reject") {
    ElitePool pool;
    pool.capacity = 2;
    pool = selection::elite_pool_update(pool, {1, 0.5, "a"}, reject_all);
    pool = selection::elite_pool_update(pool, {2, 0.9, "b"}, reject_all);
    CHECK(pool.entries.size() == 2);
    CHECK(pool.max_score() == 0.9);
    // full pool: override replaces the lowest scorer
    pool = selection::elite_pool_update(pool, {3, 1.5, "c"}, reject_all);
    CHECK(pool.entries.size() == 2);
    CHECK(pool.max_score() == 1.5);
    bool has_low = false;
    for (const auto& e : pool.entries) has_low = has_low || e.node_id == 1;
    CHECK(!has_low);
  }

  SUBCASE("provider replace swaps the named member") {
    ElitePool pool;
    pool.capacity = 3;
    pool.entries = {{1, 0.9, "a"}, {2, 0.8, "b"}, {3, 0.7, "c"}};
    auto replace_1 = [](const EliteEntry&, const std::vector<EliteEntry>&) {
      return std::optional<EliteDecision>{EliteDecision{EliteAction::replace, 1}};
    };
    pool = selection::elite_pool_update(pool, {4, 0.5, "d"}, replace_1);
    CHECK(pool.entries.size() == 3);
    CHECK(pool.entries[1].node_id == 4);
  }

  SUBCASE("provider failure is a reject") {
    ElitePool pool;
    pool.entries = {{1, 0.9, "a"}};
    auto broken = [](const EliteEntry&,
                     const std::vector<EliteEntry>&) -> std::optional<EliteDecision> {
      return std::nullopt;
    };
    pool = selection::elite_pool_update(pool, {2, 0.1, "b"}, broken);
    CHECK(pool.entries.size() == 1);
  }

  SUBCASE("monotonic override strictly raises the pool maximum") {
    CounterRng rng(88);
    ElitePool pool;
    pool.capacity = 4;
    pool.entries = {{1, 0.4, "a"}, {2, 0.3, "b"}};
    double previous = pool.max_score();
    for (std::uint64_t i = 0; i < 50; ++i) {
      const double score = previous + rng.next_double() + 1e-6;
      pool = selection::elite_pool_update(pool, {10 + i, score, "x"}, reject_all);
      CHECK(pool.max_score() > previous);
      previous = pool.max_score();
      CHECK(pool.entries.size() <= pool.capacity);
    }
  }
}

TEST_CASE("elite decision parsing") {
  using selection::EliteAction;
  CHECK(selection::parse_elite_decision("ADD")->action == EliteAction::add);
  CHECK(selection::parse_elite_decision("  reject \nrest")->action == EliteAction::reject);
  auto replace = selection::parse_elite_decision("Replace 2");
  REQUIRE(replace.has_value());
  CHECK(replace->action == EliteAction::replace);
  CHECK(replace->replace_index == 2);
  CHECK(!selection::parse_elite_decision("REPLACE").has_value());
  CHECK(!selection::parse_elite_decision("maybe?").has_value());
  CHECK(!selection::parse_elite_decision("").has_value());
}

TEST_CASE("proposal bundle and rendering") {
  core::TaskSpec task;
  task.task_id = "toy";
  task.instruction = "maximize the function";
  task.initial_solution = "x = 0";
  task.evaluator.evaluator.command = "/bin/true";
  task.evaluator.timeout_s = 5.0;
  core::FeatureConfig features;

  SUBCASE("no inspirations falls back to the seed solution") {
    core::LocalMemory memory;
    const auto bundle = selection::build_proposal(task, {}, memory, features);
    REQUIRE(bundle.inspirations.size() == 1);
    CHECK(bundle.inspirations[0].solution == "x = 0");
    const auto sections =
        selection::parse_rendered_sections(selection::render_proposal(bundle));
    CHECK(sections.count(selection::kSectionInstruction) == 1);
    CHECK(sections.count(selection::kSectionEvaluation) == 1);
    CHECK(sections.at(selection::kSectionPriorAttempts).find("x = 0") != std::string::npos);
  }

  SUBCASE("all items present in fixed section order") {
    core::LocalMemory memory;
    sandbox::EvalOutcome timeout_outcome =
        sandbox::EvalOutcome::failure(sandbox::ErrorClass::timeout, "slow");
    sandbox::EvalOutcome crash_outcome =
        sandbox::EvalOutcome::failure(sandbox::ErrorClass::crash, "boom");
    memory.failures.record(timeout_outcome, 1);
    memory.failures.record(crash_outcome, 2);

    std::vector<selection::InspirationEntry> inspirations;
    for (int i = 0; i < 3; ++i) {
      selection::InspirationEntry entry;
      entry.node_id = static_cast<std::uint64_t>(i + 1);
      entry.solution = "solution " + std::to_string(i);
      entry.score = 0.1 * i;
      if (i == 0) entry.reflection = "used gradient steps";
      inspirations.push_back(entry);
    }
    const auto bundle = selection::build_proposal(task, inspirations, memory, features);
    const std::string text = selection::render_proposal(bundle);

    // section order is fixed
    const auto pos_instruction = text.find("=== INSTRUCTION ===");
    const auto pos_evaluation = text.find("=== EVALUATION ===");
    const auto pos_attempts = text.find("=== PRIOR ATTEMPTS ===");
    const auto pos_signals = text.find("=== SIGNALS ===");
    REQUIRE(pos_instruction != std::string::npos);
    CHECK(pos_instruction < pos_evaluation);
    CHECK(pos_evaluation < pos_attempts);
    CHECK(pos_attempts < pos_signals);

    const auto sections = selection::parse_rendered_sections(text);
    const std::string& attempts = sections.at(selection::kSectionPriorAttempts);
    for (int i = 0; i < 3; ++i)
      CHECK(attempts.find("solution " + std::to_string(i)) != std::string::npos);
    CHECK(attempts.find("used gradient steps") != std::string::npos);
    const std::string& signals = sections.at(selection::kSectionSignals);
    CHECK(signals.find("timeout") != std::string::npos);
    CHECK(signals.find("crash") != std::string::npos);

    // deterministic rendering
    CHECK(selection::render_proposal(bundle) == text);
  }
}
