#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "evoscale/core/run_state.hpp"
#include "evoscale/exporter/export.hpp"
#include "evoscale/gateway/mock_generator.hpp"
#include "evoscale/rng.hpp"
#include "evoscale/sandbox/evaluator.hpp"
#include "evoscale/scheduler/engine.hpp"

using namespace evoscale;
using namespace evoscale::exporter;
namespace fs = std::filesystem;

namespace {

TrajectoryRecord make_record(const std::string& task, const std::string& id,
                             const std::vector<double>& scores) {
  TrajectoryRecord record;
  record.task_id = task;
  record.trajectory_id = id;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    TrajectoryNode node;
    node.step = static_cast<int>(i + 1);
    node.prompt = "prompt " + std::to_string(i + 1);
    node.response = "response " + std::to_string(i + 1);
    node.score = scores[i];
    record.nodes.push_back(std::move(node));
  }
  record.recompute_max();
  return record;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("evoscale-export-" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

std::size_t line_count(const std::string& text) {
  std::size_t count = 0;
  for (char c : text)
    if (c == '\n') ++count;
  return count;
}

}  // namespace

TEST_CASE("credit assignment keeps the top R% per task") {
  SUBCASE("a single trajectory is always kept") {
    const auto credits = assign_credit_irft({make_record("t", "a", {0.1})}, 5.0);
    CHECK(credits.at("a") == 1);
  }

  SUBCASE("20 trajectories at R=10 keep exactly 2") {
    std::vector<TrajectoryRecord> records;
    for (int i = 0; i < 20; ++i)
      records.push_back(
          make_record("t", "traj" + std::to_string(i), {0.01 * i}));
    const auto credits = assign_credit_irft(records, 10.0);
    int kept = 0;
    for (const auto& [id, w] : credits) kept += w;
    CHECK(kept == 2);  // ceil(0.1 * 20), distinct scores: no boundary ties
    // sort oracle: the two highest max_scores carry w=1
    CHECK(credits.at("traj19") == 1);
    CHECK(credits.at("traj18") == 1);
    CHECK(credits.at("traj17") == 0);
  }

  SUBCASE("boundary ties are all kept") {
    std::vector<TrajectoryRecord> records;
    records.push_back(make_record("t", "a", {0.9}));
    records.push_back(make_record("t", "b", {0.5}));
    records.push_back(make_record("t", "c", {0.5}));
    records.push_back(make_record("t", "d", {0.5}));
    records.push_back(make_record("t", "e", {0.1}));
    // ceil(0.4*5) = 2 -> cutoff score is 0.5; ties at the cutoff stay
    const auto credits = assign_credit_irft(records, 40.0);
    CHECK(credits.at("a") == 1);
    CHECK(credits.at("b") == 1);
    CHECK(credits.at("c") == 1);
    CHECK(credits.at("d") == 1);
    CHECK(credits.at("e") == 0);
  }

  SUBCASE("grouping is per task") {
    std::vector<TrajectoryRecord> records;
    records.push_back(make_record("t1", "a", {0.9}));
    records.push_back(make_record("t1", "b", {0.1}));
    records.push_back(make_record("t2", "c", {0.2}));
    const auto credits = assign_credit_irft(records, 50.0);
    CHECK(credits.at("a") == 1);
    CHECK(credits.at("b") == 0);
    CHECK(credits.at("c") == 1);  // top of its own task
  }

  SUBCASE("every trajectory gets exactly one binary credit") {
    CounterRng rng(1);
    std::vector<TrajectoryRecord> records;
    for (int i = 0; i < 57; ++i)
      records.push_back(make_record(i % 2 ? "x" : "y", "t" + std::to_string(i),
                                    {rng.next_double()}));
    const auto credits = assign_credit_irft(records, 25.0);
    CHECK(credits.size() == 57);
    for (const auto& [id, w] : credits) CHECK((w == 0 || w == 1));
  }

  SUBCASE("invalid R rejected") {
    CHECK_THROWS(assign_credit_irft({make_record("t", "a", {0.1})}, 0.0));
    CHECK_THROWS(assign_credit_irft({make_record("t", "a", {0.1})}, 101.0));
  }
}

TEST_CASE("R schedule lookup") {
  ExportConfig config;
  config.r_schedule = {{1, 4, 10.0}, {5, 6, 5.0}};
  CHECK(config.r_for_iteration(1) == 10.0);
  CHECK(config.r_for_iteration(4) == 10.0);
  CHECK(config.r_for_iteration(5) == 5.0);
  CHECK(config.r_for_iteration(6) == 5.0);
  CHECK(config.r_for_iteration(9) == config.default_r);
  CHECK_NOTHROW(config.validate());
  config.r_schedule.push_back({7, 8, 0.0});
  CHECK_THROWS(config.validate());
}

TEST_CASE("truncate after first peak") {
  SUBCASE("drops everything after the first peak") {
    const auto record = truncate_after_peak(make_record("t", "a", {0.1, 0.5, 0.5, 0.3}));
    CHECK(record.nodes.size() == 2);
    CHECK(record.max_score == 0.5);
  }
  SUBCASE("peak at the end leaves the record unchanged") {
    const auto record = truncate_after_peak(make_record("t", "a", {0.1, 0.2, 0.9}));
    CHECK(record.nodes.size() == 3);
  }
  SUBCASE("single node unchanged") {
    CHECK(truncate_after_peak(make_record("t", "a", {0.4})).nodes.size() == 1);
  }
  SUBCASE("idempotent and max-preserving") {
    CounterRng rng(7);
    for (int round = 0; round < 200; ++round) {
      std::vector<double> scores;
      const int n = 1 + static_cast<int>(rng.next_below(10));
      for (int i = 0; i < n; ++i)
        scores.push_back(static_cast<double>(rng.next_below(5)) / 5.0);
      const auto record = make_record("t", "r", scores);
      const auto once = truncate_after_peak(record);
      CHECK(once.max_score == record.max_score);
      const auto twice = truncate_after_peak(once);
      CHECK(twice.nodes.size() == once.nodes.size());
      CHECK(once.nodes.back().score == record.max_score);
    }
  }
}

TEST_CASE("dataset export") {
  TempDir dir;
  const std::string out = (dir.path / "dataset.jsonl").string();

  SUBCASE("row count equals the truncated node sum of kept trajectories") {
    std::vector<TrajectoryRecord> records;
    records.push_back(make_record("t", "keep1", {0.1, 0.9, 0.5}));      // peak at 2 -> 2 rows
    records.push_back(make_record("t", "keep2", {0.2, 0.3, 0.8, 0.8, 0.1}));  // 3 rows
    records.push_back(make_record("t", "drop", {0.05}));
    std::map<std::string, int> credits = {{"keep1", 1}, {"keep2", 1}, {"drop", 0}};
    ExportConfig config;
    const auto summary = export_dataset(records, credits, config, out);
    CHECK(summary.rows_emitted == 5);
    CHECK(summary.trajectories_kept == 2);
    CHECK(summary.trajectories_total == 3);
    CHECK(line_count(read_file(out)) == 5);
  }

  SUBCASE("zero-weight rows are dropped by default and kept on request") {
    std::vector<TrajectoryRecord> records = {make_record("t", "a", {0.5}),
                                             make_record("t", "b", {0.1})};
    std::map<std::string, int> credits = {{"a", 1}, {"b", 0}};
    ExportConfig config;
    export_dataset(records, credits, config, out);
    std::string text = read_file(out);
    CHECK(text.find("\"weight\":0") == std::string::npos);
    config.include_zero_weight = true;
    export_dataset(records, credits, config, out);
    text = read_file(out);
    CHECK(text.find("\"weight\":0") != std::string::npos);
  }

  SUBCASE("re-export is byte-identical") {
    std::vector<TrajectoryRecord> records;
    CounterRng rng(3);
    for (int i = 0; i < 12; ++i) {
      std::vector<double> scores;
      for (int s = 0; s < 4; ++s) scores.push_back(rng.next_double());
      records.push_back(make_record("t", "r" + std::to_string(i), scores));
    }
    const auto credits = assign_credit_irft(records, 25.0);
    ExportConfig config;
    export_dataset(records, credits, config, out);
    const std::string first = read_file(out);
    export_dataset(records, credits, config, out);
    CHECK(read_file(out) == first);
  }

  SUBCASE("malformed nodes are skipped with warnings") {
    TrajectoryRecord broken = make_record("t", "a", {0.5, 0.9});
    broken.nodes[0].prompt.clear();
    std::map<std::string, int> credits = {{"a", 1}};
    ExportConfig config;
    const auto summary = export_dataset({broken}, credits, config, out);
    CHECK(summary.rows_skipped == 1);
    CHECK(summary.rows_emitted == 1);
    CHECK(!summary.warnings.empty());
  }

  SUBCASE("round-trip: emitted rows parse back to the kept fields") {
    std::vector<TrajectoryRecord> records = {make_record("task9", "tr", {0.3, 0.7})};
    std::map<std::string, int> credits = {{"tr", 1}};
    ExportConfig config;
    export_dataset(records, credits, config, out);
    std::ifstream in(out);
    std::string line;
    int step = 1;
    while (std::getline(in, line)) {
      const auto row = nlohmann::json::parse(line);
      CHECK(row.at("task_id") == "task9");
      CHECK(row.at("trajectory_id") == "tr");
      CHECK(row.at("step") == step);
      CHECK(row.at("prompt") == "prompt " + std::to_string(step));
      CHECK(row.at("response") == "response " + std::to_string(step));
      CHECK(row.at("weight") == 1);
      ++step;
    }
    CHECK(step == 3);
  }
}

TEST_CASE("replay buffer") {
  TempDir dir;
  const std::string buffer = (dir.path / "buffer").string();

  SUBCASE("merging disjoint runs accumulates; re-merge is idempotent") {
    std::vector<TrajectoryRecord> first = {make_record("t", "run1/t0", {0.1}),
                                           make_record("t", "run1/t1", {0.2})};
    std::vector<TrajectoryRecord> second = {make_record("t", "run2/t0", {0.3})};
    auto result = replay_buffer_merge(buffer, first, 1);
    CHECK(result.added == 2);
    result = replay_buffer_merge(buffer, second, 2);
    CHECK(result.added == 1);
    CHECK(replay_buffer_load(buffer).size() == 3);

    result = replay_buffer_merge(buffer, first, 3);
    CHECK(result.added == 0);
    CHECK(result.duplicates == 2);
    CHECK(replay_buffer_load(buffer).size() == 3);
  }

  SUBCASE("iteration tags stick and shrink the kept set under an adaptive R") {
    std::vector<TrajectoryRecord> batch1, batch2;
    for (int i = 0; i < 10; ++i)
      batch1.push_back(make_record("t", "i1/t" + std::to_string(i), {0.01 * i}));
    for (int i = 0; i < 10; ++i)
      batch2.push_back(make_record("t", "i2/t" + std::to_string(i), {0.5 + 0.01 * i}));
    replay_buffer_merge(buffer, batch1, 1);
    replay_buffer_merge(buffer, batch2, 2);
    const auto loaded = replay_buffer_load(buffer);
    CHECK(loaded.size() == 20);

    ExportConfig config;
    config.r_schedule = {{1, 1, 50.0}, {2, 2, 10.0}};
    const auto early = assign_credit_irft(loaded, config.r_for_iteration(1));
    const auto late = assign_credit_irft(loaded, config.r_for_iteration(2));
    auto kept = [](const std::map<std::string, int>& credits) {
      int n = 0;
      for (const auto& [id, w] : credits) n += w;
      return n;
    };
    CHECK(kept(early) == 10);
    CHECK(kept(late) == 2);
  }
}

TEST_CASE("records reconstructed from an engine event log") {
  // run a small engine search, then rebuild trajectory records from its log
  auto generator = std::make_shared<gateway::FunctionGenerator>(
      [](const gateway::GeneratorRequest& request) {
        gateway::GenResult result;
        for (int i = 0; i < request.sample_count; ++i)
          result.response.candidates.push_back(
              "sol-" + std::to_string(splitmix64(request.sampling_seed + i) % 1000));
        return result;
      });
  auto evaluator = std::make_shared<sandbox::MockEvaluator>();
  evaluator->set_default_hash();

  core::TaskSpec task;
  task.task_id = "rebuild";
  task.instruction = "instr";
  task.initial_solution = "seed";
  task.evaluator.evaluator.command = "unused";
  core::RunConfig config;
  config.global_width = 2;
  config.depth_limit = 3;
  config.local_k = 2;

  TempDir dir;
  core::EventLog log((dir.path / "events.jsonl").string());
  auto state = core::RunState::init_run(task, config, *evaluator, "rb", &log);
  scheduler::Engine engine(generator, evaluator);
  engine.run(*state, scheduler::EngineOptions{&log, ""});
  log.flush_all();

  const auto records = records_from_events(log.events(), 4);
  REQUIRE(records.size() == 2);
  for (const auto& record : records) {
    CHECK(record.task_id == "rebuild");
    CHECK(record.iteration == 4);
    CHECK(record.nodes.size() == 3);
    for (int d = 0; d < 3; ++d) {
      CHECK(record.nodes[static_cast<std::size_t>(d)].step == d + 1);
      CHECK(!record.nodes[static_cast<std::size_t>(d)].prompt.empty());
      CHECK(!record.nodes[static_cast<std::size_t>(d)].response.empty());
    }
    // node order equals commit order and max matches the committed chain
    const core::TrajectoryId c = record.trajectory_id.back() == '0' ? 0 : 1;
    double chain_max = state->node(state->trajectory(c).committed[0]).score;
    for (core::NodeId id : state->trajectory(c).committed)
      chain_max = std::max(chain_max, state->node(id).score);
    CHECK(record.max_score == doctest::Approx(chain_max));
  }
}
