#include "evoscale/cli/commands.hpp"

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "evoscale/core/run_state.hpp"
#include "evoscale/exporter/export.hpp"
#include "evoscale/gateway/http_generator.hpp"
#include "evoscale/gateway/mock_generator.hpp"
#include "evoscale/io/config_io.hpp"
#include "evoscale/report.hpp"
#include "evoscale/scheduler/engine.hpp"
#include "evoscale/urn/urn.hpp"

namespace evoscale::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

scheduler::Engine* g_active_engine = nullptr;

void handle_interrupt(int) {
  if (g_active_engine) g_active_engine->request_stop();
}

std::shared_ptr<gateway::Generator> make_generator(const std::string& mock_script) {
  if (!mock_script.empty())
    return std::make_shared<gateway::ScriptedGenerator>(
        gateway::ScriptedGenerator::entries_from_script(mock_script));
  return std::make_shared<gateway::HttpGenerator>(gateway::HttpGeneratorConfig::from_env());
}

std::shared_ptr<sandbox::Evaluator> make_evaluator(const core::TaskSpec& task,
                                                   const std::string& mock_script) {
  if (!mock_script.empty())
    return std::make_shared<sandbox::MockEvaluator>(
        sandbox::MockEvaluator::from_script(mock_script));
  // the evaluator command must exist up front
  const std::string& command = task.evaluator.evaluator.command;
  const bool has_slash = command.find('/') != std::string::npos;
  if (has_slash && !fs::exists(command))
    throw core::SetupError("evaluator command not found: " + command);
  return std::make_shared<sandbox::SandboxEvaluator>(task.evaluator);
}

core::RunConfig resolve_config(const std::string& config_file,
                               const std::vector<std::string>& overrides,
                               std::optional<std::uint64_t> seed,
                               std::optional<int> restarts) {
  core::RunConfig config;
  if (!config_file.empty()) config = io::load_run_config_file(config_file);
  io::apply_overrides(config, overrides);  // precedence: file < flags
  if (seed) config.rng_seed = *seed;
  if (restarts) config.restarts = *restarts;
  config.validate();
  return config;
}

std::string run_id_for(const core::RunConfig& config) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "run-%016llx",
                static_cast<unsigned long long>(config.rng_seed));
  return buf;
}

}  // namespace

int cmd_run(const RunArgs& args) {
  try {
    const core::TaskSpec task = io::load_task_file(args.task_file);
    core::RunConfig config =
        resolve_config(args.config_file, args.overrides, args.seed, args.restarts);

    fs::create_directories(args.out_dir);
    const std::string log_path = (fs::path(args.out_dir) / "events.jsonl").string();
    std::uint64_t first_ts = 0;
    if (!args.resume_checkpoint.empty() && fs::exists(log_path)) {
      // resumed runs append; continue the logical clock
      std::ifstream existing(log_path);
      std::string line;
      while (std::getline(existing, line))
        if (!line.empty()) ++first_ts;
    }
    core::EventLog log(log_path,
                       args.live_log ? core::EventLog::Order::live
                                     : core::EventLog::Order::canonical,
                       first_ts);

    auto generator = make_generator(args.mock_generator_script);
    auto evaluator = make_evaluator(task, args.mock_evaluator_script);

    scheduler::EngineOptions options;
    options.log = &log;
    options.checkpoint_path = (fs::path(args.out_dir) / "checkpoint.json").string();

    scheduler::Engine engine(generator, evaluator);
    g_active_engine = &engine;
    std::signal(SIGINT, handle_interrupt);

    scheduler::MultiRunResult result;
    if (!args.resume_checkpoint.empty()) {
      auto state = core::RunState::restore(io::load_json_file(args.resume_checkpoint));
      engine.run(*state, options);
      scheduler::RunSummary summary;
      summary.run_id = state->run_id();
      summary.best_node = state->best_overall().id;
      summary.best_score = state->best_overall().score;
      summary.ledger = state->ledger();
      result.runs.push_back(summary);
      result.best_score = summary.best_score;
      result.best_solution = state->best_overall().solution;
    } else {
      result = scheduler::run_with_restarts(task, config, generator, evaluator,
                                            run_id_for(config), options, &engine);
    }
    g_active_engine = nullptr;

    log.flush_all();
    const report::RunReport run_report = report::report_from_log_file(log_path);
    json report_json = run_report.to_json();
    report_json["overrides"] = args.overrides;  // provenance
    report_json["score_direction"] =
        task.score_direction == core::ScoreDirection::minimize ? "minimize" : "maximize";
    json run_rows = json::array();
    for (const auto& run : result.runs)
      run_rows.push_back({{"run_id", run.run_id},
                          {"best_score", run.best_score},
                          {"saturated", run.saturated},
                          {"wall_time_s", run.wall_time_s}});
    report_json["restart_summaries"] = std::move(run_rows);
    io::write_text_file((fs::path(args.out_dir) / "report.json").string(),
                        report_json.dump(2) + "\n");

    const std::string best_path = (fs::path(args.out_dir) / "best_solution.txt").string();
    io::write_text_file(best_path, result.best_solution);

    std::cout << "best_score " << result.best_score << "\n"
              << "best_solution " << best_path << "\n";
    for (const auto& run : result.runs)
      if (run.saturated) std::cout << "saturated " << run.run_id << "\n";

    const bool clean = !result.runs.empty() &&
                       run_report.runs.size() >= result.runs.size() &&
                       run_report.runs.back().status == "finished";
    return clean ? kExitOk : kExitAborted;
  } catch (const core::SetupError& e) {
    std::cerr << "setup error: " << e.what() << "\n";
    return kExitSetup;
  } catch (const std::invalid_argument& e) {
    std::cerr << "setup error: " << e.what() << "\n";
    return kExitSetup;
  } catch (const scheduler::RunAbortedError& e) {
    std::cerr << "run aborted: " << e.what() << "\n";
    return kExitAborted;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitAborted;
  }
}

int cmd_sweep(const SweepArgs& args) {
  try {
    const core::TaskSpec task = io::load_task_file(args.task_file);
    core::RunConfig config =
        resolve_config(args.config_file, args.overrides, std::nullopt, std::nullopt);

    std::vector<scheduler::SweepPoint> grid;
    std::istringstream points(args.grid);
    std::string point;
    while (std::getline(points, point, ';')) {
      if (point.empty()) continue;
      scheduler::SweepPoint p;
      if (std::sscanf(point.c_str(), "%d,%d,%d", &p.global_width, &p.depth_limit,
                      &p.local_k) != 3)
        throw std::invalid_argument("sweep: grid point must be C,L,K — got '" + point + "'");
      grid.push_back(p);
    }
    if (grid.empty()) throw std::invalid_argument("sweep: empty grid");

    auto generator = make_generator(args.mock_generator_script);
    auto evaluator = make_evaluator(task, args.mock_evaluator_script);
    const auto rows = scheduler::sweep(task, config, grid, args.fixed_n, generator,
                                       evaluator, run_id_for(config));

    fs::create_directories(args.out_dir);
    std::ostringstream csv;
    csv.precision(12);
    csv << "C,L,K,seed,best_score,consumed_evaluations,planned_evaluations\n";
    for (const auto& row : rows)
      csv << row.point.global_width << ',' << row.point.depth_limit << ','
          << row.point.local_k << ',' << row.seed << ',' << row.best_score << ','
          << row.consumed_evaluations << ',' << row.planned_evaluations << '\n';
    io::write_text_file((fs::path(args.out_dir) / "sweep.csv").string(), csv.str());
    std::cout << csv.str();
    return kExitOk;
  } catch (const std::invalid_argument& e) {
    std::cerr << "setup error: " << e.what() << "\n";
    return kExitSetup;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitAborted;
  }
}

namespace {

std::vector<int> parse_int_list(const std::string& csv, std::vector<int> fallback) {
  if (csv.empty()) return fallback;
  std::vector<int> out;
  std::istringstream in(csv);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(std::stoi(item));
  return out;
}

std::vector<double> parse_double_list(const std::string& csv, std::vector<double> fallback) {
  if (csv.empty()) return fallback;
  std::vector<double> out;
  std::istringstream in(csv);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(std::stod(item));
  return out;
}

}  // namespace

int cmd_simulate(const SimulateArgs& args) {
  try {
    urn::UrnConfig config;
    if (!args.config_file.empty()) config = io::load_urn_config_file(args.config_file);
    if (args.figure_preset) {
      config.steps = 4096;
      config.beta = 4.0;
      config.chains = 32;
      config.num_sims = 2048;
    }
    config.validate();

    const std::vector<int> k_values =
        parse_int_list(args.k_values, {1, 2, 4, 8, 16, 64, 256, 512});
    const std::vector<double> p_values = parse_double_list(args.p_values, {0.5, 0.75, 1.0});

    const auto cells =
        urn::allocation_sweep(config, k_values, p_values, args.target_score, args.threads);

    fs::create_directories(args.out_dir);
    const std::string csv = urn::sweep_to_csv(cells);
    io::write_text_file((fs::path(args.out_dir) / "urn_sweep.csv").string(), csv);

    std::ostringstream summary;
    summary.precision(6);
    summary << "p K steps mean norm\n";
    for (const auto& cell : cells) {
      if (cell.skipped) {
        summary << cell.p << " " << cell.k << " -- skipped (K does not divide budget)\n";
        continue;
      }
      summary << cell.p << " " << cell.k << " " << cell.steps << " " << cell.mean_score
              << " " << cell.norm_score << "\n";
    }
    std::cout << summary.str();
    io::write_text_file((fs::path(args.out_dir) / "urn_summary.txt").string(), summary.str());
    return kExitOk;
  } catch (const std::invalid_argument& e) {
    std::cerr << "setup error: " << e.what() << "\n";
    return kExitSetup;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitAborted;
  }
}

int cmd_export(const ExportArgs& args) {
  try {
    if (!fs::is_directory(args.runs_dir))
      throw std::invalid_argument("export: runs_dir does not exist: " + args.runs_dir);

    exporter::ExportConfig config;
    if (!args.export_config_file.empty()) {
      const json j = io::load_json_file(args.export_config_file);
      config.default_r = j.value("default_r", config.default_r);
      config.truncate_after_peak = j.value("truncate_after_peak", config.truncate_after_peak);
      config.per_task_grouping = j.value("per_task_grouping", config.per_task_grouping);
      if (j.contains("R_schedule")) {
        for (const auto& span : j["R_schedule"])
          config.r_schedule.push_back({span.at("from").get<int>(), span.at("to").get<int>(),
                                       span.at("R").get<double>()});
      }
    }
    config.include_zero_weight = args.include_zero_weight;
    config.validate();

    // gather event logs under runs_dir
    std::vector<std::string> log_files;
    for (const auto& entry : fs::recursive_directory_iterator(args.runs_dir))
      if (entry.is_regular_file() && entry.path().filename() == "events.jsonl")
        log_files.push_back(entry.path().string());
    std::sort(log_files.begin(), log_files.end());
    if (log_files.empty())
      throw std::invalid_argument("export: no events.jsonl found under " + args.runs_dir);

    std::vector<exporter::TrajectoryRecord> records;
    std::size_t corrupt = 0, total = 0;
    for (const auto& path : log_files) {
      const core::LogReadResult read = core::read_event_log(path);
      corrupt += read.corrupt_lines;
      total += read.total_lines;
      auto batch = exporter::records_from_events(read.events, args.iteration);
      for (auto& record : batch) records.push_back(std::move(record));
    }
    if (total > 0 && corrupt * 100 > total) {
      std::cerr << "export: " << corrupt << "/" << total << " corrupt log lines (>1%)\n";
      return kExitAborted;
    }
    if (corrupt > 0)
      std::cerr << "export: skipped " << corrupt << " corrupt log lines\n";

    std::string buffer_dir = args.buffer_dir;
    if (buffer_dir.empty()) buffer_dir = (fs::path(args.runs_dir) / "buffer").string();
    exporter::replay_buffer_merge(buffer_dir, records, args.iteration);
    const auto buffered = exporter::replay_buffer_load(buffer_dir);

    const double r = config.r_for_iteration(args.iteration);
    const auto credits =
        exporter::assign_credit_irft(buffered, r, config.per_task_grouping);
    const auto summary =
        exporter::export_dataset(buffered, credits, config, args.output_path);

    std::cout << "kept " << summary.trajectories_kept << "/" << summary.trajectories_total
              << " trajectories, " << summary.rows_emitted << " rows (R=" << r << "%)\n";
    for (const auto& warning : summary.warnings) std::cerr << "warning: " << warning << "\n";
    if (summary.rows_skipped > 0) return kExitWarnings;
    return kExitOk;
  } catch (const std::invalid_argument& e) {
    std::cerr << "setup error: " << e.what() << "\n";
    return kExitSetup;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitAborted;
  }
}

int cmd_report(const ReportArgs& args) {
  try {
    std::string log_path = args.run_dir;
    std::string urn_csv_path;
    if (fs::is_directory(log_path)) {
      const fs::path dir(log_path);
      log_path = (dir / "events.jsonl").string();
      if (fs::exists(dir / "urn_sweep.csv")) urn_csv_path = (dir / "urn_sweep.csv").string();
    }
    if (!fs::exists(log_path) && urn_csv_path.empty())
      throw std::invalid_argument("report: no events.jsonl at " + log_path);

    json j;
    if (fs::exists(log_path)) {
      const report::RunReport run_report = report::report_from_log_file(log_path);
      j = run_report.to_json();
    }
    if (!urn_csv_path.empty()) j["urn_sweep_csv"] = io::read_text_file(urn_csv_path);
    std::cout << j.dump(2) << "\n";
    if (!args.output_path.empty()) io::write_text_file(args.output_path, j.dump(2) + "\n");
    return kExitOk;
  } catch (const std::invalid_argument& e) {
    std::cerr << "setup error: " << e.what() << "\n";
    return kExitSetup;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitAborted;
  }
}

}  // namespace evoscale::cli
