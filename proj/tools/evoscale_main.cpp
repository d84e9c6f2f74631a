#include <CLI11.hpp>

#include "evoscale/cli/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"evoscale — evaluation-driven search engine"};
  app.require_subcommand(1);

  evoscale::cli::RunArgs run_args;
  auto* run = app.add_subcommand("run", "execute a search run from task/config files");
  run->add_option("--task", run_args.task_file, "task definition JSON")->required();
  run->add_option("--config", run_args.config_file, "run config JSON");
  run->add_option("--override", run_args.overrides, "key=value config override (repeatable)");
  run->add_option("--out", run_args.out_dir, "output directory");
  run->add_option("--seed", run_args.seed, "RNG seed");
  run->add_option("--restarts", run_args.restarts, "best-solution restarts");
  run->add_option("--mock-generator", run_args.mock_generator_script,
                  "scripted generator JSONL (instead of the HTTP endpoint)");
  run->add_option("--mock-evaluator", run_args.mock_evaluator_script,
                  "scripted evaluator JSONL (instead of the sandbox)");
  run->add_option("--resume", run_args.resume_checkpoint, "resume from a checkpoint file");
  run->add_flag("--live-log", run_args.live_log,
                "write events in arrival order instead of canonical order");

  evoscale::cli::SweepArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep", "run a (C,L,K) grid");
  sweep->add_option("--task", sweep_args.task_file, "task definition JSON")->required();
  sweep->add_option("--config", sweep_args.config_file, "run config JSON");
  sweep->add_option("--override", sweep_args.overrides, "key=value config override");
  sweep->add_option("--grid", sweep_args.grid, "grid points \"C,L,K;C,L,K;...\"")->required();
  sweep->add_option("--fixed-n", sweep_args.fixed_n,
                    "require C*L*K == N for every grid point");
  sweep->add_option("--out", sweep_args.out_dir, "output directory");
  sweep->add_option("--mock-generator", sweep_args.mock_generator_script,
                    "scripted generator JSONL");
  sweep->add_option("--mock-evaluator", sweep_args.mock_evaluator_script,
                    "scripted evaluator JSONL");

  evoscale::cli::SimulateArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "urn-model ensemble / allocation sweep");
  simulate->add_option("--config", sim_args.config_file, "urn config JSON");
  simulate->add_flag("--figure-preset", sim_args.figure_preset,
                     "steps=4096, beta=4, chains=32, sims=2048");
  simulate->add_option("--out", sim_args.out_dir, "output directory");
  simulate->add_option("--k-values", sim_args.k_values, "comma list of K values");
  simulate->add_option("--p-values", sim_args.p_values, "comma list of p values");
  simulate->add_option("--target", sim_args.target_score, "failure-rate target score");
  simulate->add_option("--threads", sim_args.threads, "simulation threads (0 = auto)");

  evoscale::cli::ExportArgs export_args;
  auto* exp = app.add_subcommand("export", "build a weighted training dataset from runs");
  exp->add_option("--runs", export_args.runs_dir, "directory of run outputs")->required();
  exp->add_option("--config", export_args.export_config_file, "export config JSON");
  exp->add_option("--buffer", export_args.buffer_dir, "replay buffer directory");
  exp->add_option("--out", export_args.output_path, "dataset JSONL path");
  exp->add_option("--iteration", export_args.iteration, "training iteration tag");
  exp->add_flag("--include-zero-weight", export_args.include_zero_weight,
                "emit rows with weight 0 as well");

  evoscale::cli::ReportArgs report_args;
  auto* report = app.add_subcommand("report", "recompute a run summary from its event log");
  report->add_option("run_dir", report_args.run_dir, "run directory or events.jsonl path")
      ->required();
  report->add_option("--out", report_args.output_path, "write report JSON here too");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return evoscale::cli::cmd_run(run_args);
  if (sweep->parsed()) return evoscale::cli::cmd_sweep(sweep_args);
  if (simulate->parsed()) return evoscale::cli::cmd_simulate(sim_args);
  if (exp->parsed()) return evoscale::cli::cmd_export(export_args);
  if (report->parsed()) return evoscale::cli::cmd_report(report_args);
  return evoscale::cli::kExitSetup;
}
