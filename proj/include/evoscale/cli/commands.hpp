#pragma once

#include <optional>
#include <string>
#include <vector>

namespace evoscale::cli {

// Stable exit codes, shared by every subcommand:
//   0  success
//   1  completed with warnings (export row skips)
//   2  setup/usage error (bad files, invalid config, missing evaluator)
//   3  aborted run / interrupted / corrupt inputs beyond tolerance
inline constexpr int kExitOk = 0;
inline constexpr int kExitWarnings = 1;
inline constexpr int kExitSetup = 2;
inline constexpr int kExitAborted = 3;

struct RunArgs {
  std::string task_file;
  std::string config_file;  // optional; defaults apply
  std::vector<std::string> overrides;
  std::string out_dir = "evoscale-out";
  std::optional<std::uint64_t> seed;
  std::optional<int> restarts;
  std::string mock_generator_script;  // JSONL; empty = real HTTP generator
  std::string mock_evaluator_script;  // JSONL; empty = sandboxed subprocess
  std::string resume_checkpoint;
  bool live_log = false;
};

int cmd_run(const RunArgs& args);

struct SweepArgs {
  std::string task_file;
  std::string config_file;
  std::vector<std::string> overrides;
  std::string grid;  // "C,L,K;C,L,K;..."
  std::optional<std::int64_t> fixed_n;
  std::string out_dir = "evoscale-out";
  std::string mock_generator_script;
  std::string mock_evaluator_script;
};

int cmd_sweep(const SweepArgs& args);

struct SimulateArgs {
  std::string config_file;  // urn config JSON; optional with --figure-preset
  bool figure_preset = false;
  std::string out_dir = "evoscale-out";
  std::string k_values;  // comma list; empty = default
  std::string p_values;  // comma list; empty = default
  std::optional<double> target_score;
  int threads = 0;
};

int cmd_simulate(const SimulateArgs& args);

struct ExportArgs {
  std::string runs_dir;
  std::string export_config_file;  // optional
  std::string buffer_dir;
  std::string output_path = "dataset.jsonl";
  int iteration = 1;
  bool include_zero_weight = false;
};

int cmd_export(const ExportArgs& args);

struct ReportArgs {
  std::string run_dir;  // directory containing events.jsonl, or the file itself
  std::string output_path;  // optional report.json destination
};

int cmd_report(const ReportArgs& args);

}  // namespace evoscale::cli
