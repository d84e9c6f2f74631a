#include "evoscale/io/config_io.hpp"

#include <filesystem>
#include <fstream>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace evoscale {

namespace fs = std::filesystem;
using nlohmann::json;

namespace core {

json task_to_json(const TaskSpec& task) {
  json evaluator = {
      {"command", task.evaluator.evaluator.command},
      {"args", task.evaluator.evaluator.args},
      {"timeout_s", task.evaluator.timeout_s},
      {"memory_limit_mb", task.evaluator.memory_limit_mb},
      {"isolation",
       task.evaluator.isolation == sandbox::Isolation::container ? "container" : "process"},
      {"network",
       task.evaluator.network == sandbox::NetworkPolicy::disabled ? "disabled" : "allowed"},
      {"workdir", task.evaluator.workdir},
      {"verify_abs_tol", task.evaluator.verify_abs_tol},
      {"verify_rel_tol", task.evaluator.verify_rel_tol},
  };
  if (!task.evaluator.verifier.empty()) {
    evaluator["verifier_command"] = task.evaluator.verifier.command;
    evaluator["verifier_args"] = task.evaluator.verifier.args;
  }
  if (!task.evaluator.container_image.empty())
    evaluator["container_image"] = task.evaluator.container_image;
  return json{
      {"task_id", task.task_id},
      {"instruction", task.instruction},
      {"initial_solution", task.initial_solution},
      {"evaluator", std::move(evaluator)},
      {"score_direction",
       task.score_direction == ScoreDirection::minimize ? "minimize" : "maximize"},
      {"solution_markers", task.solution_markers},
      {"artifacts", task.artifacts},
  };
}

namespace {

sandbox::EvaluatorSpec evaluator_from_json(const json& j) {
  sandbox::EvaluatorSpec spec;
  spec.evaluator.command = j.at("command").get<std::string>();
  spec.evaluator.args = j.value("args", std::vector<std::string>{});
  spec.timeout_s = j.value("timeout_s", spec.timeout_s);
  spec.memory_limit_mb = j.value("memory_limit_mb", spec.memory_limit_mb);
  const std::string isolation = j.value("isolation", "process");
  if (isolation == "container")
    spec.isolation = sandbox::Isolation::container;
  else if (isolation == "process")
    spec.isolation = sandbox::Isolation::process;
  else
    throw std::invalid_argument("evaluator.isolation: expected process|container");
  const std::string network = j.value("network", "allowed");
  if (network == "disabled")
    spec.network = sandbox::NetworkPolicy::disabled;
  else if (network == "allowed")
    spec.network = sandbox::NetworkPolicy::allowed;
  else
    throw std::invalid_argument("evaluator.network: expected disabled|allowed");
  spec.workdir = j.value("workdir", std::string());
  spec.container_image = j.value("container_image", std::string());
  if (j.contains("verifier_command")) {
    spec.verifier.command = j["verifier_command"].get<std::string>();
    spec.verifier.args = j.value("verifier_args", std::vector<std::string>{});
  }
  spec.verify_abs_tol = j.value("verify_abs_tol", spec.verify_abs_tol);
  spec.verify_rel_tol = j.value("verify_rel_tol", spec.verify_rel_tol);
  return spec;
}

}  // namespace

TaskSpec task_from_json(const json& j) {
  TaskSpec task;
  task.task_id = j.at("task_id").get<std::string>();
  task.instruction = j.at("instruction").get<std::string>();
  task.initial_solution = j.at("initial_solution").get<std::string>();
  task.evaluator = evaluator_from_json(j.at("evaluator"));
  const std::string direction = j.value("score_direction", "maximize");
  if (direction == "minimize")
    task.score_direction = ScoreDirection::minimize;
  else if (direction == "maximize")
    task.score_direction = ScoreDirection::maximize;
  else
    throw std::invalid_argument("score_direction: expected maximize|minimize");
  task.solution_markers = j.value("solution_markers", false);
  task.artifacts = j.value("artifacts", std::string());
  return task;
}

json config_to_json(const RunConfig& config) {
  json selector = {
      {"kind", selector_kind_name(config.selector.kind)},
      {"insp_count", config.selector.insp_count},
      {"lambda", config.selector.rpucg_lambda},
      {"gamma", config.selector.rpucg_gamma},
      {"elite_capacity", config.selector.elite_capacity},
      {"balance",
       {{"elite_fraction", config.selector.balance.elite_fraction},
        {"explore_lo_percentile", config.selector.balance.explore_lo_percentile},
        {"explore_hi_percentile", config.selector.balance.explore_hi_percentile},
        {"p_exploit", config.selector.balance.p_exploit},
        {"p_explore", config.selector.balance.p_explore}}},
  };
  json j = {
      {"C", config.global_width},
      {"L", config.depth_limit},
      {"K", config.local_k},
      {"selector", std::move(selector)},
      {"token_budget",
       {{"context_total", config.token_budget.context_total},
        {"program_max", config.token_budget.program_max},
        {"input_plus_reasoning_max", config.token_budget.input_plus_reasoning_max}}},
      {"restarts", config.restarts},
      {"rng_seed", config.rng_seed},
      {"dispatch",
       {{"mode", config.dispatch.mode == DispatchMode::streamed ? "streamed" : "batched"},
        {"max_unresolved", config.dispatch.max_unresolved_batches_per_trajectory}}},
      {"workers",
       {{"generation", config.workers.generation},
        {"evaluation", config.workers.evaluation},
        {"queue_capacity", config.workers.queue_capacity}}},
      {"features",
       {{"failure_patterns", config.features.failure_patterns},
        {"failure_top_k", config.features.failure_top_k},
        {"reflection", config.features.reflection},
        {"reflection_max_chars", config.features.reflection_max_chars}}},
      {"retry", {{"attempts", config.retry.attempts}, {"backoff_ms", config.retry.backoff_ms}}},
      {"max_transport_failures", config.max_transport_failures},
      {"checkpoint_every", config.checkpoint_every},
      {"temperature", config.temperature},
      {"reasoning_mode", config.reasoning_mode},
  };
  if (config.pruning) {
    json cutoffs = json::array();
    for (const auto& cutoff : config.pruning->cutoffs)
      cutoffs.push_back(
          {{"at_depth", cutoff.at_depth}, {"keep_fraction", cutoff.keep_fraction}});
    j["pruning"] = {{"cutoffs", std::move(cutoffs)}};
  }
  return j;
}

RunConfig config_from_json(const json& j) {
  RunConfig config;
  config.global_width = j.value("C", config.global_width);
  config.depth_limit = j.value("L", config.depth_limit);
  config.local_k = j.value("K", config.local_k);
  if (j.contains("selector")) {
    const auto& s = j["selector"];
    config.selector.kind = selector_kind_from_name(s.value("kind", "rpucg"));
    config.selector.insp_count = s.value("insp_count", config.selector.insp_count);
    config.selector.rpucg_lambda = s.value("lambda", config.selector.rpucg_lambda);
    config.selector.rpucg_gamma = s.value("gamma", config.selector.rpucg_gamma);
    config.selector.elite_capacity = s.value("elite_capacity", config.selector.elite_capacity);
    if (s.contains("balance")) {
      const auto& b = s["balance"];
      auto& tiers = config.selector.balance;
      tiers.elite_fraction = b.value("elite_fraction", tiers.elite_fraction);
      tiers.explore_lo_percentile = b.value("explore_lo_percentile", tiers.explore_lo_percentile);
      tiers.explore_hi_percentile = b.value("explore_hi_percentile", tiers.explore_hi_percentile);
      tiers.p_exploit = b.value("p_exploit", tiers.p_exploit);
      tiers.p_explore = b.value("p_explore", tiers.p_explore);
    }
  }
  if (j.contains("token_budget")) {
    const auto& t = j["token_budget"];
    config.token_budget.context_total = t.value("context_total", config.token_budget.context_total);
    config.token_budget.program_max = t.value("program_max", config.token_budget.program_max);
    config.token_budget.input_plus_reasoning_max =
        t.value("input_plus_reasoning_max", config.token_budget.input_plus_reasoning_max);
  }
  if (j.contains("pruning") && !j["pruning"].is_null()) {
    core::PruneSchedule schedule;
    for (const auto& c : j["pruning"].at("cutoffs"))
      schedule.cutoffs.push_back(
          {c.at("at_depth").get<int>(), c.at("keep_fraction").get<double>()});
    config.pruning = std::move(schedule);
  }
  config.restarts = j.value("restarts", config.restarts);
  config.rng_seed = j.value("rng_seed", config.rng_seed);
  if (j.contains("dispatch")) {
    const auto& d = j["dispatch"];
    const std::string mode = d.value("mode", "batched");
    if (mode == "streamed")
      config.dispatch.mode = DispatchMode::streamed;
    else if (mode == "batched")
      config.dispatch.mode = DispatchMode::batched;
    else
      throw std::invalid_argument("dispatch.mode: expected batched|streamed");
    config.dispatch.max_unresolved_batches_per_trajectory =
        d.value("max_unresolved", config.dispatch.max_unresolved_batches_per_trajectory);
  }
  if (j.contains("workers")) {
    const auto& w = j["workers"];
    config.workers.generation = w.value("generation", config.workers.generation);
    config.workers.evaluation = w.value("evaluation", config.workers.evaluation);
    config.workers.queue_capacity = w.value("queue_capacity", config.workers.queue_capacity);
  }
  if (j.contains("features")) {
    const auto& f = j["features"];
    config.features.failure_patterns =
        f.value("failure_patterns", config.features.failure_patterns);
    config.features.failure_top_k = f.value("failure_top_k", config.features.failure_top_k);
    config.features.reflection = f.value("reflection", config.features.reflection);
    config.features.reflection_max_chars =
        f.value("reflection_max_chars", config.features.reflection_max_chars);
  }
  if (j.contains("retry")) {
    config.retry.attempts = j["retry"].value("attempts", config.retry.attempts);
    config.retry.backoff_ms = j["retry"].value("backoff_ms", config.retry.backoff_ms);
  }
  config.max_transport_failures =
      j.value("max_transport_failures", config.max_transport_failures);
  config.checkpoint_every = j.value("checkpoint_every", config.checkpoint_every);
  config.temperature = j.value("temperature", config.temperature);
  config.reasoning_mode = j.value("reasoning_mode", config.reasoning_mode);
  return config;
}

}  // namespace core

namespace io {

json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open file: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open file: " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << content;
}

core::TaskSpec load_task_file(const std::string& path) {
  const json j = load_json_file(path);
  const fs::path base = fs::absolute(fs::path(path)).parent_path();
  auto resolve = [&](const std::string& p) {
    const fs::path fp(p);
    return fp.is_absolute() ? fp.string() : (base / fp).string();
  };

  json resolved = j;
  if (!resolved.contains("instruction")) {
    if (!resolved.contains("instruction_path"))
      throw std::invalid_argument("task: needs instruction or instruction_path");
    resolved["instruction"] =
        read_text_file(resolve(resolved["instruction_path"].get<std::string>()));
  }
  if (!resolved.contains("initial_solution")) {
    if (!resolved.contains("initial_solution_path"))
      throw std::invalid_argument("task: needs initial_solution_path");
    resolved["initial_solution"] =
        read_text_file(resolve(resolved["initial_solution_path"].get<std::string>()));
  }
  core::TaskSpec task = core::task_from_json(resolved);

  // evaluator children run inside fresh temp dirs, so task files reference
  // their own assets through {TASK_DIR}
  auto substitute = [&](std::string& text) {
    std::size_t pos;
    while ((pos = text.find("{TASK_DIR}")) != std::string::npos)
      text.replace(pos, std::strlen("{TASK_DIR}"), base.string());
  };
  substitute(task.evaluator.evaluator.command);
  substitute(task.evaluator.verifier.command);
  for (auto& arg : task.evaluator.evaluator.args) substitute(arg);
  for (auto& arg : task.evaluator.verifier.args) substitute(arg);
  substitute(task.evaluator.workdir);

  task.validate();
  return task;
}

core::RunConfig load_run_config_file(const std::string& path) {
  core::RunConfig config = core::config_from_json(load_json_file(path));
  config.validate();
  return config;
}

urn::UrnConfig urn_config_from_json(const json& j) {
  urn::UrnConfig config;
  config.dims = j.value("dims", config.dims);
  config.lambda = j.value("lambda", config.lambda);
  config.beta = j.value("beta", config.beta);
  config.steps = j.value("steps", config.steps);
  config.chains = j.value("chains", config.chains);
  config.local_k = j.value("local_k", config.local_k);
  config.improve_prob = j.value("improve_prob", config.improve_prob);
  config.num_sims = j.value("num_sims", config.num_sims);
  config.seed = j.value("seed", config.seed);
  config.validate();
  return config;
}

urn::UrnConfig load_urn_config_file(const std::string& path) {
  return urn_config_from_json(load_json_file(path));
}

namespace {

bool parse_bool(const std::string& value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw std::invalid_argument("override: expected boolean, got '" + value + "'");
}

}  // namespace

void apply_override(core::RunConfig& config, const std::string& key,
                    const std::string& value) {
  if (key == "C") config.global_width = std::stoi(value);
  else if (key == "L") config.depth_limit = std::stoi(value);
  else if (key == "K") config.local_k = std::stoi(value);
  else if (key == "seed") config.rng_seed = std::stoull(value);
  else if (key == "restarts") config.restarts = std::stoi(value);
  else if (key == "selector") config.selector.kind = core::selector_kind_from_name(value);
  else if (key == "insp_count") config.selector.insp_count = std::stoi(value);
  else if (key == "lambda") config.selector.rpucg_lambda = std::stod(value);
  else if (key == "gamma") config.selector.rpucg_gamma = std::stod(value);
  else if (key == "mode")
    config.dispatch.mode =
        value == "streamed" ? core::DispatchMode::streamed : core::DispatchMode::batched;
  else if (key == "max_unresolved")
    config.dispatch.max_unresolved_batches_per_trajectory = std::stoi(value);
  else if (key == "checkpoint_every") config.checkpoint_every = std::stoi(value);
  else if (key == "reflection") config.features.reflection = parse_bool(value);
  else if (key == "failure_patterns") config.features.failure_patterns = parse_bool(value);
  else if (key == "temperature") config.temperature = std::stod(value);
  else throw std::invalid_argument("override: unknown key '" + key + "'");
}

void apply_overrides(core::RunConfig& config,
                     const std::vector<std::string>& key_value_pairs) {
  for (const auto& pair : key_value_pairs) {
    const std::size_t eq = pair.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("override: expected key=value, got '" + pair + "'");
    apply_override(config, pair.substr(0, eq), pair.substr(eq + 1));
  }
}

}  // namespace io
}  // namespace evoscale
