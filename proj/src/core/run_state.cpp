#include "evoscale/core/run_state.hpp"

#include <algorithm>

#include "evoscale/io/config_io.hpp"

namespace evoscale::core {

using nlohmann::json;
using sandbox::ErrorClass;
using sandbox::EvalOutcome;

const char* run_status_name(RunStatus status) {
  switch (status) {
    case RunStatus::running: return "running";
    case RunStatus::finished: return "finished";
    case RunStatus::aborted: return "aborted";
    case RunStatus::interrupted: return "interrupted";
  }
  return "unknown";
}

RunState::RunState(TaskSpec task, RunConfig config, std::string run_id)
    : task_(std::move(task)), config_(std::move(config)), run_id_(std::move(run_id)) {
  task_.validate();
  config_.validate();
  trajectories_.resize(static_cast<std::size_t>(config_.global_width));
  elite_pools_.resize(static_cast<std::size_t>(config_.global_width));
  for (std::size_t c = 0; c < trajectories_.size(); ++c) {
    trajectories_[c].id = static_cast<TrajectoryId>(c);
    elite_pools_[c].capacity = static_cast<std::size_t>(config_.selector.elite_capacity);
  }
  ledger_.planned_evaluations = config_.planned_evaluations();
}

std::unique_ptr<RunState> RunState::init_run(TaskSpec task, RunConfig config,
                                             sandbox::Evaluator& evaluator,
                                             std::string run_id, EventLog* log) {
  task.validate();
  config.validate();
  auto state = std::make_unique<RunState>(std::move(task), std::move(config), run_id);

  // seed evaluation precedes the budgeted loop and is not charged against it
  EvalOutcome seed_outcome = evaluator.evaluate(state->task_.initial_solution);
  if (seed_outcome.failed())
    throw SetupError(std::string("initial solution failed evaluation (") +
                     sandbox::error_class_name(seed_outcome.error_class) +
                     "): " + seed_outcome.stderr_excerpt.substr(0, 200));

  Node seed;
  seed.id = kInitialNodeId;
  seed.trajectory = 0;  // shared by every trajectory
  seed.solution = state->task_.initial_solution;
  seed.score = state->task_.canonicalize(seed_outcome.canonical_score());
  seed.outcome = std::move(seed_outcome);
  seed.depth = 0;
  seed.committed = true;
  state->add_node(std::move(seed));
  state->best_id_ = kInitialNodeId;

  if (log) {
    log->append_global(run_id, EventKind::setup,
                       json{{"task_id", state->task_.task_id},
                            {"C", state->config_.global_width},
                            {"L", state->config_.depth_limit},
                            {"K", state->config_.local_k},
                            {"selector", selector_kind_name(state->config_.selector.kind)},
                            {"seed", state->config_.rng_seed},
                            {"planned_evaluations", state->ledger_.planned_evaluations},
                            {"initial_score", state->node(kInitialNodeId).score}},
                       kInitialNodeId);
  }
  return state;
}

NodeId RunState::add_node(Node node) {
  const NodeId id = node.id;
  const bool better =
      nodes_.empty() || node.score > nodes_.at(best_id_).score ||
      (node.score == nodes_.at(best_id_).score && id < best_id_);
  nodes_[id] = std::move(node);
  if (better) best_id_ = id;
  return id;
}

NodeId RunState::record_candidate(TrajectoryId trajectory, int depth,
                                  const CandidateOutcome& candidate,
                                  const std::vector<NodeId>& inspiration_parents) {
  Node node;
  node.id = node_ordinal(config_.global_width, config_.local_k, trajectory, depth,
                         candidate.k);
  node.trajectory = trajectory;
  node.solution = candidate.solution;
  node.outcome = candidate.outcome;
  node.score = candidate.outcome.failed()
                   ? sandbox::kSentinelWorstScore
                   : task_.canonicalize(candidate.outcome.canonical_score());
  node.depth = depth;
  node.k = candidate.k;
  node.inspiration_parents = inspiration_parents;
  return add_node(std::move(node));
}

NodeId RunState::commit_local_best(TrajectoryId trajectory,
                                   const std::vector<CandidateOutcome>& batch,
                                   const std::vector<NodeId>& inspiration_parents) {
  Trajectory& traj = trajectories_.at(trajectory);
  if (!traj.active()) throw std::logic_error("commit on a non-active trajectory");
  if (traj.depth >= config_.depth_limit)
    throw std::logic_error("commit beyond depth limit");
  if (batch.size() != static_cast<std::size_t>(config_.local_k))
    throw std::logic_error("commit requires exactly K batch entries");

  const int depth = traj.depth + 1;
  // every outcome is logged as a node even though only one is committed
  std::vector<NodeId> ids;
  ids.reserve(batch.size());
  for (const auto& candidate : batch)
    ids.push_back(record_candidate(trajectory, depth, candidate, inspiration_parents));

  // argmax with lowest-batch-index tie-break; an all-failed batch degrades to
  // its first entry since every sentinel score ties
  std::size_t best_k = 0;
  for (std::size_t i = 1; i < batch.size(); ++i) {
    if (nodes_.at(ids[i]).score > nodes_.at(ids[best_k]).score) best_k = i;
  }

  Node& committed = nodes_.at(ids[best_k]);
  committed.committed = true;
  traj.committed.push_back(committed.id);
  traj.depth = depth;
  ++total_commits_;
  if (traj.depth >= config_.depth_limit) traj.status = TrajectoryStatus::finished;
  return committed.id;
}

const Node& RunState::best_overall() const {
  if (nodes_.empty()) throw std::logic_error("best_overall on an empty run");
  return nodes_.at(best_id_);
}

std::vector<const Node*> RunState::history_view(TrajectoryId trajectory) const {
  const Trajectory& traj = trajectories_.at(trajectory);
  std::vector<const Node*> view;
  view.reserve(traj.committed.size() + 1);
  view.push_back(&nodes_.at(kInitialNodeId));
  for (NodeId id : traj.committed) view.push_back(&nodes_.at(id));
  return view;
}

const Node& RunState::node(NodeId id) const { return nodes_.at(id); }
Node& RunState::node(NodeId id) { return nodes_.at(id); }

double RunState::trajectory_current_score(TrajectoryId id) const {
  const Trajectory& traj = trajectories_.at(id);
  double best = nodes_.at(kInitialNodeId).score;
  for (NodeId node_id : traj.committed) best = std::max(best, nodes_.at(node_id).score);
  return best;
}

namespace {

json outcome_to_json(const EvalOutcome& o) {
  json j = {{"error_class", sandbox::error_class_name(o.error_class)},
            {"wall_time_s", o.wall_time_s},
            {"verifier_ran", o.verifier_ran},
            {"synthetic", o.synthetic}};
  if (o.reported_score) j["reported_score"] = *o.reported_score;
  if (o.verified_score) j["verified_score"] = *o.verified_score;
  if (!o.stderr_excerpt.empty()) j["stderr_excerpt"] = o.stderr_excerpt;
  return j;
}

EvalOutcome outcome_from_json(const json& j) {
  EvalOutcome o;
  o.error_class = sandbox::error_class_from_name(j.at("error_class").get<std::string>());
  o.wall_time_s = j.value("wall_time_s", 0.0);
  o.verifier_ran = j.value("verifier_ran", false);
  o.synthetic = j.value("synthetic", false);
  if (j.contains("reported_score")) o.reported_score = j["reported_score"].get<double>();
  if (j.contains("verified_score")) o.verified_score = j["verified_score"].get<double>();
  o.stderr_excerpt = j.value("stderr_excerpt", std::string());
  return o;
}

}  // namespace

json RunState::snapshot() const {
  json nodes = json::array();
  for (const auto& [id, node] : nodes_) {
    json n = {{"id", node.id},
              {"trajectory", node.trajectory},
              {"solution", node.solution},
              {"score", node.score},
              {"outcome", outcome_to_json(node.outcome)},
              {"depth", node.depth},
              {"k", node.k},
              {"inspiration_parents", node.inspiration_parents},
              {"selection_count", node.selection_count},
              {"committed", node.committed}};
    if (node.reflection) n["reflection"] = *node.reflection;
    nodes.push_back(std::move(n));
  }
  json trajectories = json::array();
  for (const auto& traj : trajectories_) {
    json failures = json::array();
    for (const auto& [sig, entry] : traj.memory.failures.counts())
      failures.push_back(
          {{"signature", sig}, {"count", entry.count}, {"first_seen", entry.first_seen}});
    trajectories.push_back({{"id", traj.id},
                            {"committed", traj.committed},
                            {"depth", traj.depth},
                            {"status", trajectory_status_name(traj.status)},
                            {"failures", std::move(failures)}});
  }
  json pools = json::array();
  for (const auto& pool : elite_pools_) {
    json entries = json::array();
    for (const auto& e : pool.entries)
      entries.push_back(
          {{"node_id", e.node_id}, {"score", e.score}, {"summary", e.summary}});
    pools.push_back(std::move(entries));
  }
  return json{{"format", "evoscale-checkpoint-v1"},
              {"run_id", run_id_},
              {"task", task_to_json(task_)},
              {"config", config_to_json(config_)},
              {"status", run_status_name(status_)},
              {"ledger",
               {{"planned", ledger_.planned_evaluations},
                {"consumed_evaluations", ledger_.consumed_evaluations},
                {"consumed_generations", ledger_.consumed_generations}}},
              {"total_commits", total_commits_},
              {"applied_prune_cutoffs", applied_prune_cutoffs_},
              {"best_id", best_id_},
              {"nodes", std::move(nodes)},
              {"trajectories", std::move(trajectories)},
              {"elite_pools", std::move(pools)}};
}

std::unique_ptr<RunState> RunState::restore(const json& snapshot) {
  if (snapshot.value("format", "") != "evoscale-checkpoint-v1")
    throw std::invalid_argument("checkpoint: unrecognized format tag");
  TaskSpec task = task_from_json(snapshot.at("task"));
  RunConfig config = config_from_json(snapshot.at("config"));
  auto state = std::make_unique<RunState>(std::move(task), std::move(config),
                                          snapshot.at("run_id").get<std::string>());
  const auto& ledger = snapshot.at("ledger");
  state->ledger_.planned_evaluations = ledger.at("planned").get<std::int64_t>();
  state->ledger_.consumed_evaluations = ledger.at("consumed_evaluations").get<std::int64_t>();
  state->ledger_.consumed_generations = ledger.at("consumed_generations").get<std::int64_t>();
  state->total_commits_ = snapshot.at("total_commits").get<std::int64_t>();
  state->applied_prune_cutoffs_ = snapshot.value("applied_prune_cutoffs", 0);

  for (const auto& n : snapshot.at("nodes")) {
    Node node;
    node.id = n.at("id").get<NodeId>();
    node.trajectory = n.at("trajectory").get<TrajectoryId>();
    node.solution = n.at("solution").get<std::string>();
    node.score = n.at("score").get<double>();
    node.outcome = outcome_from_json(n.at("outcome"));
    node.depth = n.at("depth").get<int>();
    node.k = n.at("k").get<int>();
    node.inspiration_parents = n.at("inspiration_parents").get<std::vector<NodeId>>();
    node.selection_count = n.at("selection_count").get<std::uint64_t>();
    node.committed = n.at("committed").get<bool>();
    if (n.contains("reflection")) node.reflection = n["reflection"].get<std::string>();
    state->nodes_[node.id] = std::move(node);
  }
  for (const auto& t : snapshot.at("trajectories")) {
    const auto id = t.at("id").get<TrajectoryId>();
    Trajectory& traj = state->trajectories_.at(id);
    traj.committed = t.at("committed").get<std::vector<NodeId>>();
    traj.depth = t.at("depth").get<int>();
    const std::string status = t.at("status").get<std::string>();
    traj.status = status == "active" ? TrajectoryStatus::active
                  : status == "pruned" ? TrajectoryStatus::pruned
                                       : TrajectoryStatus::finished;
    for (const auto& f : t.at("failures")) {
      auto& entry = traj.memory.failures.counts()[f.at("signature").get<std::string>()];
      entry.count = f.at("count").get<std::uint64_t>();
      entry.first_seen = f.at("first_seen").get<std::uint64_t>();
    }
  }
  const auto& pools = snapshot.at("elite_pools");
  for (std::size_t c = 0; c < state->elite_pools_.size() && c < pools.size(); ++c) {
    for (const auto& e : pools[c]) {
      selection::EliteEntry entry;
      entry.node_id = e.at("node_id").get<std::uint64_t>();
      entry.score = e.at("score").get<double>();
      entry.summary = e.at("summary").get<std::string>();
      state->elite_pools_[c].entries.push_back(std::move(entry));
    }
  }
  state->best_id_ = snapshot.at("best_id").get<NodeId>();
  state->status_ = RunStatus::running;
  return state;
}

}  // namespace evoscale::core
