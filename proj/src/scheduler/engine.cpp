#include "evoscale/scheduler/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>
#include <variant>

#include "evoscale/gateway/extract.hpp"
#include "evoscale/io/config_io.hpp"
#include "evoscale/rng.hpp"
#include "evoscale/sandbox/failure_patterns.hpp"
#include "evoscale/sandbox/reflection.hpp"
#include "evoscale/scheduler/queues.hpp"
#include "evoscale/selection/proposal.hpp"
#include "evoscale/selection/selector.hpp"

namespace evoscale::scheduler {

using core::CandidateOutcome;
using core::EventKind;
using core::EventLog;
using core::Node;
using core::NodeId;
using core::RunState;
using core::TrajectoryId;
using nlohmann::json;
using sandbox::ErrorClass;
using sandbox::EvalOutcome;

namespace {

enum class GenPurpose { proposal, reflection, elite_decision };

const char* purpose_name(GenPurpose p) {
  switch (p) {
    case GenPurpose::proposal: return "proposal";
    case GenPurpose::reflection: return "reflection";
    case GenPurpose::elite_decision: return "elite_decision";
  }
  return "unknown";
}

struct GenJob {
  GenPurpose purpose = GenPurpose::proposal;
  TrajectoryId trajectory = 0;
  int depth = 0;
  int slot_begin = 0;
  int slot_count = 0;
  gateway::GeneratorRequest request;
};

struct EvalJob {
  TrajectoryId trajectory = 0;
  int depth = 0;
  int k = 0;
  std::string solution;
};

struct GenDone {
  GenPurpose purpose = GenPurpose::proposal;
  TrajectoryId trajectory = 0;
  int depth = 0;
  int slot_begin = 0;
  int slot_count = 0;
  gateway::GenResult result;
};

struct EvalDone {
  TrajectoryId trajectory = 0;
  int depth = 0;
  int k = 0;
  EvalOutcome outcome;
};

using Message = std::variant<GenDone, EvalDone>;

enum class BatchPhase { collecting, awaiting_followup, done };

struct PendingBatch {
  int depth = 0;
  std::string prompt;
  std::string prompt_hash;
  std::vector<NodeId> inspirations;
  std::vector<CandidateOutcome> slots;
  std::vector<bool> slot_resolved;
  int unresolved_slots = 0;
  int outstanding_requests = 0;
  BatchPhase phase = BatchPhase::collecting;
  NodeId committed_node = 0;
  bool reflection_pending = false;
  bool elite_pending = false;

  // staged per-batch events, emitted in canonical slot order at resolution
  std::vector<std::pair<int, json>> staged_responses;  // slot_begin -> payload
  std::vector<json> staged_eval_start;                 // per k, null when synthetic
  std::vector<json> staged_eval_done;                  // per k

  bool collected() const {
    return phase == BatchPhase::collecting && unresolved_slots == 0 &&
           outstanding_requests == 0;
  }
};

struct TrajRuntime {
  std::deque<PendingBatch> open;
};

void write_checkpoint(const RunState& state, const std::string& path) {
  if (path.empty()) return;
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << state.snapshot().dump() << '\n';
  }
  std::filesystem::rename(tmp, path);
}

class Coordinator {
 public:
  Coordinator(RunState& state, std::shared_ptr<gateway::Generator> generator,
              std::shared_ptr<sandbox::Evaluator> evaluator, const EngineOptions& options,
              std::atomic<bool>& stop_flag)
      : state_(state),
        options_(options),
        stop_flag_(stop_flag),
        evaluator_(std::move(evaluator)),
        gateway_(std::move(generator), state.config().token_budget, state.config().retry),
        gen_queue_(queue_capacity(state.config().workers.generation,
                                  state.config().workers.queue_capacity)),
        eval_queue_(queue_capacity(state.config().workers.evaluation,
                                   state.config().workers.queue_capacity)),
        inbox_(1u << 20) {
    runtimes_.resize(state_.trajectories().size());
  }

  NodeId run();

 private:
  static std::size_t queue_capacity(int workers, int configured) {
    if (configured > 0) return static_cast<std::size_t>(configured);
    return static_cast<std::size_t>(workers) * 2;
  }

  const core::RunConfig& config() const { return state_.config(); }
  EventLog* log() { return options_.log; }

  std::uint64_t batch_rng_key(TrajectoryId c, int depth) const {
    return derive_seed(derive_seed(config().rng_seed, c), static_cast<std::uint64_t>(depth));
  }

  // ---- dispatch ----------------------------------------------------------

  bool barrier_pending() const {
    const auto& pruning = config().pruning;
    return pruning && state_.applied_prune_cutoffs() <
                          static_cast<int>(pruning->cutoffs.size());
  }

  const core::PruneCutoff* next_cutoff() const {
    if (!barrier_pending()) return nullptr;
    return &config().pruning->cutoffs[static_cast<std::size_t>(
        state_.applied_prune_cutoffs())];
  }

  void try_dispatch_all() {
    for (TrajectoryId c = 0; c < static_cast<TrajectoryId>(runtimes_.size()); ++c)
      try_dispatch(c);
    maybe_apply_prune();
  }

  void try_dispatch(TrajectoryId c) {
    if (draining()) return;
    auto& traj = state_.trajectory(c);
    auto& runtime = runtimes_[c];
    while (traj.active() &&
           static_cast<int>(runtime.open.size()) <
               config().dispatch.max_unresolved_batches_per_trajectory) {
      const int target_depth = traj.depth + static_cast<int>(runtime.open.size()) + 1;
      if (target_depth > config().depth_limit) break;
      if (const auto* cutoff = next_cutoff(); cutoff && target_depth > cutoff->at_depth)
        break;  // hold at the prune barrier
      dispatch_batch(c, target_depth);
    }
  }

  void dispatch_batch(TrajectoryId c, int depth);

  // ---- message handling --------------------------------------------------

  void handle(GenDone&& msg);
  void handle(EvalDone&& msg);

  PendingBatch* find_batch(TrajectoryId c, int depth) {
    for (auto& batch : runtimes_[c].open)
      if (batch.depth == depth) return &batch;
    return nullptr;
  }

  void fill_synthetic(PendingBatch& batch, int k, ErrorClass ec, std::string why) {
    if (batch.slot_resolved[static_cast<std::size_t>(k)]) return;
    auto& slot = batch.slots[static_cast<std::size_t>(k)];
    slot.outcome = EvalOutcome::failure(ec, std::move(why), /*synthetic=*/true);
    batch.slot_resolved[static_cast<std::size_t>(k)] = true;
    --batch.unresolved_slots;
    batch.staged_eval_done[static_cast<std::size_t>(k)] =
        eval_done_payload(batch.depth, k, slot.outcome, /*score=*/std::nullopt);
  }

  static json eval_done_payload(int depth, int k, const EvalOutcome& outcome,
                                std::optional<double> canonical_score) {
    json payload = {{"depth", depth},
                    {"k", k},
                    {"error_class", sandbox::error_class_name(outcome.error_class)},
                    {"synthetic", outcome.synthetic},
                    {"wall_time_s", outcome.wall_time_s}};
    if (canonical_score) payload["score"] = *canonical_score;
    if (outcome.verifier_ran) payload["verified"] = true;
    return payload;
  }

  void resolve_ready(TrajectoryId c);
  void commit_front(TrajectoryId c);
  void start_followups(TrajectoryId c, PendingBatch& batch);
  void maybe_apply_prune();
  void maybe_checkpoint();

  bool draining() const { return stop_flag_.load() || aborting_; }

  bool work_outstanding() const {
    for (const auto& runtime : runtimes_)
      if (!runtime.open.empty()) return true;
    return false;
  }

  // ---- members -----------------------------------------------------------

  RunState& state_;
  EngineOptions options_;
  std::atomic<bool>& stop_flag_;
  std::shared_ptr<sandbox::Evaluator> evaluator_;
  gateway::Gateway gateway_;
  BoundedQueue<GenJob> gen_queue_;
  BoundedQueue<EvalJob> eval_queue_;
  BoundedQueue<Message> inbox_;
  std::vector<TrajRuntime> runtimes_;
  int transport_streak_ = 0;
  bool aborting_ = false;
  std::string abort_reason_;
  std::int64_t commits_since_checkpoint_ = 0;
};

void Coordinator::dispatch_batch(TrajectoryId c, int depth) {
  const auto& cfg = config();
  const selection::HistoryView view = state_.history_view(c);
  CounterRng rng(batch_rng_key(c, depth));

  // pick inspirations under the configured policy
  std::vector<NodeId> picked_ids;
  switch (cfg.selector.kind) {
    case core::SelectorKind::rpucg: {
      for (std::size_t i : selection::select_inspirations_rpucg(view, cfg.selector))
        picked_ids.push_back(view[i]->id);
      break;
    }
    case core::SelectorKind::balance: {
      for (std::size_t i : selection::select_inspirations_balance(
               view, cfg.selector.insp_count, cfg.selector.balance, rng))
        picked_ids.push_back(view[i]->id);
      break;
    }
    case core::SelectorKind::random_uniform: {
      for (std::size_t i :
           selection::select_inspirations_random(view, cfg.selector.insp_count, rng))
        picked_ids.push_back(view[i]->id);
      break;
    }
    case core::SelectorKind::llm_elite: {
      const auto& pool = state_.elite_pool(c);
      if (pool.empty()) {
        // nothing curated yet; fall back to the best historical node
        const Node* best = view.front();
        for (const Node* n : view)
          if (n->score > best->score) best = n;
        picked_ids.push_back(best->id);
      } else {
        picked_ids = selection::select_inspirations_elite(pool, cfg.selector.insp_count,
                                                          cfg.selector.balance, rng);
      }
      break;
    }
  }
  for (NodeId id : picked_ids) ++state_.node(id).selection_count;

  std::vector<selection::InspirationEntry> inspirations;
  inspirations.reserve(picked_ids.size());
  for (NodeId id : picked_ids) {
    const Node& node = state_.node(id);
    selection::InspirationEntry entry;
    entry.node_id = node.id;
    entry.solution = node.solution;
    entry.score = node.score;
    entry.failed = node.failed();
    entry.metadata_summary = node.failed()
                                 ? sandbox::failure_signature(node.outcome)
                                 : (node.outcome.verifier_ran ? "evaluated ok (verified)"
                                                              : "evaluated ok");
    entry.reflection = node.reflection;
    inspirations.push_back(std::move(entry));
  }

  selection::ProposalBundle bundle = selection::build_proposal(
      state_.task(), std::move(inspirations), state_.trajectory(c).memory, cfg.features);
  if (cfg.selector.kind == core::SelectorKind::llm_elite) {
    std::ostringstream overview;
    overview.precision(12);
    const auto& pool = state_.elite_pool(c);
    for (std::size_t i = 0; i < pool.entries.size(); ++i)
      overview << "[" << i << "] score=" << pool.entries[i].score << " "
               << pool.entries[i].summary << "\n";
    bundle.signals.elite_pool_overview = overview.str();
  }
  const std::string prompt = selection::render_proposal(bundle);
  const std::string hash = gateway::prompt_hash_hex(prompt);

  PendingBatch batch;
  batch.depth = depth;
  batch.prompt = prompt;
  batch.prompt_hash = hash;
  batch.inspirations = picked_ids;
  batch.slots.resize(static_cast<std::size_t>(cfg.local_k));
  for (int k = 0; k < cfg.local_k; ++k) batch.slots[static_cast<std::size_t>(k)].k = k;
  batch.slot_resolved.assign(static_cast<std::size_t>(cfg.local_k), false);
  batch.unresolved_slots = cfg.local_k;
  batch.staged_eval_start.resize(static_cast<std::size_t>(cfg.local_k));
  batch.staged_eval_done.resize(static_cast<std::size_t>(cfg.local_k));

  const bool streamed = cfg.dispatch.mode == core::DispatchMode::streamed;
  const int request_count = streamed ? cfg.local_k : 1;
  const int samples_per_request = streamed ? 1 : cfg.local_k;
  batch.outstanding_requests = request_count;
  runtimes_[c].open.push_back(std::move(batch));

  for (int r = 0; r < request_count; ++r) {
    GenJob job;
    job.purpose = GenPurpose::proposal;
    job.trajectory = c;
    job.depth = depth;
    job.slot_begin = streamed ? r : 0;
    job.slot_count = samples_per_request;
    job.request.rendered_prompt = prompt;
    job.request.sample_count = samples_per_request;
    job.request.temperature = cfg.temperature;
    job.request.reasoning_mode = cfg.reasoning_mode;
    // slot offset keeps batched and streamed dispatch seed-identical per slot
    job.request.sampling_seed =
        derive_seed(batch_rng_key(c, depth), 1000) + static_cast<std::uint64_t>(job.slot_begin);
    if (log())
      log()->append(state_.run_id(), EventKind::gen_request, c,
                    json{{"purpose", "proposal"},
                         {"depth", depth},
                         {"mode", streamed ? "streamed" : "batched"},
                         {"sample_count", samples_per_request},
                         {"slot_begin", job.slot_begin},
                         {"prompt", prompt},
                         {"prompt_hash", hash},
                         {"inspirations", picked_ids}});
    gen_queue_.push(std::move(job));
  }
}

void Coordinator::handle(GenDone&& msg) {
  ++state_.ledger().consumed_generations;

  if (msg.result.error == gateway::GenErrorKind::transport) {
    ++transport_streak_;
    if (transport_streak_ >= config().max_transport_failures && !aborting_) {
      aborting_ = true;
      abort_reason_ = "generator unreachable: " + msg.result.message;
    }
  } else {
    transport_streak_ = 0;
  }

  if (msg.purpose != GenPurpose::proposal) {
    // reflection / elite follow-ups
    PendingBatch* batch = find_batch(msg.trajectory, msg.depth);
    if (log())
      log()->append(state_.run_id(), EventKind::gen_response, msg.trajectory,
                    json{{"purpose", purpose_name(msg.purpose)},
                         {"depth", msg.depth},
                         {"candidates_returned",
                          static_cast<int>(msg.result.response.candidates.size())},
                         {"ok", msg.result.ok()}});
    if (!batch) return;
    if (msg.purpose == GenPurpose::reflection) {
      batch->reflection_pending = false;
      if (msg.result.ok() && !msg.result.response.candidates.empty()) {
        std::string text = msg.result.response.candidates.front();
        const int cap = config().features.reflection_max_chars;
        if (cap > 0 && text.size() > static_cast<std::size_t>(cap))
          text.resize(static_cast<std::size_t>(cap));
        state_.node(batch->committed_node).reflection = std::move(text);
      }
    } else {
      batch->elite_pending = false;
      std::optional<selection::EliteDecision> decision;
      if (msg.result.ok() && !msg.result.response.candidates.empty())
        decision = selection::parse_elite_decision(msg.result.response.candidates.front());
      const Node& committed = state_.node(batch->committed_node);
      selection::EliteEntry candidate;
      candidate.node_id = committed.id;
      candidate.score = committed.score;
      candidate.summary = committed.reflection.value_or(
          committed.solution.substr(0, std::min<std::size_t>(committed.solution.size(), 120)));
      auto provider = [&decision](const selection::EliteEntry&,
                                  const std::vector<selection::EliteEntry>&) {
        return decision;
      };
      state_.elite_pool(msg.trajectory) =
          selection::elite_pool_update(state_.elite_pool(msg.trajectory), candidate, provider);
    }
    if (batch->phase == BatchPhase::awaiting_followup && !batch->reflection_pending &&
        !batch->elite_pending) {
      batch->phase = BatchPhase::done;
      resolve_ready(msg.trajectory);
    }
    return;
  }

  PendingBatch* batch = find_batch(msg.trajectory, msg.depth);
  if (!batch) return;  // stale message (should not happen)
  --batch->outstanding_requests;

  json response_payload = {
      {"purpose", "proposal"},
      {"depth", msg.depth},
      {"slot_begin", msg.slot_begin},
      {"candidates_returned", static_cast<int>(msg.result.response.candidates.size())},
      {"prompt_tokens", msg.result.response.usage.prompt_tokens}};
  if (!msg.result.ok()) response_payload["error"] = msg.result.message;
  batch->staged_responses.emplace_back(msg.slot_begin, std::move(response_payload));

  const auto& task = state_.task();
  for (int i = 0; i < msg.slot_count; ++i) {
    const int k = msg.slot_begin + i;
    if (!msg.result.ok()) {
      fill_synthetic(*batch, k, ErrorClass::malformed_output,
                     "generation failed: " + msg.result.message);
      continue;
    }
    if (i >= static_cast<int>(msg.result.response.candidates.size())) {
      fill_synthetic(*batch, k, ErrorClass::malformed_output,
                     "generation shortfall: candidate missing");
      continue;
    }
    const std::string& raw = msg.result.response.candidates[static_cast<std::size_t>(i)];
    auto& slot = batch->slots[static_cast<std::size_t>(k)];
    slot.candidate_text = raw;
    const gateway::ExtractResult extracted =
        gateway::extract_solution(raw, task.solution_markers);
    if (!extracted.ok) {
      fill_synthetic(*batch, k, ErrorClass::malformed_output, extracted.error);
      continue;
    }
    slot.solution = extracted.solution;
    batch->staged_eval_start[static_cast<std::size_t>(k)] =
        json{{"depth", msg.depth}, {"k", k}};
    EvalJob job;
    job.trajectory = msg.trajectory;
    job.depth = msg.depth;
    job.k = k;
    job.solution = slot.solution;
    eval_queue_.push(std::move(job));
  }
  resolve_ready(msg.trajectory);
}

void Coordinator::handle(EvalDone&& msg) {
  ++state_.ledger().consumed_evaluations;
  PendingBatch* batch = find_batch(msg.trajectory, msg.depth);
  if (!batch) return;
  auto& slot = batch->slots[static_cast<std::size_t>(msg.k)];
  slot.outcome = std::move(msg.outcome);
  batch->slot_resolved[static_cast<std::size_t>(msg.k)] = true;
  --batch->unresolved_slots;
  std::optional<double> score;
  if (!slot.outcome.failed())
    score = state_.task().canonicalize(slot.outcome.canonical_score());
  batch->staged_eval_done[static_cast<std::size_t>(msg.k)] =
      eval_done_payload(msg.depth, msg.k, slot.outcome, score);
  resolve_ready(msg.trajectory);
}

void Coordinator::resolve_ready(TrajectoryId c) {
  auto& runtime = runtimes_[c];
  while (!runtime.open.empty()) {
    PendingBatch& front = runtime.open.front();
    if (front.collected()) commit_front(c);
    if (runtime.open.front().phase != BatchPhase::done) break;
    runtime.open.pop_front();
    maybe_checkpoint();
    try_dispatch(c);
  }
  maybe_apply_prune();
}

void Coordinator::commit_front(TrajectoryId c) {
  auto& runtime = runtimes_[c];
  PendingBatch& batch = runtime.open.front();

  const NodeId committed = state_.commit_local_best(c, batch.slots, batch.inspirations);
  batch.committed_node = committed;
  ++commits_since_checkpoint_;

  if (log()) {
    std::sort(batch.staged_responses.begin(), batch.staged_responses.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [slot_begin, payload] : batch.staged_responses)
      log()->append(state_.run_id(), EventKind::gen_response, c, std::move(payload));
    for (int k = 0; k < config().local_k; ++k) {
      auto& start = batch.staged_eval_start[static_cast<std::size_t>(k)];
      if (!start.is_null())
        log()->append(state_.run_id(), EventKind::eval_start, c, std::move(start),
                      core::node_ordinal(config().global_width, config().local_k, c,
                                         batch.depth, k));
      log()->append(state_.run_id(), EventKind::eval_done, c,
                    std::move(batch.staged_eval_done[static_cast<std::size_t>(k)]),
                    core::node_ordinal(config().global_width, config().local_k, c,
                                       batch.depth, k));
    }
    const Node& node = state_.node(committed);
    json commit_payload = {{"depth", batch.depth},
                           {"k", node.k},
                           {"error_class", sandbox::error_class_name(node.outcome.error_class)},
                           {"response_text", batch.slots[static_cast<std::size_t>(node.k)].candidate_text},
                           {"inspiration_parents", batch.inspirations},
                           {"prompt_hash", batch.prompt_hash}};
    if (!node.failed()) commit_payload["score"] = node.score;
    log()->append(state_.run_id(), EventKind::commit, c, std::move(commit_payload),
                  committed);
  }

  // chain-local memory update
  if (config().features.failure_patterns) {
    auto& memory = state_.trajectory(c).memory;
    for (const auto& slot : batch.slots)
      memory.failures.record(slot.outcome,
                             core::node_ordinal(config().global_width, config().local_k, c,
                                                batch.depth, slot.k));
  }

  start_followups(c, batch);
}

void Coordinator::start_followups(TrajectoryId c, PendingBatch& batch) {
  const Node& committed = state_.node(batch.committed_node);
  const bool failed = committed.failed();
  batch.phase = BatchPhase::done;
  if (draining()) return;

  if (config().features.reflection && !failed) {
    batch.reflection_pending = true;
    batch.phase = BatchPhase::awaiting_followup;
    GenJob job;
    job.purpose = GenPurpose::reflection;
    job.trajectory = c;
    job.depth = batch.depth;
    job.request.rendered_prompt = sandbox::reflection_prompt(
        state_.task().instruction, committed.solution, committed.score);
    job.request.sample_count = 1;
    job.request.temperature = 0.2;
    job.request.sampling_seed = derive_seed(batch_rng_key(c, batch.depth), 2000);
    if (log())
      log()->append(state_.run_id(), EventKind::gen_request, c,
                    json{{"purpose", "reflection"},
                         {"depth", batch.depth},
                         {"sample_count", 1},
                         {"prompt_hash", gateway::prompt_hash_hex(job.request.rendered_prompt)}});
    gen_queue_.push(std::move(job));
  }

  if (config().selector.kind == core::SelectorKind::llm_elite && !failed) {
    batch.elite_pending = true;
    batch.phase = BatchPhase::awaiting_followup;
    const auto& pool = state_.elite_pool(c);
    std::ostringstream prompt;
    prompt.precision(12);
    prompt << "You curate a bounded pool (capacity " << pool.capacity
           << ") of elite solutions, balancing quality and methodological diversity.\n"
           << "Current pool:\n";
    if (pool.empty()) prompt << "(empty)\n";
    for (std::size_t i = 0; i < pool.entries.size(); ++i)
      prompt << "[" << i << "] score=" << pool.entries[i].score << " "
             << pool.entries[i].summary << "\n";
    prompt << "Candidate: score=" << committed.score << " "
           << committed.solution.substr(0, 200) << "\n"
           << "Reply with exactly one line: ADD or REPLACE <index> or REJECT.\n";
    GenJob job;
    job.purpose = GenPurpose::elite_decision;
    job.trajectory = c;
    job.depth = batch.depth;
    job.request.rendered_prompt = prompt.str();
    job.request.sample_count = 1;
    job.request.temperature = 0.0;
    job.request.sampling_seed = derive_seed(batch_rng_key(c, batch.depth), 3000);
    if (log())
      log()->append(state_.run_id(), EventKind::gen_request, c,
                    json{{"purpose", "elite_decision"},
                         {"depth", batch.depth},
                         {"sample_count", 1},
                         {"prompt_hash", gateway::prompt_hash_hex(job.request.rendered_prompt)}});
    gen_queue_.push(std::move(job));
  }
}

void Coordinator::maybe_apply_prune() {
  const core::PruneCutoff* cutoff = next_cutoff();
  if (!cutoff || draining()) return;
  int active = 0;
  for (const auto& traj : state_.trajectories()) {
    if (!traj.active()) continue;
    ++active;
    if (traj.depth < cutoff->at_depth) return;
  }
  if (active == 0) return;
  for (const auto& runtime : runtimes_)
    if (!runtime.open.empty()) return;  // barrier: wait out in-flight batches

  apply_prune(state_, *cutoff, log());
  try_dispatch_all();
}

void Coordinator::maybe_checkpoint() {
  if (options_.checkpoint_path.empty() || config().checkpoint_every <= 0) return;
  if (commits_since_checkpoint_ < config().checkpoint_every) return;
  commits_since_checkpoint_ = 0;
  write_checkpoint(state_, options_.checkpoint_path);
}

NodeId Coordinator::run() {
  const auto& cfg = config();

  std::vector<std::thread> gen_workers;
  std::vector<std::thread> eval_workers;
  for (int i = 0; i < cfg.workers.generation; ++i) {
    gen_workers.emplace_back([this] {
      while (auto job = gen_queue_.pop()) {
        GenDone done;
        done.purpose = job->purpose;
        done.trajectory = job->trajectory;
        done.depth = job->depth;
        done.slot_begin = job->slot_begin;
        done.slot_count = job->slot_count;
        done.result = gateway_.generate(job->request);
        inbox_.push(Message(std::move(done)));
      }
    });
  }
  for (int i = 0; i < cfg.workers.evaluation; ++i) {
    eval_workers.emplace_back([this] {
      while (auto job = eval_queue_.pop()) {
        EvalDone done;
        done.trajectory = job->trajectory;
        done.depth = job->depth;
        done.k = job->k;
        done.outcome = evaluator_->evaluate(job->solution);
        inbox_.push(Message(std::move(done)));
      }
    });
  }

  bool kill_sent = false;
  try_dispatch_all();
  while (work_outstanding()) {
    if (stop_flag_.load() && !kill_sent) {
      kill_sent = true;
      sandbox::kill_all_live_evaluations();
    }
    auto msg = inbox_.pop();
    if (!msg) break;
    std::visit([this](auto&& m) { handle(std::move(m)); }, *msg);
  }

  gen_queue_.close();
  eval_queue_.close();
  inbox_.close();
  for (auto& t : gen_workers) t.join();
  for (auto& t : eval_workers) t.join();

  if (aborting_)
    state_.set_status(core::RunStatus::aborted);
  else if (stop_flag_.load())
    state_.set_status(core::RunStatus::interrupted);
  else
    state_.set_status(core::RunStatus::finished);

  const Node& best = state_.best_overall();
  if (log()) {
    log()->append_global(state_.run_id(), EventKind::finish,
                         json{{"status", core::run_status_name(state_.status())},
                              {"best_node_id", best.id},
                              {"best_score", best.score},
                              {"consumed_evaluations", state_.ledger().consumed_evaluations},
                              {"consumed_generations", state_.ledger().consumed_generations},
                              {"planned_evaluations", state_.ledger().planned_evaluations}},
                         best.id);
  }
  if (!options_.checkpoint_path.empty()) write_checkpoint(state_, options_.checkpoint_path);

  if (aborting_) throw RunAbortedError(abort_reason_);
  return best.id;
}

}  // namespace

Engine::Engine(std::shared_ptr<gateway::Generator> generator,
               std::shared_ptr<sandbox::Evaluator> evaluator)
    : generator_(std::move(generator)), evaluator_(std::move(evaluator)) {}

NodeId Engine::run(RunState& state, const EngineOptions& options) {
  Coordinator coordinator(state, generator_, evaluator_, options, stop_requested_);
  return coordinator.run();
}

void apply_prune(RunState& state, const core::PruneCutoff& cutoff, EventLog* log) {
  std::vector<TrajectoryId> active;
  for (const auto& traj : state.trajectories()) {
    if (!traj.active()) continue;
    if (traj.depth < cutoff.at_depth)
      throw std::logic_error("apply_prune: trajectory below the cutoff barrier");
    active.push_back(traj.id);
  }
  if (active.empty()) {
    state.mark_prune_applied();
    return;
  }
  std::stable_sort(active.begin(), active.end(), [&](TrajectoryId a, TrajectoryId b) {
    const double sa = state.trajectory_current_score(a);
    const double sb = state.trajectory_current_score(b);
    if (sa != sb) return sa > sb;
    return a < b;
  });
  const auto keep = static_cast<std::size_t>(
      std::ceil(cutoff.keep_fraction * static_cast<double>(active.size())));
  const std::int64_t planned_before = state.ledger().planned_evaluations;
  std::vector<TrajectoryId> kept(active.begin(),
                                 active.begin() + static_cast<std::ptrdiff_t>(
                                                      std::min(keep, active.size())));
  std::vector<TrajectoryId> pruned(active.begin() + static_cast<std::ptrdiff_t>(kept.size()),
                                   active.end());
  for (TrajectoryId id : pruned) {
    state.trajectory(id).status = core::TrajectoryStatus::pruned;
    state.ledger().planned_evaluations -=
        static_cast<std::int64_t>(state.config().depth_limit - cutoff.at_depth) *
        state.config().local_k;
  }
  state.mark_prune_applied();
  if (log) {
    const std::int64_t planned_after = state.ledger().planned_evaluations;
    log->append_global(state.run_id(), EventKind::prune,
                       json{{"at_depth", cutoff.at_depth},
                            {"keep_fraction", cutoff.keep_fraction},
                            {"kept", kept},
                            {"pruned", pruned},
                            {"planned_before", planned_before},
                            {"planned_after", planned_after},
                            {"theoretical_speedup",
                             planned_after > 0 ? static_cast<double>(planned_before) /
                                                     static_cast<double>(planned_after)
                                               : 1.0}});
  }
}

std::unique_ptr<RunState> restart_from_best(const RunState& prior,
                                            sandbox::Evaluator& evaluator,
                                            const std::string& new_run_id, EventLog* log) {
  const Node& best = prior.best_overall();
  core::TaskSpec task = prior.task();
  task.initial_solution = best.solution;
  core::RunConfig config = prior.config();
  config.rng_seed = derive_seed(prior.config().rng_seed, 0xbe57ull);
  return RunState::init_run(std::move(task), std::move(config), evaluator, new_run_id, log);
}

MultiRunResult run_with_restarts(const core::TaskSpec& task, const core::RunConfig& config,
                                 std::shared_ptr<gateway::Generator> generator,
                                 std::shared_ptr<sandbox::Evaluator> evaluator,
                                 const std::string& run_id, const EngineOptions& options,
                                 Engine* engine) {
  MultiRunResult result;
  std::optional<Engine> local_engine;
  if (!engine) {
    local_engine.emplace(generator, evaluator);
    engine = &*local_engine;
  }

  auto state = RunState::init_run(task, config, *evaluator, run_id, options.log);
  for (int round = 0; round <= config.restarts; ++round) {
    const auto start = std::chrono::steady_clock::now();
    engine->run(*state, options);
    RunSummary summary;
    summary.run_id = state->run_id();
    summary.best_node = state->best_overall().id;
    summary.best_score = state->best_overall().score;
    summary.ledger = state->ledger();
    summary.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (round > 0) summary.saturated = summary.best_score <= result.runs.back().best_score;
    result.runs.push_back(summary);
    if (summary.best_score >= result.best_score || result.runs.size() == 1) {
      result.best_score = summary.best_score;
      result.best_solution = state->best_overall().solution;
    }

    if (state->status() != core::RunStatus::finished) break;
    if (round == config.restarts) break;

    const std::string next_run_id = run_id + "-restart" + std::to_string(round + 1);
    if (options.log)
      options.log->append_global(state->run_id(), EventKind::restart,
                                 json{{"from_run", state->run_id()},
                                      {"best_node", state->best_overall().id},
                                      {"best_score", state->best_overall().score},
                                      {"next_run_id", next_run_id},
                                      {"restart_index", round + 1}},
                                 state->best_overall().id);
    state = restart_from_best(*state, *evaluator, next_run_id, options.log);
  }
  return result;
}

std::vector<SweepRow> sweep(const core::TaskSpec& task, const core::RunConfig& base_config,
                            const std::vector<SweepPoint>& grid,
                            std::optional<std::int64_t> fixed_N,
                            std::shared_ptr<gateway::Generator> generator,
                            std::shared_ptr<sandbox::Evaluator> evaluator,
                            const std::string& run_id_prefix) {
  // validate the whole grid before any run starts
  for (const auto& point : grid) {
    if (point.global_width < 1 || point.depth_limit < 1 || point.local_k < 1)
      throw std::invalid_argument("sweep: grid point dimensions must be >= 1");
    if (fixed_N) {
      const std::int64_t product = static_cast<std::int64_t>(point.global_width) *
                                   point.depth_limit * point.local_k;
      if (product != *fixed_N) {
        std::ostringstream msg;
        msg << "sweep: grid point (" << point.global_width << "," << point.depth_limit
            << "," << point.local_k << ") has budget " << product << " != fixed N "
            << *fixed_N;
        throw std::invalid_argument(msg.str());
      }
    }
  }

  std::vector<SweepRow> rows;
  Engine engine(generator, evaluator);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    core::RunConfig config = base_config;
    config.global_width = grid[i].global_width;
    config.depth_limit = grid[i].depth_limit;
    config.local_k = grid[i].local_k;
    config.rng_seed = derive_seed(base_config.rng_seed, 7000 + i);
    config.restarts = 0;
    auto state = RunState::init_run(task, config, *evaluator,
                                    run_id_prefix + "-p" + std::to_string(i), nullptr);
    engine.run(*state, EngineOptions{});
    SweepRow row;
    row.point = grid[i];
    row.seed = config.rng_seed;
    row.best_score = state->best_overall().score;
    row.consumed_evaluations = state->ledger().consumed_evaluations;
    row.planned_evaluations = state->ledger().planned_evaluations;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace evoscale::scheduler
