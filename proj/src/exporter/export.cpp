#include "evoscale/exporter/export.hpp"

#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <fcntl.h>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

namespace evoscale::exporter {

namespace fs = std::filesystem;
using nlohmann::json;

void TrajectoryRecord::recompute_max() {
  max_score = nodes.empty() ? 0.0 : nodes.front().score;
  for (const auto& node : nodes) max_score = std::max(max_score, node.score);
}

json TrajectoryRecord::to_json() const {
  json node_rows = json::array();
  for (const auto& node : nodes)
    node_rows.push_back({{"step", node.step},
                         {"prompt", node.prompt},
                         {"response", node.response},
                         {"score", node.score},
                         {"failed", node.failed}});
  return json{{"task_id", task_id},
              {"trajectory_id", trajectory_id},
              {"iteration", iteration},
              {"max_score", max_score},
              {"nodes", std::move(node_rows)}};
}

TrajectoryRecord TrajectoryRecord::from_json(const json& j) {
  TrajectoryRecord record;
  record.task_id = j.at("task_id").get<std::string>();
  record.trajectory_id = j.at("trajectory_id").get<std::string>();
  record.iteration = j.value("iteration", 0);
  for (const auto& n : j.at("nodes")) {
    TrajectoryNode node;
    node.step = n.at("step").get<int>();
    node.prompt = n.at("prompt").get<std::string>();
    node.response = n.at("response").get<std::string>();
    node.score = n.at("score").get<double>();
    node.failed = n.value("failed", false);
    record.nodes.push_back(std::move(node));
  }
  record.max_score = j.value("max_score", 0.0);
  return record;
}

double ExportConfig::r_for_iteration(int iteration) const {
  for (const auto& span : r_schedule)
    if (iteration >= span.iteration_from && iteration <= span.iteration_to)
      return span.r_percent;
  return default_r;
}

void ExportConfig::validate() const {
  auto check = [](double r) {
    if (!(r > 0.0 && r <= 100.0))
      throw std::invalid_argument("export: R_percent must lie in (0, 100]");
  };
  check(default_r);
  for (const auto& span : r_schedule) {
    check(span.r_percent);
    if (span.iteration_from > span.iteration_to)
      throw std::invalid_argument("export: iteration_range must be ordered");
  }
}

std::map<std::string, int> assign_credit_irft(const std::vector<TrajectoryRecord>& records,
                                              double r_percent, bool per_task_grouping) {
  if (!(r_percent > 0.0 && r_percent <= 100.0))
    throw std::invalid_argument("export: R_percent must lie in (0, 100]");

  std::map<std::string, std::vector<const TrajectoryRecord*>> groups;
  for (const auto& record : records)
    groups[per_task_grouping ? record.task_id : std::string("*")].push_back(&record);

  std::map<std::string, int> credits;
  for (auto& [task, group] : groups) {
    std::vector<double> scores;
    scores.reserve(group.size());
    for (const auto* record : group) scores.push_back(record->max_score);
    std::sort(scores.begin(), scores.end(), std::greater<double>());
    const std::size_t keep = static_cast<std::size_t>(
        std::ceil(r_percent / 100.0 * static_cast<double>(group.size())));
    const double cutoff = scores[std::min(keep, scores.size()) - 1];
    // boundary ties are kept
    for (const auto* record : group)
      credits[record->trajectory_id] = record->max_score >= cutoff ? 1 : 0;
  }
  return credits;
}

TrajectoryRecord truncate_after_peak(TrajectoryRecord record) {
  if (record.nodes.empty()) return record;
  record.recompute_max();
  std::size_t first_peak = 0;
  for (; first_peak < record.nodes.size(); ++first_peak)
    if (record.nodes[first_peak].score == record.max_score) break;
  record.nodes.resize(first_peak + 1);
  return record;
}

ExportSummary export_dataset(const std::vector<TrajectoryRecord>& records,
                             const std::map<std::string, int>& credits,
                             const ExportConfig& config, const std::string& output_path) {
  ExportSummary summary;
  summary.trajectories_total = records.size();

  std::vector<const TrajectoryRecord*> ordered;
  ordered.reserve(records.size());
  for (const auto& record : records) ordered.push_back(&record);
  std::sort(ordered.begin(), ordered.end(),
            [](const TrajectoryRecord* a, const TrajectoryRecord* b) {
              if (a->task_id != b->task_id) return a->task_id < b->task_id;
              return a->trajectory_id < b->trajectory_id;
            });

  std::ofstream out(output_path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write dataset: " + output_path);

  for (const TrajectoryRecord* record : ordered) {
    const auto credit_it = credits.find(record->trajectory_id);
    const int weight = credit_it == credits.end() ? 0 : credit_it->second;
    if (weight == 1) ++summary.trajectories_kept;
    if (weight == 0 && !config.include_zero_weight) continue;

    TrajectoryRecord working = *record;
    if (config.truncate_after_peak) working = truncate_after_peak(std::move(working));
    for (const auto& node : working.nodes) {
      if (node.prompt.empty() || node.response.empty()) {
        ++summary.rows_skipped;
        summary.warnings.push_back("skipped malformed node (empty prompt/response) in " +
                                   record->trajectory_id + " step " +
                                   std::to_string(node.step));
        continue;
      }
      const json row = {{"task_id", record->task_id},
                        {"trajectory_id", record->trajectory_id},
                        {"step", node.step},
                        {"prompt", node.prompt},
                        {"response", node.response},
                        {"weight", weight}};
      out << row.dump() << '\n';
      ++summary.rows_emitted;
    }
  }
  return summary;
}

namespace {

fs::path manifest_path(const std::string& buffer_dir) {
  return fs::path(buffer_dir) / "manifest.json";
}

// single-writer advisory lock on the buffer directory
class BufferLock {
 public:
  explicit BufferLock(const std::string& buffer_dir) {
    fs::create_directories(buffer_dir);
    const std::string lock_path = (fs::path(buffer_dir) / ".lock").string();
    fd_ = ::open(lock_path.c_str(), O_CREAT | O_RDWR, 0644);
    if (fd_ >= 0) ::flock(fd_, LOCK_EX);
  }
  ~BufferLock() {
    if (fd_ >= 0) {
      ::flock(fd_, LOCK_UN);
      ::close(fd_);
    }
  }

 private:
  int fd_ = -1;
};

json load_manifest(const std::string& buffer_dir) {
  const fs::path path = manifest_path(buffer_dir);
  if (!fs::exists(path)) return json{{"entries", json::array()}};
  std::ifstream in(path);
  return json::parse(in);
}

void store_manifest(const std::string& buffer_dir, const json& manifest) {
  std::ofstream out(manifest_path(buffer_dir), std::ios::trunc);
  out << manifest.dump(2) << '\n';
}

std::set<std::string> known_trajectories(const json& manifest) {
  std::set<std::string> known;
  for (const auto& entry : manifest.at("entries"))
    for (const auto& id : entry.at("trajectory_ids"))
      known.insert(id.get<std::string>());
  return known;
}

}  // namespace

MergeResult replay_buffer_merge(const std::string& buffer_dir,
                                const std::vector<TrajectoryRecord>& records,
                                int iteration) {
  BufferLock lock(buffer_dir);
  json manifest = load_manifest(buffer_dir);
  const std::set<std::string> known = known_trajectories(manifest);

  MergeResult result;
  std::vector<const TrajectoryRecord*> fresh;
  for (const auto& record : records) {
    if (known.count(record.trajectory_id)) {
      ++result.duplicates;
    } else {
      fresh.push_back(&record);
    }
  }
  if (fresh.empty()) return result;

  // one data file per merge, named by iteration and sequence
  const std::string file_name =
      "records-iter" + std::to_string(iteration) + "-" +
      std::to_string(manifest.at("entries").size()) + ".jsonl";
  {
    std::ofstream out(fs::path(buffer_dir) / file_name, std::ios::binary | std::ios::trunc);
    for (const TrajectoryRecord* record : fresh) {
      TrajectoryRecord tagged = *record;
      tagged.iteration = iteration;
      out << tagged.to_json().dump() << '\n';
      ++result.added;
    }
  }
  json ids = json::array();
  for (const TrajectoryRecord* record : fresh) ids.push_back(record->trajectory_id);
  manifest["entries"].push_back(
      {{"file", file_name}, {"iteration", iteration}, {"trajectory_ids", std::move(ids)}});
  store_manifest(buffer_dir, manifest);
  return result;
}

std::vector<TrajectoryRecord> replay_buffer_load(const std::string& buffer_dir) {
  BufferLock lock(buffer_dir);
  const json manifest = load_manifest(buffer_dir);
  std::vector<TrajectoryRecord> records;
  for (const auto& entry : manifest.at("entries")) {
    const fs::path path = fs::path(buffer_dir) / entry.at("file").get<std::string>();
    std::ifstream in(path, std::ios::binary);
    if (!in) continue;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      records.push_back(TrajectoryRecord::from_json(json::parse(line)));
    }
  }
  return records;
}

std::vector<TrajectoryRecord> records_from_events(const std::vector<core::Event>& events,
                                                  int iteration) {
  // (run_id, trajectory) -> record under construction
  struct Key {
    std::string run_id;
    core::TrajectoryId trajectory;
    bool operator<(const Key& other) const {
      if (run_id != other.run_id) return run_id < other.run_id;
      return trajectory < other.trajectory;
    }
  };
  std::map<std::string, std::string> task_by_run;
  std::map<Key, std::map<int, std::string>> prompts;  // depth -> prompt
  std::map<Key, TrajectoryRecord> records;

  for (const auto& event : events) {
    if (event.kind == core::EventKind::setup) {
      task_by_run[event.run_id] = event.payload.value("task_id", std::string());
      continue;
    }
    if (!event.trajectory) continue;
    const Key key{event.run_id, *event.trajectory};
    if (event.kind == core::EventKind::gen_request &&
        event.payload.value("purpose", "") == "proposal") {
      prompts[key][event.payload.value("depth", 0)] =
          event.payload.value("prompt", std::string());
    } else if (event.kind == core::EventKind::commit) {
      TrajectoryRecord& record = records[key];
      if (record.trajectory_id.empty()) {
        record.task_id = task_by_run[event.run_id];
        record.trajectory_id = event.run_id + "/t" + std::to_string(*event.trajectory);
        record.iteration = iteration;
      }
      TrajectoryNode node;
      node.step = event.payload.value("depth", 0);
      node.response = event.payload.value("response_text", std::string());
      node.failed = event.payload.value("error_class", "none") != "none";
      node.score = event.payload.value("score", sandbox::kSentinelWorstScore);
      auto prompt_it = prompts[key].find(node.step);
      if (prompt_it != prompts[key].end()) node.prompt = prompt_it->second;
      record.nodes.push_back(std::move(node));
    }
  }

  std::vector<TrajectoryRecord> out;
  out.reserve(records.size());
  for (auto& [key, record] : records) {
    std::sort(record.nodes.begin(), record.nodes.end(),
              [](const TrajectoryNode& a, const TrajectoryNode& b) { return a.step < b.step; });
    record.recompute_max();
    out.push_back(std::move(record));
  }
  return out;
}

}  // namespace exporter
