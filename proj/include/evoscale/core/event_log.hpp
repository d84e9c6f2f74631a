#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "evoscale/core/node.hpp"

namespace evoscale::core {

enum class EventKind {
  setup,
  gen_request,
  gen_response,
  eval_start,
  eval_done,
  commit,
  prune,
  restart,
  finish,
};

const char* event_kind_name(EventKind kind);
EventKind event_kind_from_name(const std::string& name);

struct Event {
  std::uint64_t ts = 0;  // logical sequence number within the log file
  std::string run_id;
  EventKind kind = EventKind::setup;
  std::optional<TrajectoryId> trajectory;
  std::optional<NodeId> node;
  nlohmann::json payload = nlohmann::json::object();

  nlohmann::json to_json() const;
  static Event from_json(const nlohmann::json& j);
};

// Append-only JSONL event log.
//
// Default ordering is canonical: per-trajectory events are buffered in their
// trajectory-local order and written grouped by trajectory index at global
// barriers (setup, prune, restart, finish, interrupt). That makes the byte
// stream a pure function of the run's logical behavior, so identical seeds
// with deterministic mocks reproduce the file exactly. Live mode trades that
// for arrival-order writes.
class EventLog {
 public:
  enum class Order { canonical, live };

  EventLog();  // in-memory only
  explicit EventLog(const std::string& path, Order order = Order::canonical,
                    std::uint64_t first_ts = 0);
  ~EventLog();

  // Global events flush all trajectory buffers (in trajectory order) first.
  void append_global(const std::string& run_id, EventKind kind, nlohmann::json payload,
                     std::optional<NodeId> node = std::nullopt);
  void append(const std::string& run_id, EventKind kind, TrajectoryId trajectory,
              nlohmann::json payload, std::optional<NodeId> node = std::nullopt);

  void flush_all();
  std::uint64_t next_ts() const { return next_ts_; }
  const std::string& path() const { return path_; }

  // In-memory copy of everything appended (including unflushed buffers),
  // in canonical order; used by tests and the in-process report path.
  const std::vector<Event>& events() const { return events_mirror_; }

 private:
  void write_line(Event event);

  std::string path_;
  Order order_ = Order::canonical;
  std::ofstream file_;
  std::uint64_t next_ts_ = 0;
  std::map<TrajectoryId, std::vector<Event>> buffers_;
  std::vector<Event> events_mirror_;
};

// Reads a JSONL event log; malformed lines are counted, not fatal.
struct LogReadResult {
  std::vector<Event> events;
  std::size_t corrupt_lines = 0;
  std::size_t total_lines = 0;
};

LogReadResult read_event_log(const std::string& path);

}  // namespace evoscale::core
