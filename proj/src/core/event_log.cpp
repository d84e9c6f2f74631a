#include "evoscale/core/event_log.hpp"

#include <stdexcept>

namespace evoscale::core {

using nlohmann::json;

const char* event_kind_name(EventKind kind) {
  switch (kind) {
    case EventKind::setup: return "setup";
    case EventKind::gen_request: return "gen_request";
    case EventKind::gen_response: return "gen_response";
    case EventKind::eval_start: return "eval_start";
    case EventKind::eval_done: return "eval_done";
    case EventKind::commit: return "commit";
    case EventKind::prune: return "prune";
    case EventKind::restart: return "restart";
    case EventKind::finish: return "finish";
  }
  return "unknown";
}

EventKind event_kind_from_name(const std::string& name) {
  static const std::map<std::string, EventKind> table = {
      {"setup", EventKind::setup},
      {"gen_request", EventKind::gen_request},
      {"gen_response", EventKind::gen_response},
      {"eval_start", EventKind::eval_start},
      {"eval_done", EventKind::eval_done},
      {"commit", EventKind::commit},
      {"prune", EventKind::prune},
      {"restart", EventKind::restart},
      {"finish", EventKind::finish},
  };
  auto it = table.find(name);
  if (it == table.end()) throw std::invalid_argument("unknown event kind: " + name);
  return it->second;
}

json Event::to_json() const {
  json j = {
      {"ts", ts},
      {"run_id", run_id},
      {"kind", event_kind_name(kind)},
      {"payload", payload},
  };
  if (trajectory) j["trajectory_id"] = *trajectory;
  if (node) j["node_id"] = *node;
  return j;
}

Event Event::from_json(const json& j) {
  Event e;
  e.ts = j.at("ts").get<std::uint64_t>();
  e.run_id = j.at("run_id").get<std::string>();
  e.kind = event_kind_from_name(j.at("kind").get<std::string>());
  if (j.contains("trajectory_id")) e.trajectory = j["trajectory_id"].get<TrajectoryId>();
  if (j.contains("node_id")) e.node = j["node_id"].get<NodeId>();
  e.payload = j.value("payload", json::object());
  return e;
}

EventLog::EventLog() = default;

EventLog::EventLog(const std::string& path, Order order, std::uint64_t first_ts)
    : path_(path), order_(order), next_ts_(first_ts) {
  if (!path_.empty()) {
    file_.open(path_, std::ios::app | std::ios::binary);
    if (!file_) throw std::runtime_error("cannot open event log: " + path_);
  }
}

EventLog::~EventLog() { flush_all(); }

void EventLog::write_line(Event event) {
  event.ts = next_ts_++;
  if (file_.is_open()) {
    file_ << event.to_json().dump() << '\n';
    file_.flush();
  }
  events_mirror_.push_back(std::move(event));
}

void EventLog::append(const std::string& run_id, EventKind kind, TrajectoryId trajectory,
                      json payload, std::optional<NodeId> node) {
  Event e;
  e.run_id = run_id;
  e.kind = kind;
  e.trajectory = trajectory;
  e.node = node;
  e.payload = std::move(payload);
  if (order_ == Order::live) {
    write_line(std::move(e));
  } else {
    buffers_[trajectory].push_back(std::move(e));
  }
}

void EventLog::append_global(const std::string& run_id, EventKind kind, json payload,
                             std::optional<NodeId> node) {
  flush_all();
  Event e;
  e.run_id = run_id;
  e.kind = kind;
  e.node = node;
  e.payload = std::move(payload);
  write_line(std::move(e));
}

void EventLog::flush_all() {
  for (auto& [trajectory, buffer] : buffers_) {
    for (auto& e : buffer) write_line(std::move(e));
    buffer.clear();
  }
}

LogReadResult read_event_log(const std::string& path) {
  LogReadResult result;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read event log: " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++result.total_lines;
    try {
      result.events.push_back(Event::from_json(json::parse(line)));
    } catch (const std::exception&) {
      ++result.corrupt_lines;
    }
  }
  return result;
}

}  // namespace evoscale::core
