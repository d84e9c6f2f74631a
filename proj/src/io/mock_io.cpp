#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "evoscale/gateway/mock_generator.hpp"
#include "evoscale/sandbox/evaluator.hpp"

namespace evoscale {

using nlohmann::json;

namespace sandbox {

MockEvaluator MockEvaluator::from_script(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open mock evaluator script: " + path);
  MockEvaluator mock;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (j.contains("default_mode")) {
      const std::string mode = j["default_mode"].get<std::string>();
      if (mode == "hash")
        mock.set_default_hash();
      else if (mode == "constant")
        mock.set_default_constant(j.value("default_score", 0.0));
      else
        throw std::invalid_argument(path + ": default_mode must be hash|constant");
      continue;
    }
    const std::string match = j.at("match").get<std::string>();
    if (j.contains("error")) {
      mock.set_table_entry(
          match, EvalOutcome::failure(error_class_from_name(j["error"].get<std::string>()),
                                      j.value("stderr", std::string())));
    } else {
      mock.set_table_entry(match, EvalOutcome::success(j.at("score").get<double>()));
    }
  }
  return mock;
}

}  // namespace sandbox

namespace gateway {

std::vector<ScriptedGenerator::Entry> ScriptedGenerator::entries_from_script(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open mock generator script: " + path);
  std::vector<Entry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    Entry entry;
    entry.prompt_hash = j.value("prompt_hash", "*");
    entry.candidates = j.at("candidates").get<std::vector<std::string>>();
    entries.push_back(std::move(entry));
  }
  return entries;
}

}  // namespace gateway
}  // namespace evoscale
