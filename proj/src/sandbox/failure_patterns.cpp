#include "evoscale/sandbox/failure_patterns.hpp"

#include <algorithm>
#include <regex>
#include <sstream>

namespace evoscale::sandbox {

std::string normalize_stderr_line(const std::string& line) {
  static const std::regex temp_path("/[A-Za-z0-9_./-]*evoscale-eval-[A-Za-z0-9_]+[^\\s\"':,]*");
  static const std::regex generic_tmp("/tmp/[^\\s\"':,]+");
  static const std::regex hex_addr("0x[0-9a-fA-F]+");
  std::string out = std::regex_replace(line, temp_path, "<tmp>");
  out = std::regex_replace(out, generic_tmp, "<tmp>");
  out = std::regex_replace(out, hex_addr, "<addr>");
  return out;
}

std::string failure_signature(const EvalOutcome& outcome) {
  std::string first_line = outcome.stderr_excerpt;
  if (const std::size_t nl = first_line.find('\n'); nl != std::string::npos)
    first_line.resize(nl);
  std::string sig = error_class_name(outcome.error_class);
  first_line = normalize_stderr_line(first_line);
  if (!first_line.empty()) sig += ": " + first_line;
  return sig;
}

void FailureMemory::record(const EvalOutcome& outcome, std::uint64_t seen_order) {
  if (!outcome.failed()) return;
  auto [it, inserted] = counts_.try_emplace(failure_signature(outcome));
  if (inserted) it->second.first_seen = seen_order;
  ++it->second.count;
}

void FailureMemory::record_batch(const std::vector<EvalOutcome>& outcomes,
                                 std::uint64_t base_order) {
  for (std::size_t i = 0; i < outcomes.size(); ++i)
    record(outcomes[i], base_order + i);
}

std::vector<std::string> FailureMemory::top_patterns(int k) const {
  std::vector<std::pair<std::string, Entry>> entries(counts_.begin(), counts_.end());
  std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second.count != b.second.count) return a.second.count > b.second.count;
    return a.second.first_seen < b.second.first_seen;
  });
  std::vector<std::string> out;
  for (const auto& [sig, entry] : entries) {
    if (static_cast<int>(out.size()) >= k) break;
    std::ostringstream line;
    line << entry.count << "x " << sig;
    out.push_back(line.str());
  }
  return out;
}

}  // namespace evoscale::sandbox
