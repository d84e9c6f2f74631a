#pragma once

#include <optional>
#include <string>

namespace evoscale::gateway {

inline constexpr const char* kEvolveStartMarker = "EVOLVE-BLOCK-START";
inline constexpr const char* kEvolveEndMarker = "EVOLVE-BLOCK-END";

struct ExtractResult {
  bool ok = false;
  std::string solution;  // set when ok
  std::string error;     // set when !ok

  static ExtractResult success(std::string s) { return {true, std::move(s), {}}; }
  static ExtractResult failure(std::string why) { return {false, {}, std::move(why)}; }
};

// Pulls the solution region out of a raw candidate. With markers required,
// the accepted shape is: first marker occurrence is START, the next is END;
// the region between them is returned and anything after the pair is
// ignored. Missing START/END or a nested START fail extraction. Never throws
// on arbitrary input. Without markers the full text passes through.
ExtractResult extract_solution(const std::string& candidate_text, bool markers_required);

}  // namespace evoscale::gateway
