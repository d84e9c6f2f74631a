#include "evoscale/gateway/extract.hpp"

#include <cstring>

namespace evoscale::gateway {

ExtractResult extract_solution(const std::string& candidate_text, bool markers_required) {
  if (!markers_required) return ExtractResult::success(candidate_text);

  const std::size_t start = candidate_text.find(kEvolveStartMarker);
  if (start == std::string::npos)
    return ExtractResult::failure("missing EVOLVE-BLOCK-START marker");
  const std::size_t body = start + std::strlen(kEvolveStartMarker);

  const std::size_t next_start = candidate_text.find(kEvolveStartMarker, body);
  const std::size_t end = candidate_text.find(kEvolveEndMarker, body);
  if (end == std::string::npos)
    return ExtractResult::failure("missing EVOLVE-BLOCK-END marker");
  if (next_start != std::string::npos && next_start < end)
    return ExtractResult::failure("nested EVOLVE-BLOCK-START before END");
  return ExtractResult::success(candidate_text.substr(body, end - body));
}

}  // namespace evoscale::gateway
