#pragma once

#include <optional>
#include <string>

#include "evoscale/gateway/generator.hpp"

namespace evoscale::sandbox {

std::string reflection_prompt(const std::string& instruction, const std::string& solution,
                              double score);

// One generator call summarizing the committed winner's approach; bounded to
// max_chars. Generator failure degrades to nullopt (the feature is optional
// guidance).
std::optional<std::string> reflect_on_winner(gateway::Gateway& gateway,
                                             const std::string& instruction,
                                             const std::string& solution, double score,
                                             int max_chars);

}  // namespace evoscale::sandbox
