#include "evoscale/sandbox/reflection.hpp"

#include <sstream>

namespace evoscale::sandbox {

std::string reflection_prompt(const std::string& instruction, const std::string& solution,
                              double score) {
  std::ostringstream out;
  out.precision(12);
  out << "You are reviewing the best attempt so far on the task below.\n"
      << "Summarize the approach and the key insights that made it score well, "
         "in a few short sentences. Do not restate the code.\n\n"
      << "TASK:\n"
      << instruction << "\n\nSCORE: " << score << "\n\nSOLUTION:\n"
      << solution << "\n";
  return out.str();
}

std::optional<std::string> reflect_on_winner(gateway::Gateway& gateway,
                                             const std::string& instruction,
                                             const std::string& solution, double score,
                                             int max_chars) {
  gateway::GeneratorRequest request;
  request.rendered_prompt = reflection_prompt(instruction, solution, score);
  request.sample_count = 1;
  request.temperature = 0.2;
  const gateway::GenResult result = gateway.generate(std::move(request));
  if (!result.ok() || result.response.candidates.empty()) return std::nullopt;
  std::string text = result.response.candidates.front();
  if (max_chars > 0 && text.size() > static_cast<std::size_t>(max_chars))
    text.resize(static_cast<std::size_t>(max_chars));
  return text;
}

}  // namespace evoscale::sandbox
