#include "evoscale/gateway/http_generator.hpp"

#include <chrono>
#include <cstdlib>
#include <stdexcept>

#include <httplib.h>
#include <json.hpp>

namespace evoscale::gateway {

using nlohmann::json;

HttpGeneratorConfig HttpGeneratorConfig::from_env() {
  HttpGeneratorConfig config;
  if (const char* v = std::getenv("EVOSCALE_GENERATOR_ENDPOINT")) config.endpoint = v;
  if (const char* v = std::getenv("EVOSCALE_GENERATOR_MODEL")) config.model = v;
  if (const char* v = std::getenv("EVOSCALE_GENERATOR_API_KEY")) config.api_key = v;
  return config;
}

namespace {

void split_endpoint(const std::string& endpoint, std::string& host, std::string& path) {
  const std::size_t scheme = endpoint.find("://");
  if (scheme == std::string::npos)
    throw std::invalid_argument("generator endpoint: expected scheme://host[:port]/path");
  const std::size_t slash = endpoint.find('/', scheme + 3);
  if (slash == std::string::npos) {
    host = endpoint;
    path = "/v1/chat/completions";
  } else {
    host = endpoint.substr(0, slash);
    path = endpoint.substr(slash);
  }
}

}  // namespace

HttpGenerator::HttpGenerator(HttpGeneratorConfig config) : config_(std::move(config)) {
  if (config_.endpoint.empty())
    throw std::invalid_argument(
        "generator endpoint: not configured (set EVOSCALE_GENERATOR_ENDPOINT)");
  split_endpoint(config_.endpoint, host_, path_);
}

std::string HttpGenerator::build_request_body(const HttpGeneratorConfig& config,
                                              const GeneratorRequest& request) {
  json body = {
      {"model", config.model},
      {"messages", json::array({{{"role", "user"}, {"content", request.rendered_prompt}}})},
      {"n", request.sample_count},
      {"temperature", request.temperature},
      {"max_tokens", request.max_output_tokens},
  };
  if (!request.reasoning_mode.empty()) body["reasoning_effort"] = request.reasoning_mode;
  if (request.sampling_seed != 0) body["seed"] = request.sampling_seed;
  return body.dump();
}

GenResult HttpGenerator::generate(const GeneratorRequest& request) {
  const auto start = std::chrono::steady_clock::now();
  httplib::Client client(host_);
  client.set_connection_timeout(config_.connect_timeout_s, 0);
  client.set_read_timeout(config_.read_timeout_s, 0);

  httplib::Headers headers;
  if (!config_.api_key.empty())
    headers.emplace("Authorization", "Bearer " + config_.api_key);

  const std::string body = build_request_body(config_, request);
  httplib::Result res = client.Post(path_, headers, body, "application/json");
  if (!res)
    return GenResult::failure(GenErrorKind::transport,
                              "transport error: " + httplib::to_string(res.error()));
  if (res->status >= 500)
    return GenResult::failure(GenErrorKind::transport,
                              "server error: HTTP " + std::to_string(res->status));
  if (res->status != 200)
    return GenResult::failure(GenErrorKind::protocol,
                              "unexpected HTTP status " + std::to_string(res->status) +
                                  ": " + res->body.substr(0, 200));

  GenResult result;
  try {
    const json payload = json::parse(res->body);
    for (const auto& choice : payload.at("choices")) {
      result.response.candidates.push_back(
          choice.at("message").at("content").get<std::string>());
      result.response.usage.output_tokens.push_back(0);
    }
    if (payload.contains("usage")) {
      const auto& usage = payload["usage"];
      result.response.usage.prompt_tokens = usage.value("prompt_tokens", 0L);
      const long completion = usage.value("completion_tokens", 0L);
      if (!result.response.usage.output_tokens.empty()) {
        const long per =
            completion / static_cast<long>(result.response.usage.output_tokens.size());
        for (auto& t : result.response.usage.output_tokens) t = per;
      }
    }
  } catch (const json::exception& e) {
    return GenResult::failure(GenErrorKind::protocol,
                              std::string("malformed completion payload: ") + e.what());
  }
  result.response.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
          .count();
  return result;
}

}  // namespace evoscale::gateway
