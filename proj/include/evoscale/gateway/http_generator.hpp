#pragma once

#include <string>

#include "evoscale/gateway/generator.hpp"

namespace evoscale::gateway {

// Connection settings for a chat-completions-compatible endpoint. Resolved
// from the environment by from_env():
//   EVOSCALE_GENERATOR_ENDPOINT  e.g. http://localhost:8000/v1/chat/completions
//   EVOSCALE_GENERATOR_MODEL     model name
//   EVOSCALE_GENERATOR_API_KEY   optional bearer token
struct HttpGeneratorConfig {
  std::string endpoint;
  std::string model;
  std::string api_key;
  int connect_timeout_s = 10;
  int read_timeout_s = 600;

  static HttpGeneratorConfig from_env();
};

class HttpGenerator : public Generator {
 public:
  explicit HttpGenerator(HttpGeneratorConfig config);

  GenResult generate(const GeneratorRequest& request) override;

  // Request body on the wire; exposed for tests.
  static std::string build_request_body(const HttpGeneratorConfig& config,
                                        const GeneratorRequest& request);

 private:
  HttpGeneratorConfig config_;
  std::string host_;  // scheme://host:port
  std::string path_;
};

}  // namespace evoscale::gateway
