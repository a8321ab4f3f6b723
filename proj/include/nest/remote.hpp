#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "nest/oracle.hpp"

// Chat-completions client playing every solver role behind the PolicyOracle
// interface. Retries transport failures with exponential backoff (base 0.5 s,
// factor 2, no jitter); parse failures are model behavior and never retried.
// Responses are cached on disk keyed by digest of (model, capability, args).

namespace nest {

struct EndpointConfig {
  std::string base_url = "http://127.0.0.1:8080";
  std::string model = "default";
  double temperature = 0.0;   // >= 0
  double timeout_s = 30.0;    // > 0
  int max_retries = 2;        // >= 0
  std::optional<std::filesystem::path> cache_dir;
  std::string api_key;  // sent as a bearer token when non-empty

  // Applies OMNI_O3_BASE_URL / OMNI_O3_API_KEY on top of the defaults.
  static EndpointConfig from_env();
};

void validate_endpoint_config(const EndpointConfig& config);

// One chat-completion exchange. Implementations throw Error(TransportError)
// for connection-level failures; HTTP responses come back as (status, body).
class ChatTransport {
public:
  virtual ~ChatTransport() = default;

  struct Response {
    int status = 0;
    std::string body;
  };

  virtual Response complete(const std::string& request_body) = 0;
};

std::unique_ptr<ChatTransport> make_http_transport(const EndpointConfig& config);

class RemoteOracle : public PolicyOracle {
public:
  using Sleeper = std::function<void(double seconds)>;

  // `transport` defaults to the HTTP client; `sleeper` defaults to a real
  // sleep and exists so tests can observe backoff without waiting.
  explicit RemoteOracle(EndpointConfig config,
                        std::unique_ptr<ChatTransport> transport = nullptr,
                        Sleeper sleeper = nullptr);

  std::vector<Proposal> propose(const std::string& context, int k) override;
  SimulationOutcome simulate(const Proposal& proposal, const std::string& context) override;
  double judge(const std::string& text) override;
  std::string answer(const std::string& context) override;

private:
  std::string complete_with_retries(const std::string& system_prompt,
                                    const std::string& user_prompt);
  std::string cached_completion(const std::string& capability,
                                const std::string& canonical_args,
                                const std::string& system_prompt,
                                const std::string& user_prompt);

  EndpointConfig config_;
  std::unique_ptr<ChatTransport> transport_;
  Sleeper sleeper_;
  std::mutex cache_mutex_;
};

// Reply parsers, exposed for tests. Proposal lines look like
//   "## Expand: 1. skill(argument) | prior=0.85 | thought text"
// (the leading ordinal is optional); simulation replies are an Observation
// block in the trajectory grammar; judge replies are a single real.
std::vector<Proposal> parse_propose_reply(const std::string& content, int k);
SimulationOutcome parse_simulate_reply(const std::string& content);
double parse_judge_reply(const std::string& content);

}  // namespace nest
