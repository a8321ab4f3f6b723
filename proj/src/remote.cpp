#include "nest/remote.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "nest/error.hpp"
#include "nest/text.hpp"
#include "nest/trajectory.hpp"

namespace nest {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr const char* kCompletionsPath = "/v1/chat/completions";

// Capability prompts. These are editable assets: the wire contract the
// parsers depend on is only the reply shapes they describe.
constexpr const char* kProposeSystem =
    "You are the expansion module of a tree-search reasoner for audio-visual "
    "tasks. Given the task context and the trajectory so far, propose "
    "alternative next cognitive actions. Reply with one line per proposal and "
    "nothing else, each exactly of the form:\n"
    "## Expand: <n>. <skill>(<argument>) | prior=<0..1> | <short thought>\n"
    "Skills are lowercase snake_case, e.g. audio_transcription, "
    "keyword_spotting, spatial_grounding, temporal_localization, "
    "sequence_scan, caption.";

constexpr const char* kSimulateSystem =
    "You are an intermediate solver inside a tree-search reasoner. Execute "
    "the requested action against the task context and report what you "
    "observe. Reply exactly in this shape:\n"
    "## Observation\n<one or more observation lines>\n## Score: <0-100>\n"
    "Append, only when the observation settles the task:\n"
    "# Answer\n<final answer>\n"
    "The score values how much the observation helps answer the question.";

constexpr const char* kJudgeSystem =
    "You grade reasoning fragments. Reply with a single real number in "
    "[0, 1] and nothing else.";

constexpr const char* kAnswerSystem =
    "Answer the task directly. Reply with the final answer text only.";

bool retryable_status(int status) {
  return status == 429 || (status >= 500 && status < 600);
}

std::string strip_ordinal(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
  if (i > 0 && i + 1 < s.size() && s[i] == '.' && s[i + 1] == ' ')
    return std::string(s.substr(i + 2));
  return std::string(s);
}

class HttpChatTransport : public ChatTransport {
public:
  explicit HttpChatTransport(EndpointConfig config) : config_(std::move(config)) {}

  Response complete(const std::string& request_body) override {
    httplib::Client client(config_.base_url);
    auto timeout = std::chrono::milliseconds(
        static_cast<long long>(config_.timeout_s * 1000.0));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    httplib::Headers headers;
    if (!config_.api_key.empty())
      headers.emplace("Authorization", "Bearer " + config_.api_key);

    httplib::Result result =
        client.Post(kCompletionsPath, headers, request_body, "application/json");
    if (!result)
      fail(ErrorCode::TransportError,
           "request to " + config_.base_url + " failed: " + httplib::to_string(result.error()));
    return Response{result->status, result->body};
  }

private:
  EndpointConfig config_;
};

}  // namespace

EndpointConfig EndpointConfig::from_env() {
  EndpointConfig config;
  if (const char* base_url = std::getenv("OMNI_O3_BASE_URL"); base_url && *base_url)
    config.base_url = base_url;
  if (const char* api_key = std::getenv("OMNI_O3_API_KEY"); api_key && *api_key)
    config.api_key = api_key;
  return config;
}

void validate_endpoint_config(const EndpointConfig& config) {
  if (config.base_url.empty()) fail(ErrorCode::InvalidConfig, "base_url must be non-empty");
  if (config.model.empty()) fail(ErrorCode::InvalidConfig, "model must be non-empty");
  if (!(config.temperature >= 0.0))
    fail(ErrorCode::InvalidConfig, "temperature must be >= 0");
  if (!(config.timeout_s > 0.0)) fail(ErrorCode::InvalidConfig, "timeout_s must be > 0");
  if (config.max_retries < 0) fail(ErrorCode::InvalidConfig, "max_retries must be >= 0");
}

std::unique_ptr<ChatTransport> make_http_transport(const EndpointConfig& config) {
  return std::make_unique<HttpChatTransport>(config);
}

RemoteOracle::RemoteOracle(EndpointConfig config, std::unique_ptr<ChatTransport> transport,
                           Sleeper sleeper)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      sleeper_(std::move(sleeper)) {
  validate_endpoint_config(config_);
  if (!transport_) transport_ = make_http_transport(config_);
  if (!sleeper_)
    sleeper_ = [](double seconds) {
      std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
    };
}

std::string RemoteOracle::complete_with_retries(const std::string& system_prompt,
                                                const std::string& user_prompt) {
  ordered_json request;
  request["model"] = config_.model;
  request["messages"] = ordered_json::array(
      {ordered_json{{"role", "system"}, {"content", system_prompt}},
       ordered_json{{"role", "user"}, {"content", user_prompt}}});
  request["temperature"] = config_.temperature;
  std::string body = request.dump();

  std::string last_failure;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) sleeper_(0.5 * static_cast<double>(1 << (attempt - 1)));

    ChatTransport::Response response;
    try {
      response = transport_->complete(body);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::TransportError) throw;
      last_failure = e.what();
      continue;
    }

    if (response.status >= 200 && response.status < 300) {
      ordered_json parsed = ordered_json::parse(response.body, nullptr, false);
      if (parsed.is_discarded())
        fail(ErrorCode::ParseError, "endpoint returned a non-JSON body");
      try {
        return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const ordered_json::exception&) {
        fail(ErrorCode::ParseError, "endpoint reply misses choices[0].message.content");
      }
    }
    last_failure = "HTTP " + std::to_string(response.status);
    if (!retryable_status(response.status))
      fail(ErrorCode::TransportError, "endpoint returned " + last_failure);
  }
  fail(ErrorCode::TransportError,
       "gave up after " + std::to_string(config_.max_retries + 1) + " attempts: " + last_failure);
}

std::string RemoteOracle::cached_completion(const std::string& capability,
                                            const std::string& canonical_args,
                                            const std::string& system_prompt,
                                            const std::string& user_prompt) {
  std::optional<std::filesystem::path> cache_file;
  if (config_.cache_dir) {
    std::string digest =
        text::fnv1a64_hex(config_.model + "\n" + capability + "\n" + canonical_args);
    cache_file = *config_.cache_dir / (digest + ".txt");
    std::lock_guard<std::mutex> lock(cache_mutex_);
    std::ifstream in(*cache_file, std::ios::binary);
    if (in) {
      std::ostringstream content;
      content << in.rdbuf();
      return content.str();
    }
  }

  std::string content = complete_with_retries(system_prompt, user_prompt);

  if (cache_file) {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    std::error_code ec;
    std::filesystem::create_directories(*config_.cache_dir, ec);
    std::ofstream out(*cache_file, std::ios::binary);
    if (out) out << content;
  }
  return content;
}

std::vector<Proposal> RemoteOracle::propose(const std::string& context, int k) {
  std::string canonical = propose_request(context, k);
  std::string user = context + "\n\npropose up to " + std::to_string(k) + " actions";
  return parse_propose_reply(cached_completion("propose", canonical, kProposeSystem, user), k);
}

SimulationOutcome RemoteOracle::simulate(const Proposal& proposal, const std::string& context) {
  std::string canonical = simulate_request(proposal, context);
  std::string user = context + "\n\naction: " + proposal.skill + "(" + proposal.argument +
                     ")\nthought: " + proposal.thought;
  return parse_simulate_reply(cached_completion("simulate", canonical, kSimulateSystem, user));
}

double RemoteOracle::judge(const std::string& judged_text) {
  std::string canonical = judge_request(judged_text);
  return parse_judge_reply(cached_completion("judge", canonical, kJudgeSystem, judged_text));
}

std::string RemoteOracle::answer(const std::string& context) {
  std::string canonical = answer_request(context);
  return text::trim(cached_completion("answer", canonical, kAnswerSystem, context));
}

std::vector<Proposal> parse_propose_reply(const std::string& content, int k) {
  constexpr std::string_view kTag = "## Expand: ";
  constexpr std::string_view kPriorSep = " | prior=";
  std::vector<Proposal> proposals;
  for (const std::string& raw_line : text::split_lines(content)) {
    std::string line = text::trim(raw_line);
    if (line.rfind(kTag, 0) != 0) continue;
    std::string payload = strip_ordinal(std::string_view(line).substr(kTag.size()));

    std::size_t lparen = payload.find('(');
    if (lparen == std::string::npos)
      fail(ErrorCode::ParseError, "proposal line misses '(': " + line);
    std::size_t sep = payload.find(kPriorSep, lparen);
    if (sep == std::string::npos || sep == 0 || payload[sep - 1] != ')')
      fail(ErrorCode::ParseError, "proposal line misses ') | prior=': " + line);

    Proposal proposal;
    proposal.skill = payload.substr(0, lparen);
    if (!text::is_snake_ident(proposal.skill))
      fail(ErrorCode::ParseError, "proposal skill is not snake_case: " + line);
    proposal.argument = payload.substr(lparen + 1, sep - lparen - 2);

    std::string rest = payload.substr(sep + kPriorSep.size());
    std::size_t thought_sep = rest.find(" | ");
    std::string prior_text = thought_sep == std::string::npos ? rest : rest.substr(0, thought_sep);
    char* end = nullptr;
    double prior = std::strtod(prior_text.c_str(), &end);
    if (end != prior_text.c_str() + prior_text.size() || prior_text.empty())
      fail(ErrorCode::ParseError, "proposal prior is not a real: " + line);
    proposal.semantic_score = clamp_score(prior, 0.0, 1.0, "proposal");
    if (thought_sep != std::string::npos) proposal.thought = rest.substr(thought_sep + 3);

    proposals.push_back(std::move(proposal));
    if (static_cast<int>(proposals.size()) == k) break;
  }
  if (proposals.empty())
    fail(ErrorCode::ParseError, "reply contains no '## Expand:' proposal lines");
  return proposals;
}

SimulationOutcome parse_simulate_reply(const std::string& content) {
  traj::ObservationBlock block = traj::parse_observation_block(content);
  SimulationOutcome outcome;
  outcome.observation = block.observation;
  outcome.valuation = block.score;
  outcome.answer = block.answer;
  return outcome;
}

double parse_judge_reply(const std::string& content) {
  std::string trimmed = text::trim(content);
  if (trimmed.empty()) fail(ErrorCode::ParseError, "judge reply is empty");
  char* end = nullptr;
  double value = std::strtod(trimmed.c_str(), &end);
  if (end != trimmed.c_str() + trimmed.size())
    fail(ErrorCode::ParseError, "judge reply is not a single real: " + trimmed);
  return clamp_score(value, 0.0, 1.0, "judge");
}

}  // namespace nest
