#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

// The policy abstraction the search engine drives. An implementation may be a
// remote chat model (remote.hpp) or a deterministic scripted fixture; both
// must be safe for concurrent calls.

namespace nest {

struct Proposal {
  std::string thought;
  std::string skill;     // lowercase snake_case
  std::string argument;
  double semantic_score = 0.5;  // prior in [0, 1]
};

struct SimulationOutcome {
  std::string observation;
  int valuation = 0;  // 0..100
  std::optional<std::string> answer;
};

class PolicyOracle {
public:
  virtual ~PolicyOracle() = default;

  // Returns between 1 and k proposals for the next cognitive action.
  virtual std::vector<Proposal> propose(const std::string& context, int k) = 0;

  // Executes a proposed action and values its helpfulness.
  virtual SimulationOutcome simulate(const Proposal& proposal,
                                     const std::string& context) = 0;

  // Scores a piece of reasoning text in [0, 1].
  virtual double judge(const std::string& text) = 0;

  // Produces a final answer for the given context.
  virtual std::string answer(const std::string& context) = 0;
};

// ---------------------------------------------------------------------------
// Request canonicalization and digests
//
// Requests are keyed by fnv1a-64 of "<capability>\n<canonical arguments>",
// where canonicalization normalizes CR/CRLF to LF and trims both ends, so
// digests are identical across platforms for identical logical requests.
// ---------------------------------------------------------------------------

std::string propose_request(std::string_view context, int k);
std::string simulate_request(const Proposal& proposal, std::string_view context);
std::string judge_request(std::string_view judged_text);
std::string answer_request(std::string_view context);

std::string request_digest(std::string_view capability, std::string_view canonical_args);

// ---------------------------------------------------------------------------
// Scripted fixtures
// ---------------------------------------------------------------------------

// Map from request digest to a canned response payload. File form: one record
// per line, fields (digest, capability, response); see load/save.
class ScriptedFixture {
public:
  bool strict = true;

  void add(const std::string& capability, const std::string& canonical_args,
           nlohmann::ordered_json response);

  // Convenience builders mirroring each capability's response schema.
  void add_propose(std::string_view context, int k, const std::vector<Proposal>& proposals);
  void add_simulate(const Proposal& proposal, std::string_view context,
                    const SimulationOutcome& outcome);
  void add_judge(std::string_view judged_text, double score);
  void add_answer(std::string_view context, std::string_view answer_text);

  const nlohmann::ordered_json* find(const std::string& digest) const;
  std::size_t size() const { return entries_.size(); }

  static ScriptedFixture load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

private:
  struct Entry {
    std::string capability;
    nlohmann::ordered_json response;
  };
  std::unordered_map<std::string, Entry> entries_;
  std::vector<std::string> order_;  // insertion order for deterministic save
};

// Deterministic oracle replaying a fixture. In strict mode an unknown digest
// raises Error(FixtureMiss) naming the digest; otherwise a fixed fallback is
// returned (one "observe" proposal / valuation 0 / score 0 / empty answer).
std::unique_ptr<PolicyOracle> scripted_oracle(ScriptedFixture fixture);

// Wraps another oracle and records every exchange into a fixture, so a live
// (or rule-based) run can be replayed bit-exactly later.
class RecordingOracle : public PolicyOracle {
public:
  RecordingOracle(PolicyOracle& inner, ScriptedFixture& sink)
      : inner_(inner), sink_(sink) {}

  std::vector<Proposal> propose(const std::string& context, int k) override;
  SimulationOutcome simulate(const Proposal& proposal, const std::string& context) override;
  double judge(const std::string& text) override;
  std::string answer(const std::string& context) override;

private:
  PolicyOracle& inner_;
  ScriptedFixture& sink_;
  std::mutex mutex_;
};

// Response (de)serialization shared by fixtures and the remote client cache.
nlohmann::ordered_json proposals_to_json(const std::vector<Proposal>& proposals);
std::vector<Proposal> proposals_from_json(const nlohmann::ordered_json& payload);
nlohmann::ordered_json outcome_to_json(const SimulationOutcome& outcome);
SimulationOutcome outcome_from_json(const nlohmann::ordered_json& payload);

// Clamps a real score into [lo, hi]; out-of-range values are noted on stderr
// rather than silently altered.
double clamp_score(double value, double lo, double hi, const char* what);

}  // namespace nest
