#include "nest/oracle.hpp"

#include <fstream>
#include <iostream>

#include "nest/error.hpp"
#include "nest/text.hpp"

namespace nest {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr const char* kPropose = "propose";
constexpr const char* kSimulate = "simulate";
constexpr const char* kJudge = "judge";
constexpr const char* kAnswer = "answer";

int clamp_valuation(int value, const char* what) {
  if (value < 0 || value > 100) {
    std::cerr << "[oracle] " << what << " valuation " << value
              << " clamped into [0, 100]\n";
    return value < 0 ? 0 : 100;
  }
  return value;
}

}  // namespace

double clamp_score(double value, double lo, double hi, const char* what) {
  if (value < lo || value > hi || value != value) {
    std::cerr << "[oracle] " << what << " score " << value << " clamped into ["
              << lo << ", " << hi << "]\n";
    if (value != value) return lo;
    return value < lo ? lo : hi;
  }
  return value;
}

std::string propose_request(std::string_view context, int k) {
  return "k=" + std::to_string(k) + "\n" + text::canonical_lf(context);
}

std::string simulate_request(const Proposal& proposal, std::string_view context) {
  return "skill=" + proposal.skill + "\nargument=" + proposal.argument +
         "\nthought=" + proposal.thought + "\n" + text::canonical_lf(context);
}

std::string judge_request(std::string_view judged_text) {
  return text::canonical_lf(judged_text);
}

std::string answer_request(std::string_view context) {
  return text::canonical_lf(context);
}

std::string request_digest(std::string_view capability, std::string_view canonical_args) {
  std::string keyed(capability);
  keyed.push_back('\n');
  keyed.append(canonical_args);
  return text::fnv1a64_hex(keyed);
}

ordered_json proposals_to_json(const std::vector<Proposal>& proposals) {
  ordered_json items = ordered_json::array();
  for (const Proposal& p : proposals) {
    ordered_json item;
    item["thought"] = p.thought;
    item["skill"] = p.skill;
    item["argument"] = p.argument;
    item["semantic_score"] = p.semantic_score;
    items.push_back(std::move(item));
  }
  ordered_json payload;
  payload["proposals"] = std::move(items);
  return payload;
}

std::vector<Proposal> proposals_from_json(const ordered_json& payload) {
  std::vector<Proposal> out;
  for (const auto& item : payload.at("proposals")) {
    Proposal p;
    p.thought = item.at("thought").get<std::string>();
    p.skill = item.at("skill").get<std::string>();
    p.argument = item.at("argument").get<std::string>();
    p.semantic_score =
        clamp_score(item.at("semantic_score").get<double>(), 0.0, 1.0, "proposal");
    out.push_back(std::move(p));
  }
  return out;
}

ordered_json outcome_to_json(const SimulationOutcome& outcome) {
  ordered_json payload;
  payload["observation"] = outcome.observation;
  payload["valuation"] = outcome.valuation;
  if (outcome.answer) payload["answer"] = *outcome.answer;
  return payload;
}

SimulationOutcome outcome_from_json(const ordered_json& payload) {
  SimulationOutcome outcome;
  outcome.observation = payload.at("observation").get<std::string>();
  outcome.valuation = clamp_valuation(payload.at("valuation").get<int>(), "simulate");
  if (payload.contains("answer") && !payload.at("answer").is_null())
    outcome.answer = payload.at("answer").get<std::string>();
  return outcome;
}

// ---------------------------------------------------------------------------
// ScriptedFixture
// ---------------------------------------------------------------------------

void ScriptedFixture::add(const std::string& capability, const std::string& canonical_args,
                          ordered_json response) {
  std::string digest = request_digest(capability, canonical_args);
  auto [it, inserted] = entries_.try_emplace(digest, Entry{capability, std::move(response)});
  if (inserted) order_.push_back(digest);
}

void ScriptedFixture::add_propose(std::string_view context, int k,
                                  const std::vector<Proposal>& proposals) {
  add(kPropose, propose_request(context, k), proposals_to_json(proposals));
}

void ScriptedFixture::add_simulate(const Proposal& proposal, std::string_view context,
                                   const SimulationOutcome& outcome) {
  add(kSimulate, simulate_request(proposal, context), outcome_to_json(outcome));
}

void ScriptedFixture::add_judge(std::string_view judged_text, double score) {
  ordered_json payload;
  payload["score"] = score;
  add(kJudge, judge_request(judged_text), std::move(payload));
}

void ScriptedFixture::add_answer(std::string_view context, std::string_view answer_text) {
  ordered_json payload;
  payload["text"] = std::string(answer_text);
  add(kAnswer, answer_request(context), std::move(payload));
}

const ordered_json* ScriptedFixture::find(const std::string& digest) const {
  auto it = entries_.find(digest);
  return it == entries_.end() ? nullptr : &it->second.response;
}

ScriptedFixture ScriptedFixture::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open fixture file " + path.string());
  ScriptedFixture fixture;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    ordered_json record = ordered_json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.contains("digest") ||
        !record.contains("capability") || !record.contains("response"))
      fail(ErrorCode::BadInput,
           path.string() + ":" + std::to_string(lineno) + ": malformed fixture record");
    std::string digest = record.at("digest").get<std::string>();
    auto [it, inserted] = fixture.entries_.try_emplace(
        digest, Entry{record.at("capability").get<std::string>(), record.at("response")});
    if (inserted) fixture.order_.push_back(digest);
  }
  return fixture;
}

void ScriptedFixture::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write fixture file " + path.string());
  for (const std::string& digest : order_) {
    const Entry& entry = entries_.at(digest);
    ordered_json record;
    record["digest"] = digest;
    record["capability"] = entry.capability;
    record["response"] = entry.response;
    out << record.dump() << '\n';
  }
  if (!out) fail(ErrorCode::IoError, "failed writing fixture file " + path.string());
}

// ---------------------------------------------------------------------------
// ScriptedOracle
// ---------------------------------------------------------------------------

namespace {

class ScriptedOracle : public PolicyOracle {
public:
  explicit ScriptedOracle(ScriptedFixture fixture) : fixture_(std::move(fixture)) {}

  std::vector<Proposal> propose(const std::string& context, int k) override {
    const ordered_json* response = lookup(kPropose, propose_request(context, k));
    if (!response) {
      Proposal fallback;
      fallback.thought = "observe";
      fallback.skill = "sequence_scan";
      fallback.argument = "";
      fallback.semantic_score = 0.5;
      return {fallback};
    }
    std::vector<Proposal> proposals = proposals_from_json(*response);
    if (proposals.empty())
      fail(ErrorCode::FixtureMiss, "fixture propose entry holds no proposals");
    if (static_cast<int>(proposals.size()) > k)
      proposals.resize(static_cast<std::size_t>(k));
    return proposals;
  }

  SimulationOutcome simulate(const Proposal& proposal, const std::string& context) override {
    const ordered_json* response = lookup(kSimulate, simulate_request(proposal, context));
    if (!response) return SimulationOutcome{"observe", 0, std::nullopt};
    return outcome_from_json(*response);
  }

  double judge(const std::string& judged_text) override {
    const ordered_json* response = lookup(kJudge, judge_request(judged_text));
    if (!response) return 0.0;
    return clamp_score(response->at("score").get<double>(), 0.0, 1.0, "judge");
  }

  std::string answer(const std::string& context) override {
    const ordered_json* response = lookup(kAnswer, answer_request(context));
    if (!response) return "";
    return response->at("text").get<std::string>();
  }

private:
  const ordered_json* lookup(const char* capability, const std::string& canonical_args) {
    std::string digest = request_digest(capability, canonical_args);
    const ordered_json* response = fixture_.find(digest);
    if (!response && fixture_.strict)
      fail(ErrorCode::FixtureMiss,
           std::string("no fixture entry for ") + capability + " digest " + digest);
    return response;
  }

  ScriptedFixture fixture_;
};

}  // namespace

std::unique_ptr<PolicyOracle> scripted_oracle(ScriptedFixture fixture) {
  return std::make_unique<ScriptedOracle>(std::move(fixture));
}

// ---------------------------------------------------------------------------
// RecordingOracle
// ---------------------------------------------------------------------------

std::vector<Proposal> RecordingOracle::propose(const std::string& context, int k) {
  std::vector<Proposal> proposals = inner_.propose(context, k);
  std::lock_guard<std::mutex> lock(mutex_);
  sink_.add_propose(context, k, proposals);
  return proposals;
}

SimulationOutcome RecordingOracle::simulate(const Proposal& proposal,
                                            const std::string& context) {
  SimulationOutcome outcome = inner_.simulate(proposal, context);
  std::lock_guard<std::mutex> lock(mutex_);
  sink_.add_simulate(proposal, context, outcome);
  return outcome;
}

double RecordingOracle::judge(const std::string& judged_text) {
  double score = inner_.judge(judged_text);
  std::lock_guard<std::mutex> lock(mutex_);
  sink_.add_judge(judged_text, score);
  return score;
}

std::string RecordingOracle::answer(const std::string& context) {
  std::string text = inner_.answer(context);
  std::lock_guard<std::mutex> lock(mutex_);
  sink_.add_answer(context, text);
  return text;
}

}  // namespace nest
