#include "nest/search.hpp"

#include <algorithm>
#include <iostream>
#include <map>

#include "nest/error.hpp"
#include "nest/text.hpp"

namespace nest {

namespace {

std::string wrap_oracle_error(const std::string& stage, const TaskRecord& task,
                              NodeId node, const std::string& detail) {
  return stage + " failed for task '" + task.id + "' at node " + std::to_string(node) +
         ": " + detail;
}

// Enforces the 1..k contract on whatever the oracle returned.
std::vector<Proposal> checked_proposals(std::vector<Proposal> proposals, int k,
                                        const TaskRecord& task, NodeId node) {
  if (proposals.empty())
    fail(ErrorCode::OracleFailure,
         wrap_oracle_error("propose", task, node, "oracle returned no proposals"));
  if (static_cast<int>(proposals.size()) > k) {
    std::cerr << "[search] oracle returned " << proposals.size() << " proposals, keeping " << k
              << "\n";
    proposals.resize(static_cast<std::size_t>(k));
  }
  return proposals;
}

struct BestPick {
  std::optional<NodeId> id;
  int valuation = -1;
  std::uint32_t depth = 0;

  void offer(const ReasoningNode& node) {
    int v = node.payload.valuation.value_or(0);
    if (!id || v > valuation || (v == valuation && node.depth < depth)) {
      id = node.id;
      valuation = v;
      depth = node.depth;
    }
  }
};

}  // namespace

const char* modality_name(Modality m) {
  switch (m) {
    case Modality::Audio: return "audio";
    case Modality::Video: return "video";
    case Modality::Image: return "image";
    case Modality::Text: return "text";
  }
  return "text";
}

std::optional<Modality> modality_from_name(std::string_view name) {
  if (name == "audio") return Modality::Audio;
  if (name == "video") return Modality::Video;
  if (name == "image") return Modality::Image;
  if (name == "text") return Modality::Text;
  return std::nullopt;
}

void validate_task(const TaskRecord& task) {
  if (task.id.empty()) fail(ErrorCode::BadInput, "task id must be non-empty");
  if (task.modalities.empty())
    fail(ErrorCode::BadInput, "task '" + task.id + "' needs at least one modality");
  if (task.question.empty())
    fail(ErrorCode::BadInput, "task '" + task.id + "' has an empty question");
}

const char* termination_reason_name(TerminationReason reason) {
  return reason == TerminationReason::Success ? "success" : "budget-exhausted";
}

std::string oracle_context(const TaskRecord& task, const traj::TrajectoryDoc& path,
                           std::uint64_t seed) {
  std::string refs;
  for (std::size_t i = 0; i < task.context_refs.size(); ++i) {
    if (i) refs.push_back(',');
    refs += task.context_refs[i];
  }
  std::string trajectory =
      (path.turns.empty() && !path.answer) ? std::string() : traj::serialize(path);
  return "task: " + task.id + "\nseed: " + std::to_string(seed) + "\nrefs: " + refs +
         "\nquestion: " + task.question + "\ntrajectory:\n" + trajectory;
}

SearchResult run_nested(const TaskRecord& task, PolicyOracle& policy,
                        const SearchConfig& config, std::uint64_t seed) {
  if (config.budget_iterations < 1)
    fail(ErrorCode::BudgetZero, "budget_iterations must be >= 1");
  validate_task(task);

  SearchResult result;
  result.tree = create_tree(task.id, seed, config);
  ReasoningTree& tree = result.tree;

  for (int iteration = 1; iteration <= config.budget_iterations; ++iteration) {
    result.iterations_used = iteration;
    NodeId leaf = select_leaf(tree);
    const ReasoningNode& leaf_node = tree.nodes[leaf];

    if (leaf_node.status == NodeStatus::Terminal) {
      // Re-selection of a solved leaf only reinforces its value.
      backpropagate(tree, leaf, leaf_node.payload.valuation.value_or(0) / 100.0);
      continue;
    }
    if (leaf_node.depth >= static_cast<std::uint32_t>(config.max_turns)) {
      mark_exhausted(tree, leaf);
      backpropagate(tree, leaf, leaf_node.payload.valuation.value_or(0) / 100.0);
      continue;
    }

    std::string context = oracle_context(task, extract_trajectory(tree, leaf), seed);

    std::vector<Proposal> raw;
    try {
      raw = policy.propose(context, config.k_expand);
    } catch (const Error& e) {
      fail(ErrorCode::OracleFailure, wrap_oracle_error("propose", task, leaf, e.what()));
    }
    std::vector<Proposal> proposals =
        checked_proposals(std::move(raw), config.k_expand, task, leaf);

    std::vector<NodeId> children;
    children.reserve(proposals.size());
    for (const Proposal& proposal : proposals) {
      double prior = clamp_score(proposal.semantic_score, 0.0, 1.0, "proposal");
      children.push_back(
          add_child(tree, leaf, NodePayload::step(proposal.skill, proposal.argument), prior));
    }

    // Child simulations merge in ascending id order so the post-iteration
    // state never depends on completion order.
    bool success = false;
    for (std::size_t i = 0; i < children.size(); ++i) {
      SimulationOutcome outcome;
      try {
        outcome = policy.simulate(proposals[i], context);
      } catch (const Error& e) {
        fail(ErrorCode::OracleFailure,
             wrap_oracle_error("simulate", task, children[i], e.what()));
      }
      attach_simulation(tree, children[i], outcome.observation, outcome.valuation,
                        outcome.answer, config.success_threshold);
      backpropagate(tree, children[i], outcome.valuation / 100.0);
      if (tree.nodes[children[i]].status == NodeStatus::Terminal) success = true;
    }

    if (success && config.stop_on_success) {
      result.terminated_by = TerminationReason::Success;
      break;
    }
  }

  BestPick terminal, answered;
  for (const ReasoningNode& node : tree.nodes) {
    if (node.status == NodeStatus::Terminal) terminal.offer(node);
    if (node.payload.answer) answered.offer(node);
  }
  const BestPick& best = terminal.id ? terminal : answered;
  if (best.id) {
    result.best_leaf = best.id;
    result.best_answer = tree.nodes[*best.id].payload.answer;
    result.best_valuation = tree.nodes[*best.id].payload.valuation;
  }
  return result;
}

ChainResult run_cot(const TaskRecord& task, PolicyOracle& policy, int max_steps,
                    std::uint64_t seed) {
  if (max_steps < 1) fail(ErrorCode::InvalidConfig, "max_steps must be >= 1");
  validate_task(task);

  ChainResult chain;
  traj::TrajectoryDoc path;
  for (int step = 1; step <= max_steps; ++step) {
    std::string context = oracle_context(task, path, seed);
    std::vector<Proposal> proposals;
    SimulationOutcome outcome;
    try {
      proposals = policy.propose(context, 1);
      if (proposals.empty())
        fail(ErrorCode::OracleFailure, "oracle returned no proposals");
      outcome = policy.simulate(proposals.front(), context);
    } catch (const Error& e) {
      fail(ErrorCode::OracleFailure,
           "chain step " + std::to_string(step) + " failed for task '" + task.id +
               "': " + e.what());
    }
    const Proposal& proposal = proposals.front();

    traj::TurnBlock turn;
    turn.index = step;
    turn.skill = proposal.skill;
    turn.argument = proposal.argument;
    turn.observation = outcome.observation;
    turn.score = outcome.valuation;
    path.turns.push_back(std::move(turn));

    chain.steps.push_back(proposal.thought.empty()
                              ? proposal.skill + "(" + proposal.argument + ")"
                              : proposal.thought);
    if (outcome.answer) {
      chain.answer = *outcome.answer;
      return chain;
    }
  }
  try {
    chain.answer = policy.answer(oracle_context(task, path, seed));
  } catch (const Error& e) {
    fail(ErrorCode::OracleFailure,
         "forced answer failed for task '" + task.id + "': " + e.what());
  }
  return chain;
}

ParallelResult run_parallel(const TaskRecord& task, PolicyOracle& policy, int k,
                            AggregationRule rule, std::uint64_t seed, int max_steps) {
  if (k < 1) fail(ErrorCode::InvalidConfig, "k must be >= 1");
  ParallelResult result;
  for (int i = 0; i < k; ++i) {
    ChainResult chain = run_cot(task, policy, max_steps, seed + static_cast<std::uint64_t>(i));
    Candidate candidate;
    candidate.answer = chain.answer;
    candidate.reward = outcome_reward(chain.answer, task.ground_truth, task.metric).reward;
    result.candidates.push_back(std::move(candidate));
  }
  result.answer = aggregate(result.candidates, rule);
  return result;
}

std::string aggregate(const std::vector<Candidate>& candidates, AggregationRule rule) {
  if (candidates.empty()) fail(ErrorCode::EmptyCandidates, "no candidates to aggregate");

  if (rule == AggregationRule::MajorityVote) {
    std::map<std::string, std::size_t> counts;
    std::map<std::string, std::string> representative;  // smallest original text
    for (const Candidate& candidate : candidates) {
      std::string key = text::normalize_match(candidate.answer);
      ++counts[key];
      auto it = representative.find(key);
      if (it == representative.end() || candidate.answer < it->second)
        representative[key] = candidate.answer;
    }
    const std::string* best_key = nullptr;
    std::size_t best_count = 0;
    for (const auto& [key, count] : counts) {
      if (count > best_count) {  // map iterates keys in order: ties keep smallest
        best_key = &key;
        best_count = count;
      }
    }
    return representative.at(*best_key);
  }

  const Candidate* best = nullptr;
  for (const Candidate& candidate : candidates) {
    if (!candidate.reward)
      fail(ErrorCode::MissingRewards, "best-reward aggregation needs a reward per candidate");
    if (!best || *candidate.reward > *best->reward ||
        (*candidate.reward == *best->reward && candidate.answer < best->answer))
      best = &candidate;
  }
  return best->answer;
}

}  // namespace nest
