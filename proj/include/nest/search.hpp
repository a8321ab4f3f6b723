#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "nest/oracle.hpp"
#include "nest/reward.hpp"
#include "nest/tree.hpp"

// Orchestrates the nested tree-search loop over a policy oracle, plus the
// sequential chain-of-thought and parallel best-of-N baseline modes.

namespace nest {

enum class Modality { Audio, Video, Image, Text };

const char* modality_name(Modality m);
std::optional<Modality> modality_from_name(std::string_view name);

struct TaskRecord {
  std::string id;                       // non-empty
  std::set<Modality> modalities;        // at least one
  std::vector<std::string> context_refs;
  std::string question;                 // non-empty
  GroundTruth ground_truth;
  MetricKind metric = MetricKind::AccExact;
};

// Throws Error(BadInput) naming the violated field.
void validate_task(const TaskRecord& task);

enum class TerminationReason { Success, BudgetExhausted };
const char* termination_reason_name(TerminationReason reason);

struct SearchResult {
  ReasoningTree tree;
  std::optional<NodeId> best_leaf;
  std::optional<std::string> best_answer;
  std::optional<int> best_valuation;
  int iterations_used = 0;
  TerminationReason terminated_by = TerminationReason::BudgetExhausted;
};

enum class AggregationRule { MajorityVote, BestReward };

struct ChainResult {
  std::vector<std::string> steps;
  std::string answer;
};

struct Candidate {
  std::string answer;
  std::optional<double> reward;
};

struct ParallelResult {
  std::string answer;
  std::vector<Candidate> candidates;
};

// The single canonical context representation handed to propose/simulate/
// answer: task id, seed, context refs, question, then the serialized
// trajectory of the path (empty for the root).
std::string oracle_context(const TaskRecord& task, const traj::TrajectoryDoc& path,
                           std::uint64_t seed);

// One iteration = select a leaf, expand it with up to k_expand proposals,
// simulate every new child, backpropagate each child's valuation/100. Stops
// early when a child turns Terminal and stop_on_success is set.
SearchResult run_nested(const TaskRecord& task, PolicyOracle& policy,
                        const SearchConfig& config, std::uint64_t seed);

// Linear propose/simulate chain; stops when a simulation yields an answer, or
// forces one answer call after max_steps.
ChainResult run_cot(const TaskRecord& task, PolicyOracle& policy, int max_steps,
                    std::uint64_t seed = 0);

// K independent chains with derived seeds seed+0..seed+K-1, aggregated by
// majority vote or by outcome reward against the task's ground truth.
ParallelResult run_parallel(const TaskRecord& task, PolicyOracle& policy, int k,
                            AggregationRule rule, std::uint64_t seed, int max_steps = 8);

// MajorityVote: most frequent normalized answer, ties to the lexicographically
// smallest. BestReward: maximal reward (all rewards required), same tie rule.
std::string aggregate(const std::vector<Candidate>& candidates, AggregationRule rule);

}  // namespace nest
