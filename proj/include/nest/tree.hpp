#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "nest/trajectory.hpp"

// Reasoning-tree arena with UCT selection, value backpropagation, path
// extraction, and shared-prefix token accounting. Mutation is single-writer;
// the tree is a plain value and may be copied/moved across threads, and
// read-only queries are safe to run concurrently.

namespace nest {

using NodeId = std::uint32_t;
inline constexpr NodeId kRootId = 0;

enum class NodeKind { Root, Step };
enum class NodeStatus { Open, Terminal, Exhausted };

const char* node_kind_name(NodeKind kind);
const char* node_status_name(NodeStatus status);

struct NodePayload {
  NodeKind kind = NodeKind::Step;
  std::optional<std::string> skill;  // required for Step, absent for Root
  std::string argument;
  std::optional<std::string> observation;
  std::optional<int> valuation;  // 0..100; required when observation present
  std::optional<std::string> answer;

  static NodePayload root();
  static NodePayload step(std::string skill, std::string argument);
};

struct ReasoningNode {
  NodeId id = 0;
  std::optional<NodeId> parent;
  std::vector<NodeId> children;  // creation order
  NodePayload payload;
  std::uint64_t visits = 0;    // N
  double value_sum = 0.0;      // W, accumulated from values in [0, 1]
  double semantic_score = 1.0; // s in [0, 1]
  std::uint32_t depth = 0;
  NodeStatus status = NodeStatus::Open;
};

struct SearchConfig {
  double c_uct = 1.4142135623730951;  // sqrt(2)
  double lambda_semantic = 0.5;
  int k_expand = 3;
  int max_turns = 12;
  int budget_iterations = 16;
  int success_threshold = 80;
  bool stop_on_success = true;
};

// Throws Error(InvalidConfig) naming the first field out of range.
void validate_config(const SearchConfig& config);

struct SharedPrefixStats {
  std::uint64_t shared_tokens = 0;
  std::uint64_t independent_tokens = 0;
  double savings_ratio = 0.0;  // 1 - shared/independent, 0 when independent = 0
};

struct ReasoningTree {
  std::string task_id;
  std::uint64_t rng_seed = 0;
  SearchConfig config;
  std::vector<ReasoningNode> nodes;  // arena; index == NodeId

  bool contains(NodeId id) const { return id < nodes.size(); }
  const ReasoningNode& node(NodeId id) const;
  std::size_t size() const { return nodes.size(); }
  std::vector<NodeId> leaves() const;
};

ReasoningTree create_tree(std::string task_id, std::uint64_t seed, SearchConfig config);

NodeId add_child(ReasoningTree& tree, NodeId parent, NodePayload payload,
                 double semantic_score);

// +infinity for an unvisited node; otherwise
// W/N + lambda * s + c * sqrt(ln(N_parent) / N_child), with the exploration
// term zero while the parent is unvisited. Root has no selection score.
double uct_value(const ReasoningTree& tree, NodeId node);

// Descends from the root, at each step taking the child with maximal
// uct_value (unvisited children first, ties to the lowest id), until it
// reaches a node with no children or with Terminal status.
NodeId select_leaf(const ReasoningTree& tree);

// Adds one visit and `value` (in [0, 1]) to `leaf` and every ancestor.
void backpropagate(ReasoningTree& tree, NodeId leaf, double value);

// One turn per non-root node on the root->node path; the doc's answer comes
// from the target node's payload.
traj::TrajectoryDoc extract_trajectory(const ReasoningTree& tree, NodeId node);

SharedPrefixStats prefix_stats(const ReasoningTree& tree,
                               const std::unordered_map<NodeId, std::uint64_t>& token_count_of);

// Engine plumbing: records a simulation outcome on a step node and flips it
// to Terminal when it carries an answer scored at or above the threshold.
void attach_simulation(ReasoningTree& tree, NodeId node, std::string observation,
                       int valuation, std::optional<std::string> answer,
                       int success_threshold);

void mark_exhausted(ReasoningTree& tree, NodeId node);

// Snapshot export: one record per node, stable field order
// (id, parent, children, kind, skill, argument, observation, valuation,
// visits, value_sum, semantic_score, depth, status), LF line endings.
std::string snapshot_jsonl(const ReasoningTree& tree);

}  // namespace nest
