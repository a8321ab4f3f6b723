#include "nest/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "nest/error.hpp"
#include "nest/text.hpp"

namespace nest {

namespace {

using ordered_json = nlohmann::ordered_json;

void check_payload(const NodePayload& payload) {
  if (payload.kind == NodeKind::Root) {
    if (payload.skill || payload.observation || payload.valuation)
      fail(ErrorCode::InvariantViolation, "root payload carries no skill/observation/valuation");
    return;
  }
  if (!payload.skill || !text::is_snake_ident(*payload.skill))
    fail(ErrorCode::InvariantViolation, "step payload requires a lowercase snake_case skill");
  if (payload.observation && !payload.valuation)
    fail(ErrorCode::InvariantViolation, "a step with an observation must carry a valuation");
  if (payload.valuation && (*payload.valuation < 0 || *payload.valuation > 100))
    fail(ErrorCode::InvariantViolation, "valuation must lie in [0, 100]");
}

}  // namespace

const char* node_kind_name(NodeKind kind) {
  return kind == NodeKind::Root ? "root" : "step";
}

const char* node_status_name(NodeStatus status) {
  switch (status) {
    case NodeStatus::Open: return "open";
    case NodeStatus::Terminal: return "terminal";
    case NodeStatus::Exhausted: return "exhausted";
  }
  return "open";
}

NodePayload NodePayload::root() {
  NodePayload payload;
  payload.kind = NodeKind::Root;
  return payload;
}

NodePayload NodePayload::step(std::string skill, std::string argument) {
  NodePayload payload;
  payload.kind = NodeKind::Step;
  payload.skill = std::move(skill);
  payload.argument = std::move(argument);
  return payload;
}

void validate_config(const SearchConfig& config) {
  if (!(config.c_uct > 0.0))
    fail(ErrorCode::InvalidConfig, "c_uct must be > 0");
  if (!(config.lambda_semantic >= 0.0))
    fail(ErrorCode::InvalidConfig, "lambda_semantic must be >= 0");
  if (config.k_expand < 1)
    fail(ErrorCode::InvalidConfig, "k_expand must be >= 1");
  if (config.max_turns < 1)
    fail(ErrorCode::InvalidConfig, "max_turns must be >= 1");
  if (config.budget_iterations < 1)
    fail(ErrorCode::InvalidConfig, "budget_iterations must be >= 1");
  if (config.success_threshold < 0 || config.success_threshold > 100)
    fail(ErrorCode::InvalidConfig, "success_threshold must lie in [0, 100]");
}

const ReasoningNode& ReasoningTree::node(NodeId id) const {
  if (!contains(id))
    fail(ErrorCode::UnknownNode, "node " + std::to_string(id) + " does not exist");
  return nodes[id];
}

std::vector<NodeId> ReasoningTree::leaves() const {
  std::vector<NodeId> out;
  for (const ReasoningNode& n : nodes)
    if (n.children.empty()) out.push_back(n.id);
  return out;
}

ReasoningTree create_tree(std::string task_id, std::uint64_t seed, SearchConfig config) {
  validate_config(config);
  ReasoningTree tree;
  tree.task_id = std::move(task_id);
  tree.rng_seed = seed;
  tree.config = config;
  ReasoningNode root;
  root.id = kRootId;
  root.payload = NodePayload::root();
  root.semantic_score = 1.0;
  tree.nodes.push_back(std::move(root));
  return tree;
}

NodeId add_child(ReasoningTree& tree, NodeId parent, NodePayload payload,
                 double semantic_score) {
  if (!tree.contains(parent))
    fail(ErrorCode::UnknownParent, "parent " + std::to_string(parent) + " does not exist");
  if (tree.nodes[parent].depth >= static_cast<std::uint32_t>(tree.config.max_turns))
    fail(ErrorCode::DepthExceeded,
         "parent depth " + std::to_string(tree.nodes[parent].depth) +
             " reached max_turns " + std::to_string(tree.config.max_turns));
  if (!(semantic_score >= 0.0 && semantic_score <= 1.0))
    fail(ErrorCode::ScoreOutOfRange, "semantic_score must lie in [0, 1]");
  if (payload.kind != NodeKind::Step)
    fail(ErrorCode::InvariantViolation, "only step nodes may be added as children");
  check_payload(payload);

  NodeId id = static_cast<NodeId>(tree.nodes.size());
  ReasoningNode node;
  node.id = id;
  node.parent = parent;
  node.payload = std::move(payload);
  node.semantic_score = semantic_score;
  node.depth = tree.nodes[parent].depth + 1;
  tree.nodes.push_back(std::move(node));
  tree.nodes[parent].children.push_back(id);
  return id;
}

double uct_value(const ReasoningTree& tree, NodeId node) {
  const ReasoningNode& n = tree.node(node);
  if (!n.parent)
    fail(ErrorCode::RootNode, "the root has no selection score");
  if (n.visits == 0) return std::numeric_limits<double>::infinity();
  const ReasoningNode& parent = tree.nodes[*n.parent];
  double mean = n.value_sum / static_cast<double>(n.visits);
  double exploration = 0.0;
  if (parent.visits > 0)
    exploration = tree.config.c_uct *
                  std::sqrt(std::log(static_cast<double>(parent.visits)) /
                            static_cast<double>(n.visits));
  return mean + tree.config.lambda_semantic * n.semantic_score + exploration;
}

NodeId select_leaf(const ReasoningTree& tree) {
  NodeId current = kRootId;
  for (;;) {
    const ReasoningNode& n = tree.node(current);
    if (n.status == NodeStatus::Terminal || n.children.empty()) return current;
    NodeId best = n.children.front();
    double best_value = uct_value(tree, best);
    for (std::size_t i = 1; i < n.children.size(); ++i) {
      NodeId child = n.children[i];
      double value = uct_value(tree, child);
      if (value > best_value) {  // ties keep the lowest id
        best = child;
        best_value = value;
      }
    }
    current = best;
  }
}

void backpropagate(ReasoningTree& tree, NodeId leaf, double value) {
  if (!tree.contains(leaf))
    fail(ErrorCode::UnknownNode, "node " + std::to_string(leaf) + " does not exist");
  if (!(value >= 0.0 && value <= 1.0))
    fail(ErrorCode::ValueOutOfRange, "backpropagated value must lie in [0, 1]");
  std::optional<NodeId> current = leaf;
  while (current) {
    ReasoningNode& n = tree.nodes[*current];
    n.visits += 1;
    n.value_sum += value;
    current = n.parent;
  }
}

traj::TrajectoryDoc extract_trajectory(const ReasoningTree& tree, NodeId node) {
  const ReasoningNode& target = tree.node(node);

  std::vector<NodeId> path;
  for (std::optional<NodeId> current = node; current; current = tree.nodes[*current].parent)
    path.push_back(*current);
  std::reverse(path.begin(), path.end());

  traj::TrajectoryDoc doc;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const ReasoningNode& step = tree.nodes[path[i]];
    if (!step.payload.skill)
      fail(ErrorCode::InvariantViolation,
           "step node " + std::to_string(step.id) + " has no skill");
    traj::TurnBlock turn;
    turn.index = static_cast<int>(i);
    turn.skill = *step.payload.skill;
    turn.argument = step.payload.argument;
    turn.observation = step.payload.observation;
    turn.score = step.payload.valuation;
    doc.turns.push_back(std::move(turn));
  }
  doc.answer = target.payload.answer;
  return doc;
}

SharedPrefixStats prefix_stats(const ReasoningTree& tree,
                               const std::unordered_map<NodeId, std::uint64_t>& token_count_of) {
  SharedPrefixStats stats;
  std::vector<std::uint64_t> path_sum(tree.nodes.size(), 0);
  for (const ReasoningNode& n : tree.nodes) {
    auto it = token_count_of.find(n.id);
    if (it == token_count_of.end())
      fail(ErrorCode::MissingCount, "no token count for node " + std::to_string(n.id));
    stats.shared_tokens += it->second;
    path_sum[n.id] = (n.parent ? path_sum[*n.parent] : 0) + it->second;
    if (n.children.empty()) stats.independent_tokens += path_sum[n.id];
  }
  stats.savings_ratio =
      stats.independent_tokens == 0
          ? 0.0
          : 1.0 - static_cast<double>(stats.shared_tokens) /
                      static_cast<double>(stats.independent_tokens);
  return stats;
}

void attach_simulation(ReasoningTree& tree, NodeId node, std::string observation,
                       int valuation, std::optional<std::string> answer,
                       int success_threshold) {
  if (!tree.contains(node))
    fail(ErrorCode::UnknownNode, "node " + std::to_string(node) + " does not exist");
  if (node == kRootId)
    fail(ErrorCode::InvariantViolation, "the root cannot carry a simulation outcome");
  if (valuation < 0 || valuation > 100)
    fail(ErrorCode::RangeError, "valuation must lie in [0, 100]");
  ReasoningNode& n = tree.nodes[node];
  n.payload.observation = std::move(observation);
  n.payload.valuation = valuation;
  n.payload.answer = std::move(answer);
  if (n.payload.answer && valuation >= success_threshold)
    n.status = NodeStatus::Terminal;
}

void mark_exhausted(ReasoningTree& tree, NodeId node) {
  if (!tree.contains(node))
    fail(ErrorCode::UnknownNode, "node " + std::to_string(node) + " does not exist");
  if (tree.nodes[node].status == NodeStatus::Open)
    tree.nodes[node].status = NodeStatus::Exhausted;
}

std::string snapshot_jsonl(const ReasoningTree& tree) {
  std::string out;
  for (const ReasoningNode& n : tree.nodes) {
    ordered_json record;
    record["id"] = n.id;
    if (n.parent)
      record["parent"] = *n.parent;
    else
      record["parent"] = nullptr;
    record["children"] = n.children;
    record["kind"] = node_kind_name(n.payload.kind);
    record["skill"] = n.payload.skill ? ordered_json(*n.payload.skill) : ordered_json(nullptr);
    record["argument"] = n.payload.argument;
    record["observation"] =
        n.payload.observation ? ordered_json(*n.payload.observation) : ordered_json(nullptr);
    record["valuation"] =
        n.payload.valuation ? ordered_json(*n.payload.valuation) : ordered_json(nullptr);
    record["visits"] = n.visits;
    record["value_sum"] = n.value_sum;
    record["semantic_score"] = n.semantic_score;
    record["depth"] = n.depth;
    record["status"] = node_status_name(n.status);
    out += record.dump();
    out += '\n';
  }
  return out;
}

}  // namespace nest
