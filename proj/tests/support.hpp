#pragma once

// Shared test machinery: deterministic generators, independent selection and
// structure oracles, the grammar corruption enumerator, and a tiny process
// runner for CLI checks. Oracles here recompute expectations on their own
// and must stay independent of the library code paths they check.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "nest/tree.hpp"
#include "nest/trajectory.hpp"

namespace testsup {

// mt19937_64 keeps its standardized sequence everywhere; derived draws below
// avoid std distributions, whose outputs vary across standard libraries.
struct Rng {
  std::mt19937_64 eng;
  explicit Rng(std::uint64_t seed) : eng(seed) {}

  std::uint64_t next() { return eng(); }

  int int_in(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool chance(double p) { return unit() < p; }

  template <typename T>
  const T& pick(const std::vector<T>& items) {
    return items[static_cast<std::size_t>(next() % items.size())];
  }
};

// ---------------------------------------------------------------------------
// Random trees (built through the public API) and structural checking
// ---------------------------------------------------------------------------

struct RandomTreeOptions {
  int max_nodes = 64;
  int max_backprops = 32;
  bool with_terminals = true;
};

struct Backprop {
  nest::NodeId leaf;
  double value;
};

inline nest::ReasoningTree random_tree(Rng& rng, const RandomTreeOptions& options,
                                       std::vector<Backprop>* log = nullptr) {
  nest::SearchConfig config;
  config.max_turns = 64;
  config.c_uct = 0.25 + rng.unit() * 2.0;
  config.lambda_semantic = rng.unit();
  nest::ReasoningTree tree = nest::create_tree("random", rng.next(), config);

  int nodes = rng.int_in(1, options.max_nodes);
  for (int i = 1; i < nodes; ++i) {
    nest::NodeId parent =
        static_cast<nest::NodeId>(rng.next() % static_cast<std::uint64_t>(tree.size()));
    nest::NodeId id = nest::add_child(
        tree, parent,
        nest::NodePayload::step("sequence_scan", "probe " + std::to_string(i)), rng.unit());
    if (rng.chance(0.5)) {
      int valuation = rng.int_in(0, 100);
      std::optional<std::string> answer;
      if (options.with_terminals && rng.chance(0.3))
        answer = "candidate " + std::to_string(id);
      nest::attach_simulation(tree, id, "hint " + std::to_string(id), valuation, answer,
                              tree.config.success_threshold);
    }
  }

  int backprops = rng.int_in(0, options.max_backprops);
  for (int i = 0; i < backprops; ++i) {
    nest::NodeId leaf =
        static_cast<nest::NodeId>(rng.next() % static_cast<std::uint64_t>(tree.size()));
    double value = rng.unit();
    nest::backpropagate(tree, leaf, value);
    if (log) log->push_back({leaf, value});
  }
  return tree;
}

// Returns a description of the first structural inconsistency, if any.
inline std::optional<std::string> check_structure(const nest::ReasoningTree& tree) {
  if (tree.nodes.empty()) return "tree has no nodes";
  if (tree.nodes[0].parent) return "root has a parent";
  std::vector<int> seen(tree.nodes.size(), 0);
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const nest::ReasoningNode& node = tree.nodes[i];
    if (node.id != i) return "node id does not match arena slot";
    if (i > 0) {
      if (!node.parent) return "non-root node without parent";
      if (*node.parent >= i) return "parent created after child";
      const nest::ReasoningNode& parent = tree.nodes[*node.parent];
      if (node.depth != parent.depth + 1) return "depth is not parent depth + 1";
      bool linked = false;
      for (nest::NodeId child : parent.children) linked |= (child == node.id);
      if (!linked) return "parent does not list child";
    }
    nest::NodeId previous = 0;
    for (nest::NodeId child : node.children) {
      if (!tree.contains(child)) return "child id out of range";
      if (child <= previous && previous != 0) return "children not in creation order";
      if (!tree.nodes[child].parent || *tree.nodes[child].parent != node.id)
        return "child does not point back at parent";
      previous = child;
    }
    if (node.value_sum > static_cast<double>(node.visits) + 1e-9)
      return "value sum exceeds visit count";
    if (node.visits > 0) {
      double mean = node.value_sum / static_cast<double>(node.visits);
      if (mean < -1e-12 || mean > 1.0 + 1e-12) return "node mean outside [0, 1]";
    }
    if (node.status == nest::NodeStatus::Terminal) {
      if (!node.payload.answer) return "terminal node without an answer";
      if (node.payload.valuation.value_or(-1) < tree.config.success_threshold)
        return "terminal node below the success threshold";
    }
  }
  // reachability: walk parent chains (parents always precede children)
  for (std::size_t i = 1; i < tree.nodes.size(); ++i) {
    nest::NodeId cursor = static_cast<nest::NodeId>(i);
    std::size_t hops = 0;
    while (tree.nodes[cursor].parent) {
      cursor = *tree.nodes[cursor].parent;
      if (++hops > tree.nodes.size()) return "cycle in parent chain";
    }
    if (cursor != nest::kRootId) return "node not reachable from root";
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Independent selection oracle
// ---------------------------------------------------------------------------

inline double oracle_uct(const nest::ReasoningTree& tree, nest::NodeId id) {
  const nest::ReasoningNode& node = tree.nodes[id];
  if (node.visits == 0) return std::numeric_limits<double>::infinity();
  const nest::ReasoningNode& parent = tree.nodes[*node.parent];
  double exploitation = node.value_sum / static_cast<double>(node.visits);
  double prior = tree.config.lambda_semantic * node.semantic_score;
  double exploration = 0.0;
  if (parent.visits > 0)
    exploration = tree.config.c_uct * std::sqrt(std::log(static_cast<double>(parent.visits)) /
                                                static_cast<double>(node.visits));
  return exploitation + prior + exploration;
}

// Exhaustive argmax descent, one sibling scan at a time.
inline nest::NodeId oracle_select(const nest::ReasoningTree& tree) {
  nest::NodeId cursor = nest::kRootId;
  for (;;) {
    const nest::ReasoningNode& node = tree.nodes[cursor];
    if (node.status == nest::NodeStatus::Terminal || node.children.empty()) return cursor;
    nest::NodeId best = node.children[0];
    for (nest::NodeId child : node.children)
      if (oracle_uct(tree, child) > oracle_uct(tree, best)) best = child;
    cursor = best;
  }
}

// ---------------------------------------------------------------------------
// Random valid trajectory docs
// ---------------------------------------------------------------------------

inline std::string random_words(Rng& rng, int max_words) {
  static const std::vector<std::string> pool = {
      "scan", "the",  "clip", "audio", "drum",  "frame", "left",
      "right", "cue", "track", "tempo", "hold", "shift", "mark"};
  int count = rng.int_in(1, max_words);
  std::string out;
  for (int i = 0; i < count; ++i) {
    if (i) out.push_back(' ');
    out += rng.pick(pool);
  }
  return out;
}

inline nest::traj::TrajectoryDoc random_doc(Rng& rng, int max_turns = 12) {
  static const std::vector<std::string> skills = {
      "audio_transcription", "keyword_spotting", "spatial_grounding",
      "temporal_localization", "sequence_scan", "caption"};
  nest::traj::TrajectoryDoc doc;
  int turns = rng.int_in(0, max_turns);
  bool answered = turns == 0 || rng.chance(0.6);
  for (int i = 1; i <= turns; ++i) {
    nest::traj::TurnBlock turn;
    turn.index = i;
    if (i >= 2 && rng.chance(0.25)) turn.select_ref = rng.int_in(1, i - 1);
    int expansions = rng.int_in(0, 3);
    for (int e = 0; e < expansions; ++e) turn.expansions.push_back(random_words(rng, 5));
    turn.skill = rng.pick(skills);
    if (rng.chance(0.1))
      turn.argument = "";
    else {
      turn.argument = random_words(rng, 4);
      if (rng.chance(0.2)) turn.argument += " (x)";
    }
    if (rng.chance(0.75)) {
      std::vector<std::string> lines;
      int count = rng.int_in(1, 4);
      for (int l = 0; l < count; ++l)
        lines.push_back(rng.chance(0.15) ? std::string() : random_words(rng, 6));
      std::string observation;
      for (std::size_t l = 0; l < lines.size(); ++l) {
        if (l) observation.push_back('\n');
        observation += lines[l];
      }
      turn.observation = observation;
      turn.score = rng.int_in(0, 100);
    }
    if (i >= 2 && rng.chance(0.2)) turn.back_ref = rng.int_in(1, i - 1);
    doc.turns.push_back(std::move(turn));
  }
  if (answered)
    doc.answer = random_words(rng, 4) +
                 (rng.chance(0.3) ? "\n" + random_words(rng, 4) : std::string());
  return doc;
}

// ---------------------------------------------------------------------------
// Grammar corruptions with the line where the first violation must surface
// ---------------------------------------------------------------------------

struct Corruption {
  std::string text;
  int line;  // expected first-violation line (1-based)
  std::string kind;
};

inline std::vector<std::string> split_keep(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string::npos) break;
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;  // serialized docs always end with '\n'
}

inline std::string join_nl(const std::vector<std::string>& lines) {
  std::string out;
  for (const std::string& line : lines) {
    out += line;
    out += '\n';
  }
  return out;
}

// Every corruption produced here must be caught, with the first violation on
// the returned line. Optional-tag deletions are excluded on purpose: removing
// an Expand/Select/Back line leaves a different but valid document.
inline std::vector<Corruption> enumerate_corruptions(const std::string& serialized) {
  std::vector<Corruption> out;
  std::vector<std::string> lines = split_keep(serialized);

  auto with_line = [&lines](std::size_t index, std::string replacement) {
    std::vector<std::string> copy = lines;
    copy[index] = std::move(replacement);
    return join_nl(copy);
  };
  auto without_line = [&lines](std::size_t index) {
    std::vector<std::string> copy = lines;
    copy.erase(copy.begin() + static_cast<std::ptrdiff_t>(index));
    return join_nl(copy);
  };
  auto swapped = [&lines](std::size_t index) {
    std::vector<std::string> copy = lines;
    std::swap(copy[index], copy[index + 1]);
    return join_nl(copy);
  };

  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    int lineno = static_cast<int>(i) + 1;

    if (line.rfind("# Turn ", 0) == 0) {
      out.push_back({with_line(i, "# Tunr " + line.substr(7)), lineno, "typo-header"});
      out.push_back({with_line(i, "# Turn " +
                                      std::to_string(std::atoi(line.c_str() + 7) + 5)),
                     lineno, "index-bump"});
      out.push_back({without_line(i), lineno, "delete-header"});
    } else if (line == "# Answer") {
      out.push_back({with_line(i, "# Answen"), lineno, "typo-answer"});
      out.push_back({without_line(i), lineno, "delete-answer-header"});
    } else if (line.rfind("## Select: Turn ", 0) == 0) {
      out.push_back({with_line(i, "## Selct: " + line.substr(11)), lineno, "typo-select"});
      out.push_back({with_line(i, "## Select: Turn 99"), lineno, "dangling-select"});
    } else if (line.rfind("## Expand: ", 0) == 0) {
      out.push_back({with_line(i, "## Expnd: " + line.substr(11)), lineno, "typo-expand"});
    } else if (line.rfind("## Action: ", 0) == 0) {
      out.push_back({with_line(i, "## Acton: " + line.substr(11)), lineno, "typo-action"});
      out.push_back({without_line(i), lineno, "delete-action"});
      if (i + 1 < lines.size() &&
          (lines[i + 1] == "## Observation" || lines[i + 1].rfind("## Back: ", 0) == 0))
        out.push_back({swapped(i), lineno, "reorder-action"});
    } else if (line == "## Observation") {
      out.push_back({with_line(i, "## Observatio"), lineno, "typo-observation"});
      out.push_back({without_line(i), lineno, "delete-observation"});
    } else if (line.rfind("## Score: ", 0) == 0) {
      out.push_back({with_line(i, "## Scor: " + line.substr(10)), lineno, "typo-score"});
      out.push_back({with_line(i, "## Score: 250"), lineno, "score-range"});
      out.push_back({without_line(i), lineno, "delete-score"});
    } else if (line.rfind("## Back: Turn ", 0) == 0) {
      out.push_back({with_line(i, "## Bak: " + line.substr(9)), lineno, "typo-back"});
      out.push_back({with_line(i, "## Back: Turn 99"), lineno, "dangling-back"});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Process + filesystem helpers
// ---------------------------------------------------------------------------

struct CmdResult {
  int exit_code = -1;
  std::string out;
};

inline CmdResult run_cmd(const std::string& command, const std::string& stderr_path = "") {
  CmdResult result;
  std::string wrapped =
      command + " 2>" + (stderr_path.empty() ? std::string("/dev/null") : stderr_path);
  FILE* pipe = popen(wrapped.c_str(), "r");
  if (!pipe) return result;
  char buffer[4096];
  std::size_t n;
  while ((n = fread(buffer, 1, sizeof(buffer), pipe)) > 0) result.out.append(buffer, n);
  int status = pclose(pipe);
  if (status >= 0 && WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
  return result;
}

inline std::filesystem::path make_temp_dir(const std::string& hint) {
  static std::mt19937_64 eng{std::random_device{}()};
  std::filesystem::path base = std::filesystem::temp_directory_path();
  for (;;) {
    std::filesystem::path dir = base / ("nest-" + hint + "-" + std::to_string(eng() & 0xFFFFFF));
    if (std::filesystem::create_directories(dir)) return dir;
  }
}

}  // namespace testsup
