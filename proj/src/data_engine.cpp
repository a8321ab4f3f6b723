#include "nest/data_engine.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <unordered_set>

#include "nest/error.hpp"
#include "nest/io.hpp"
#include "nest/text.hpp"

namespace nest {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr const char* kSftSystemPrompt =
    "You are a deliberative audio-visual reasoner. Work through the task as "
    "numbered turns using '# Turn' and '## Action' tags, check intermediate "
    "observations, and finish with a '# Answer' block.";

std::string modality_set_key(const std::set<Modality>& modalities) {
  std::string key;
  for (Modality m : modalities) {
    if (!key.empty()) key.push_back('+');
    key += modality_name(m);
  }
  return key;
}

template <typename Record, typename KeyOf>
std::vector<Record> dedupe_records(std::vector<Record> records, KeyOf key_of) {
  std::unordered_set<std::string> seen;
  std::vector<Record> kept;
  kept.reserve(records.size());
  for (Record& record : records) {
    std::string key = text::fnv1a64_hex(key_of(record));
    if (seen.insert(key).second) kept.push_back(std::move(record));
  }
  return kept;
}

struct TaskOutcome {
  std::vector<SftRecord> sft;
  std::optional<RlRecord> rl;
  std::optional<TaskFailure> failure;
  bool solved = false;
};

TaskOutcome curate_one(const TaskRecord& task, PolicyOracle& policy,
                       const SearchConfig& search_config, const CurationConfig& config,
                       std::uint64_t seed) {
  TaskOutcome outcome;
  try {
    SearchResult result = run_nested(task, policy, search_config, seed);
    std::vector<traj::TrajectoryDoc> docs =
        extract_sft(result.tree, config.success_threshold, config.max_sft_per_task);
    for (std::size_t i = 0; i < docs.size(); ++i)
      outcome.sft.push_back(make_sft_record(task, docs[i], static_cast<int>(i)));
    outcome.rl = filter_rl(result.tree, task, config);
    for (const ReasoningNode& node : result.tree.nodes)
      if (node.status == NodeStatus::Terminal) {
        outcome.solved = true;
        break;
      }
  } catch (const std::exception& e) {
    outcome = TaskOutcome{};
    outcome.failure = TaskFailure{task.id, e.what()};
  }
  return outcome;
}

}  // namespace

void validate_curation_config(const CurationConfig& config) {
  if (config.success_threshold < 0 || config.success_threshold > 100)
    fail(ErrorCode::InvalidConfig, "success_threshold must lie in [0, 100]");
  if (config.min_rl_turns < 1)
    fail(ErrorCode::InvalidConfig, "min_rl_turns must be >= 1");
  if (config.max_sft_per_task < 1)
    fail(ErrorCode::InvalidConfig, "max_sft_per_task must be >= 1");
}

std::string user_prompt_for(const TaskRecord& task) {
  std::string prompt;
  for (const std::string& ref : task.context_refs) {
    prompt += ref;
    prompt.push_back('\n');
  }
  prompt += task.question;
  return prompt;
}

SftRecord make_sft_record(const TaskRecord& task, const traj::TrajectoryDoc& doc, int ordinal) {
  SftRecord record;
  record.id = task.id + "#sft" + std::to_string(ordinal);
  record.messages.emplace_back("system", kSftSystemPrompt);
  record.messages.emplace_back("user", user_prompt_for(task));
  record.messages.emplace_back("assistant", traj::serialize(doc));
  record.turn_count = static_cast<int>(doc.turns.size());
  record.token_count = 0;
  for (const auto& [role, content] : record.messages)
    record.token_count += text::count_ws_tokens(content);
  record.source_task = task.id;
  return record;
}

std::vector<traj::TrajectoryDoc> extract_sft(const ReasoningTree& tree, int threshold,
                                             int max_records) {
  std::vector<NodeId> winners;
  for (const ReasoningNode& node : tree.nodes)
    if (node.status == NodeStatus::Terminal && node.children.empty() &&
        node.payload.valuation.value_or(0) >= threshold)
      winners.push_back(node.id);

  std::stable_sort(winners.begin(), winners.end(), [&tree](NodeId a, NodeId b) {
    int va = tree.nodes[a].payload.valuation.value_or(0);
    int vb = tree.nodes[b].payload.valuation.value_or(0);
    if (va != vb) return va > vb;
    return a < b;
  });
  if (static_cast<int>(winners.size()) > max_records)
    winners.resize(static_cast<std::size_t>(max_records));

  std::vector<traj::TrajectoryDoc> docs;
  docs.reserve(winners.size());
  for (NodeId id : winners) docs.push_back(extract_trajectory(tree, id));
  return docs;
}

std::optional<RlRecord> filter_rl(const ReasoningTree& tree, const TaskRecord& task,
                                  const CurationConfig& config) {
  std::optional<int> turns_to_solve;
  std::size_t widest = 0;
  for (const ReasoningNode& node : tree.nodes) {
    widest = std::max(widest, node.children.size());
    if (node.status == NodeStatus::Terminal) {
      int depth = static_cast<int>(node.depth);
      if (!turns_to_solve || depth < *turns_to_solve) turns_to_solve = depth;
    }
  }

  if (turns_to_solve && *turns_to_solve < config.min_rl_turns) return std::nullopt;
  if (config.require_multi_branch && widest < 2) return std::nullopt;

  RlRecord record;
  record.id = task.id + "#rl";
  record.prompt = user_prompt_for(task);
  record.metric = task.metric;
  record.ground_truth = task.ground_truth;
  record.turns_to_solve = turns_to_solve;
  record.branch_count = static_cast<int>(std::max<std::size_t>(widest, 1));
  record.source_task = task.id;
  return record;
}

std::vector<SftRecord> dedupe_sft(std::vector<SftRecord> records) {
  return dedupe_records(std::move(records), [](const SftRecord& record) {
    for (const auto& [role, content] : record.messages)
      if (role == "assistant") return text::normalize_loose(content);
    return std::string();
  });
}

std::vector<RlRecord> dedupe_rl(std::vector<RlRecord> records) {
  return dedupe_records(std::move(records), [](const RlRecord& record) {
    return text::normalize_loose(record.prompt);
  });
}

DatasetStats dataset_stats(const std::vector<SftRecord>& records,
                           const std::vector<TaskRecord>* pool) {
  std::map<std::string, std::string> modality_by_task;
  if (pool)
    for (const TaskRecord& task : *pool)
      modality_by_task[task.id] = modality_set_key(task.modalities);

  DatasetStats stats;
  stats.record_count = records.size();
  for (const SftRecord& record : records) {
    stats.turn_histogram[record.turn_count] += 1;

    std::uint64_t tokens = 0;
    for (const auto& [role, content] : record.messages)
      tokens += text::count_ws_tokens(content);
    std::uint64_t bucket = (tokens / 1000) * 1000;
    stats.token_histogram[record.source_task][bucket] += 1;

    auto it = modality_by_task.find(record.source_task);
    stats.modality_counts[it == modality_by_task.end() ? "unknown" : it->second] += 1;
  }
  return stats;
}

CurationResult curate(const std::vector<TaskRecord>& pool, PolicyOracle& policy,
                      const SearchConfig& search_config, const CurationConfig& config,
                      std::uint64_t seed, int jobs) {
  if (pool.empty()) fail(ErrorCode::EmptyPool, "the task pool is empty");
  validate_config(search_config);
  validate_curation_config(config);

  std::vector<TaskOutcome> outcomes(pool.size());
  int workers = std::max(1, jobs);
  if (workers == 1) {
    for (std::size_t i = 0; i < pool.size(); ++i)
      outcomes[i] = curate_one(pool[i], policy, search_config, config,
                               seed + static_cast<std::uint64_t>(i));
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= pool.size()) return;
        outcomes[i] = curate_one(pool[i], policy, search_config, config,
                                 seed + static_cast<std::uint64_t>(i));
      }
    };
    std::vector<std::thread> threads;
    std::size_t spawn = std::min<std::size_t>(static_cast<std::size_t>(workers), pool.size());
    threads.reserve(spawn);
    for (std::size_t t = 0; t < spawn; ++t) threads.emplace_back(worker);
    for (std::thread& thread : threads) thread.join();
  }

  CurationResult result;
  for (TaskOutcome& outcome : outcomes) {
    if (outcome.failure) {
      result.failures.push_back(std::move(*outcome.failure));
      continue;
    }
    if (outcome.solved) ++result.solved;
    for (SftRecord& record : outcome.sft) result.sft.push_back(std::move(record));
    if (outcome.rl) result.rl.push_back(std::move(*outcome.rl));
  }
  if (config.dedupe) {
    result.sft = dedupe_sft(std::move(result.sft));
    result.rl = dedupe_rl(std::move(result.rl));
  }
  return result;
}

ordered_json sft_to_json(const SftRecord& record) {
  ordered_json out;
  out["id"] = record.id;
  ordered_json messages = ordered_json::array();
  for (const auto& [role, content] : record.messages)
    messages.push_back(ordered_json{{"role", role}, {"content", content}});
  out["messages"] = std::move(messages);
  out["turn_count"] = record.turn_count;
  out["token_count"] = record.token_count;
  out["source_task"] = record.source_task;
  return out;
}

SftRecord sft_from_json(const ordered_json& record) {
  SftRecord out;
  out.id = record.at("id").get<std::string>();
  for (const auto& message : record.at("messages"))
    out.messages.emplace_back(message.at("role").get<std::string>(),
                              message.at("content").get<std::string>());
  out.turn_count = record.at("turn_count").get<int>();
  out.token_count = record.at("token_count").get<std::uint64_t>();
  out.source_task = record.at("source_task").get<std::string>();
  return out;
}

ordered_json rl_to_json(const RlRecord& record) {
  ordered_json out;
  out["id"] = record.id;
  out["prompt"] = record.prompt;
  out["metric"] = metric_kind_name(record.metric);
  out["ground_truth"] = io::ground_truth_to_json(record.ground_truth);
  out["turns_to_solve"] =
      record.turns_to_solve ? ordered_json(*record.turns_to_solve) : ordered_json(nullptr);
  out["branch_count"] = record.branch_count;
  out["source_task"] = record.source_task;
  return out;
}

RlRecord rl_from_json(const ordered_json& record) {
  RlRecord out;
  out.id = record.at("id").get<std::string>();
  out.prompt = record.at("prompt").get<std::string>();
  auto metric = metric_kind_from_name(record.at("metric").get<std::string>());
  if (!metric) fail(ErrorCode::BadInput, "unknown metric in rl record");
  out.metric = *metric;
  out.ground_truth = io::ground_truth_from_json(record.at("ground_truth"));
  if (!record.at("turns_to_solve").is_null())
    out.turns_to_solve = record.at("turns_to_solve").get<int>();
  out.branch_count = record.at("branch_count").get<int>();
  out.source_task = record.at("source_task").get<std::string>();
  return out;
}

ordered_json stats_to_json(const DatasetStats& stats) {
  ordered_json out;
  out["record_count"] = stats.record_count;
  ordered_json turns = ordered_json::object();
  for (const auto& [turn, count] : stats.turn_histogram)
    turns[std::to_string(turn)] = count;
  out["turn_histogram"] = std::move(turns);
  ordered_json tokens = ordered_json::object();
  for (const auto& [source, buckets] : stats.token_histogram) {
    ordered_json per_source = ordered_json::object();
    for (const auto& [bucket, count] : buckets) per_source[std::to_string(bucket)] = count;
    tokens[source] = std::move(per_source);
  }
  out["token_histogram"] = std::move(tokens);
  ordered_json modalities = ordered_json::object();
  for (const auto& [key, count] : stats.modality_counts) modalities[key] = count;
  out["modality_counts"] = std::move(modalities);
  return out;
}

void export_sft(const std::vector<SftRecord>& records, const std::filesystem::path& path) {
  std::vector<ordered_json> out;
  out.reserve(records.size());
  for (const SftRecord& record : records) out.push_back(sft_to_json(record));
  io::write_jsonl(path, out);
}

void export_rl(const std::vector<RlRecord>& records, const std::filesystem::path& path) {
  std::vector<ordered_json> out;
  out.reserve(records.size());
  for (const RlRecord& record : records) out.push_back(rl_to_json(record));
  io::write_jsonl(path, out);
}

std::vector<SftRecord> load_sft(const std::filesystem::path& path) {
  std::vector<SftRecord> records;
  for (const ordered_json& record : io::read_jsonl(path)) {
    try {
      records.push_back(sft_from_json(record));
    } catch (const ordered_json::exception& e) {
      fail(ErrorCode::BadInput, path.string() + ": " + e.what());
    }
  }
  return records;
}

}  // namespace nest
