#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nest/search.hpp"

// Search-driven curation: run the nested engine over a task pool, extract
// successful trajectories for SFT, keep difficulty-filtered tasks for RL,
// dedupe, compute dataset statistics, and export line-delimited records.

namespace nest {

struct SftRecord {
  std::string id;
  // (role, content); roles are system/user/assistant and the assistant
  // content is a serialized trajectory that validates under the grammar.
  std::vector<std::pair<std::string, std::string>> messages;
  int turn_count = 1;
  std::uint64_t token_count = 0;  // whitespace tokens over all message contents
  std::string source_task;
};

struct RlRecord {
  std::string id;
  std::string prompt;
  MetricKind metric = MetricKind::AccExact;
  GroundTruth ground_truth;
  std::optional<int> turns_to_solve;  // absent when unsolved within budget
  int branch_count = 1;               // max children over all nodes (floor 1)
  std::string source_task;
};

struct CurationConfig {
  int success_threshold = 80;   // in [0, 100]
  int min_rl_turns = 2;         // >= 1
  bool require_multi_branch = true;
  bool dedupe = true;
  int max_sft_per_task = 1;     // >= 1
};

void validate_curation_config(const CurationConfig& config);

struct TaskFailure {
  std::string task_id;
  std::string error;
};

struct CurationResult {
  std::vector<SftRecord> sft;
  std::vector<RlRecord> rl;
  std::vector<TaskFailure> failures;
  int solved = 0;  // tasks whose tree holds at least one Terminal leaf
};

struct DatasetStats {
  std::map<int, std::uint64_t> turn_histogram;
  // source -> bucket lower bound (width 1000 tokens) -> count
  std::map<std::string, std::map<std::uint64_t, std::uint64_t>> token_histogram;
  std::map<std::string, std::uint64_t> modality_counts;  // canonical set key
  std::uint64_t record_count = 0;
};

// Runs the nested search per task with derived seeds seed+index; oracle
// failures are recorded per task and the pipeline continues. Tasks may be
// curated on up to `jobs` threads; outputs always follow pool order.
CurationResult curate(const std::vector<TaskRecord>& pool, PolicyOracle& policy,
                      const SearchConfig& search_config, const CurationConfig& config,
                      std::uint64_t seed, int jobs = 1);

// One doc per Terminal leaf scoring >= threshold, ordered by valuation
// descending then id ascending, truncated to max_records.
std::vector<traj::TrajectoryDoc> extract_sft(const ReasoningTree& tree, int threshold,
                                             int max_records);

// Emits a record iff the task was not solved trivially (turns_to_solve absent
// or >= min_rl_turns) and, when required, the tree branches somewhere.
std::optional<RlRecord> filter_rl(const ReasoningTree& tree, const TaskRecord& task,
                                  const CurationConfig& config);

// Keeps the first occurrence per normalized text key (trim, casefold,
// collapse whitespace) of the assistant message / prompt; order is stable.
std::vector<SftRecord> dedupe_sft(std::vector<SftRecord> records);
std::vector<RlRecord> dedupe_rl(std::vector<RlRecord> records);

// Token counts are whitespace-token estimates over the full message text.
// Modalities come from the task pool when provided, else bucket "unknown".
DatasetStats dataset_stats(const std::vector<SftRecord>& records,
                           const std::vector<TaskRecord>* pool = nullptr);

SftRecord make_sft_record(const TaskRecord& task, const traj::TrajectoryDoc& doc, int ordinal);
std::string user_prompt_for(const TaskRecord& task);

nlohmann::ordered_json sft_to_json(const SftRecord& record);
SftRecord sft_from_json(const nlohmann::ordered_json& record);
nlohmann::ordered_json rl_to_json(const RlRecord& record);
RlRecord rl_from_json(const nlohmann::ordered_json& record);
nlohmann::ordered_json stats_to_json(const DatasetStats& stats);

void export_sft(const std::vector<SftRecord>& records, const std::filesystem::path& path);
void export_rl(const std::vector<RlRecord>& records, const std::filesystem::path& path);
std::vector<SftRecord> load_sft(const std::filesystem::path& path);

}  // namespace nest
