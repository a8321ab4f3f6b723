#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nest/search.hpp"

// Line-delimited record files: UTF-8, LF, stable key order, final newline,
// and an empty record list writes a zero-byte file.

namespace nest::io {

using ordered_json = nlohmann::ordered_json;

std::string read_text_file(const std::filesystem::path& path);       // Error(IoError)
void write_text_file(const std::filesystem::path& path, std::string_view content);

// Parses one JSONL line; failures carry "<file>:<line>" context.
ordered_json parse_record(const std::string& line, const std::filesystem::path& path,
                          int lineno);

std::vector<ordered_json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<ordered_json>& records);

// Task files: one record per line with fields
// (id, modalities, context_refs, question, metric, ground_truth).
ordered_json task_to_json(const TaskRecord& task);
TaskRecord task_from_json(const ordered_json& record);
std::vector<TaskRecord> load_tasks(const std::filesystem::path& path);
void save_tasks(const std::filesystem::path& path, const std::vector<TaskRecord>& tasks);

ordered_json ground_truth_to_json(const GroundTruth& gt);
GroundTruth ground_truth_from_json(const ordered_json& record);

// Per-task search summary record (task id, termination, iterations, best
// valuation, best answer).
ordered_json search_summary(const TaskRecord& task, const SearchResult& result);

}  // namespace nest::io
