#include "nest/io.hpp"

#include <fstream>
#include <sstream>

#include "nest/error.hpp"

namespace nest::io {

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream content;
  content << in.rdbuf();
  return content.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) fail(ErrorCode::IoError, "failed writing " + path.string());
}

ordered_json parse_record(const std::string& line, const std::filesystem::path& path,
                          int lineno) {
  ordered_json record = ordered_json::parse(line, nullptr, false);
  if (record.is_discarded() || !record.is_object())
    fail(ErrorCode::BadInput,
         path.string() + ":" + std::to_string(lineno) + ": malformed record");
  return record;
}

std::vector<ordered_json> read_jsonl(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<ordered_json> records;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    records.push_back(parse_record(line, path, lineno));
  }
  return records;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<ordered_json>& records) {
  std::string content;
  for (const ordered_json& record : records) {
    content += record.dump();
    content += '\n';
  }
  write_text_file(path, content);
}

ordered_json ground_truth_to_json(const GroundTruth& gt) {
  ordered_json record;
  if (const auto* exact = std::get_if<Exact>(&gt.value)) {
    record["kind"] = "exact";
    record["text"] = exact->text;
  } else if (const auto* interval = std::get_if<Interval>(&gt.value)) {
    record["kind"] = "interval";
    record["start_s"] = interval->start_s;
    record["end_s"] = interval->end_s;
  } else if (const auto* box = std::get_if<Box>(&gt.value)) {
    record["kind"] = "box";
    record["x1"] = box->x1;
    record["y1"] = box->y1;
    record["x2"] = box->x2;
    record["y2"] = box->y2;
  } else if (const auto* scalar = std::get_if<Scalar>(&gt.value)) {
    record["kind"] = "scalar";
    record["value"] = scalar->value;
    record["scale"] = scalar->scale;
  } else if (const auto* reference = std::get_if<Reference>(&gt.value)) {
    record["kind"] = "reference";
    record["text"] = reference->text;
  } else if (const auto* rubric = std::get_if<Rubric>(&gt.value)) {
    record["kind"] = "rubric";
    record["text"] = rubric->text;
  }
  return record;
}

GroundTruth ground_truth_from_json(const ordered_json& record) {
  std::string kind = record.at("kind").get<std::string>();
  if (kind == "exact") return GroundTruth::exact(record.at("text").get<std::string>());
  if (kind == "interval")
    return GroundTruth::interval(record.at("start_s").get<double>(),
                                 record.at("end_s").get<double>());
  if (kind == "box")
    return GroundTruth::box(record.at("x1").get<double>(), record.at("y1").get<double>(),
                            record.at("x2").get<double>(), record.at("y2").get<double>());
  if (kind == "scalar")
    return GroundTruth::scalar(record.at("value").get<double>(),
                               record.at("scale").get<double>());
  if (kind == "reference") return GroundTruth::reference(record.at("text").get<std::string>());
  if (kind == "rubric") return GroundTruth::rubric(record.at("text").get<std::string>());
  fail(ErrorCode::BadInput, "unknown ground_truth kind '" + kind + "'");
}

ordered_json task_to_json(const TaskRecord& task) {
  ordered_json record;
  record["id"] = task.id;
  ordered_json modalities = ordered_json::array();
  for (Modality m : task.modalities) modalities.push_back(modality_name(m));
  record["modalities"] = std::move(modalities);
  record["context_refs"] = task.context_refs;
  record["question"] = task.question;
  record["metric"] = metric_kind_name(task.metric);
  record["ground_truth"] = ground_truth_to_json(task.ground_truth);
  return record;
}

TaskRecord task_from_json(const ordered_json& record) {
  TaskRecord task;
  task.id = record.at("id").get<std::string>();
  for (const auto& name : record.at("modalities")) {
    auto modality = modality_from_name(name.get<std::string>());
    if (!modality)
      fail(ErrorCode::BadInput, "unknown modality '" + name.get<std::string>() + "'");
    task.modalities.insert(*modality);
  }
  if (record.contains("context_refs"))
    task.context_refs = record.at("context_refs").get<std::vector<std::string>>();
  task.question = record.at("question").get<std::string>();
  auto metric = metric_kind_from_name(record.at("metric").get<std::string>());
  if (!metric)
    fail(ErrorCode::BadInput,
         "unknown metric '" + record.at("metric").get<std::string>() + "'");
  task.metric = *metric;
  task.ground_truth = ground_truth_from_json(record.at("ground_truth"));
  validate_task(task);
  return task;
}

std::vector<TaskRecord> load_tasks(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<TaskRecord> tasks;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      tasks.push_back(task_from_json(parse_record(line, path, lineno)));
    } catch (const ordered_json::exception& e) {
      fail(ErrorCode::BadInput,
           path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::BadInput || e.code() == ErrorCode::InvariantViolation)
        fail(ErrorCode::BadInput,
             path.string() + ":" + std::to_string(lineno) + ": " + e.what());
      throw;
    }
  }
  return tasks;
}

void save_tasks(const std::filesystem::path& path, const std::vector<TaskRecord>& tasks) {
  std::vector<ordered_json> records;
  records.reserve(tasks.size());
  for (const TaskRecord& task : tasks) records.push_back(task_to_json(task));
  write_jsonl(path, records);
}

ordered_json search_summary(const TaskRecord& task, const SearchResult& result) {
  ordered_json record;
  record["task"] = task.id;
  record["terminated_by"] = termination_reason_name(result.terminated_by);
  record["iterations"] = result.iterations_used;
  record["best_valuation"] =
      result.best_valuation ? ordered_json(*result.best_valuation) : ordered_json(nullptr);
  record["best_answer"] =
      result.best_answer ? ordered_json(*result.best_answer) : ordered_json(nullptr);
  return record;
}

}  // namespace nest::io
