#include "demo_assets.hpp"

#include <cstdio>
#include <cstdlib>

#include "nest/data_engine.hpp"
#include "nest/error.hpp"
#include "nest/io.hpp"
#include "nest/reward.hpp"
#include "nest/text.hpp"
#include "nest/trajectory.hpp"

namespace nest::demo {

namespace {

std::string context_field(const std::string& context, const std::string& key) {
  std::string marker = key + ": ";
  std::size_t pos = context.rfind("\n" + marker, std::string::npos);
  if (context.rfind(marker, 0) == 0) pos = 0;
  else if (pos != std::string::npos) pos += 1;
  else return {};
  std::size_t start = pos + marker.size();
  std::size_t end = context.find('\n', start);
  if (end == std::string::npos) end = context.size();
  return context.substr(start, end - start);
}

int trajectory_depth(const std::string& context) {
  int depth = 0;
  std::size_t pos = 0;
  while ((pos = context.find("\n# Turn ", pos)) != std::string::npos) {
    ++depth;
    pos += 1;
  }
  return depth;
}

int task_ordinal(const std::string& id) {
  std::size_t dash = id.rfind('-');
  if (dash == std::string::npos) return 0;
  return std::atoi(id.c_str() + dash + 1);
}

const char* easy_letter(int ordinal) {
  static const char* letters[] = {"A", "B", "C", "D"};
  return letters[(ordinal - 1) % 4];
}

Interval deep_interval(int ordinal) {
  double start = 10.0 * ordinal;
  return Interval{start, start + 5.0};
}

std::string interval_text(const Interval& interval) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "[%.1f, %.1f]", interval.start_s, interval.end_s);
  return buffer;
}

}  // namespace

std::vector<Proposal> RuleOracle::propose(const std::string& context, int /*k*/) {
  std::string id = context_field(context, "task");
  int depth = trajectory_depth(context);

  if (id == "demo-drums") {
    if (depth == 0)
      return {{"the solo likely opens the set", "temporal_localization", "window 10.0-20.0", 0.6}};
    if (depth == 1)
      return {{"nothing there, scan onward for drum activity", "sequence_scan",
               "window 20.0-40.0", 0.7}};
    return {{"the percussion build points at the next window", "sequence_scan",
             "window 40.0-60.0", 0.8}};
  }
  if (id.rfind("easy-", 0) == 0)
    return {{"inspect the clip once", "caption", "full clip", 0.9}};
  if (id.rfind("deep-", 0) == 0) {
    if (depth == 0)
      return {{"check the opening segment", "temporal_localization", "opening segment", 0.7},
              {"listen to the audio track", "audio_transcription", "full audio", 0.3}};
    return {{"scan the remaining segments", "sequence_scan", "remaining segments", 0.8}};
  }
  if (id.rfind("hard-", 0) == 0) {
    if (depth == 0)
      return {{"ground the left region", "spatial_grounding", "left region", 0.5},
              {"spot the keywords", "keyword_spotting", "salient keywords", 0.4}};
    return {{"keep scanning", "sequence_scan", "next segment", 0.4}};
  }
  if (id == "vote-1")
    return {{"identify the speaker", "caption", "voices", 0.9}};
  return {{"observe", "sequence_scan", "", 0.5}};
}

SimulationOutcome RuleOracle::simulate(const Proposal& proposal, const std::string& context) {
  std::string id = context_field(context, "task");
  int depth = trajectory_depth(context);

  if (id == "demo-drums") {
    if (depth == 0)
      return {"only crowd noise and guitars inside 10.0-20.0", 0, std::nullopt};
    if (depth == 1)
      return {"a guitar solo runs 25.0-35.0, drums only in the background", 60, std::nullopt};
    return {"the drum solo runs from 42.0 to 58.5", 90, std::string("[42.0, 58.5]")};
  }
  if (id.rfind("easy-", 0) == 0) {
    const char* letter = easy_letter(task_ordinal(id));
    return {"the narrator of clip " + id + " states option " + letter, 95,
            std::string(letter)};
  }
  if (id.rfind("deep-", 0) == 0) {
    if (depth == 0) {
      if (proposal.skill == "temporal_localization")
        return {"a partial cue near the start", 40, std::nullopt};
      return {"ambient audio only", 20, std::nullopt};
    }
    Interval target = deep_interval(task_ordinal(id));
    return {"the highlighted event sits at " + interval_text(target), 90,
            interval_text(target)};
  }
  if (id.rfind("hard-", 0) == 0) {
    if (depth == 0) {
      if (proposal.skill == "spatial_grounding")
        return {"a cluttered region, nothing conclusive", 50, std::nullopt};
      return {"no salient keywords heard", 40, std::nullopt};
    }
    return {"inconclusive evidence", 30, std::nullopt};
  }
  if (id == "vote-1") {
    std::uint64_t seed = std::strtoull(context_field(context, "seed").c_str(), nullptr, 10);
    const char* spoken = (seed % 3 == 2) ? "B" : "A";
    return {std::string("a short voice sample, sounds like speaker ") + spoken, 85,
            std::string(spoken)};
  }
  return {"observe", 0, std::nullopt};
}

double RuleOracle::judge(const std::string& /*text*/) { return 0.5; }

std::string RuleOracle::answer(const std::string& /*context*/) { return "unknown"; }

TaskRecord replay_task() {
  TaskRecord task;
  task.id = "demo-drums";
  task.modalities = {Modality::Audio, Modality::Video};
  task.context_refs = {"media/concert_clip.mp4"};
  task.question = "When does the drum solo start and end, in seconds?";
  task.metric = MetricKind::TemporalIoU;
  task.ground_truth = GroundTruth::interval(42.0, 58.5);
  return task;
}

std::vector<TaskRecord> demo_pool() {
  std::vector<TaskRecord> pool;
  for (int i = 1; i <= 8; ++i) {
    TaskRecord task;
    char id[16];
    std::snprintf(id, sizeof(id), "easy-%02d", i);
    task.id = id;
    task.modalities = {Modality::Audio, Modality::Video};
    task.context_refs = {std::string("media/") + id + ".mp4"};
    task.question = std::string("Which option matches clip ") + id + "?";
    task.metric = MetricKind::AccExact;
    task.ground_truth = GroundTruth::exact(easy_letter(i));
    pool.push_back(std::move(task));
  }
  for (int i = 1; i <= 10; ++i) {
    TaskRecord task;
    char id[16];
    std::snprintf(id, sizeof(id), "deep-%02d", i);
    task.id = id;
    task.modalities = {Modality::Video};
    task.context_refs = {std::string("media/") + id + ".mp4"};
    task.question = std::string("Locate the highlighted event in clip ") + id + ".";
    task.metric = MetricKind::TemporalIoU;
    Interval target = deep_interval(i);
    task.ground_truth = GroundTruth::interval(target.start_s, target.end_s);
    pool.push_back(std::move(task));
  }
  for (int i = 1; i <= 2; ++i) {
    TaskRecord task;
    char id[16];
    std::snprintf(id, sizeof(id), "hard-%02d", i);
    task.id = id;
    task.modalities = {Modality::Audio, Modality::Video, Modality::Image};
    task.context_refs = {std::string("media/") + id + ".mp4"};
    task.question = std::string("Does the speaker appear on screen in clip ") + id + "?";
    task.metric = MetricKind::AccExact;
    task.ground_truth = GroundTruth::exact("yes");
    pool.push_back(std::move(task));
  }
  return pool;
}

TaskRecord vote_task() {
  TaskRecord task;
  task.id = "vote-1";
  task.modalities = {Modality::Audio};
  task.context_refs = {"media/vote.wav"};
  task.question = "Which speaker is talking?";
  task.metric = MetricKind::AccExact;
  task.ground_truth = GroundTruth::exact("A");
  return task;
}

SearchConfig demo_search_config() {
  SearchConfig config;
  config.budget_iterations = kDemoBudget;
  return config;
}

ScriptedFixture record_nested_fixture(const std::vector<TaskRecord>& tasks,
                                      const SearchConfig& config, std::uint64_t seed) {
  RuleOracle rules;
  ScriptedFixture fixture;
  RecordingOracle recorder(rules, fixture);
  for (std::size_t i = 0; i < tasks.size(); ++i)
    run_nested(tasks[i], recorder, config, seed + i);
  return fixture;
}

ScriptedFixture record_chain_fixture(const TaskRecord& task, int k, int max_steps,
                                     std::uint64_t seed) {
  RuleOracle rules;
  ScriptedFixture fixture;
  RecordingOracle recorder(rules, fixture);
  for (int i = 0; i < k; ++i)
    run_cot(task, recorder, max_steps, seed + static_cast<std::uint64_t>(i));
  return fixture;
}

void write_demo_assets(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  SearchConfig config = demo_search_config();

  TaskRecord replay = replay_task();
  io::save_tasks(dir / "replay_task.jsonl", {replay});
  record_nested_fixture({replay}, config, kDemoSeed).save(dir / "replay_fixture.jsonl");

  std::vector<TaskRecord> pool = demo_pool();
  io::save_tasks(dir / "pool_tasks.jsonl", pool);
  record_nested_fixture(pool, config, kDemoSeed).save(dir / "pool_fixture.jsonl");

  TaskRecord vote = vote_task();
  io::save_tasks(dir / "vote_task.jsonl", {vote});
  record_chain_fixture(vote, 3, kDemoMaxSteps, kDemoSeed).save(dir / "vote_fixture.jsonl");

  // A scored trajectory sample: the replay task's winning path plus a judge
  // fixture for its prefix/final-turn split.
  RuleOracle rules;
  SearchResult result = run_nested(replay, rules, config, kDemoSeed);
  if (!result.best_leaf) fail(ErrorCode::InvariantViolation, "replay run found no answer");
  std::string trajectory =
      traj::serialize(extract_trajectory(result.tree, *result.best_leaf));
  io::write_text_file(dir / "trajectory.txt", trajectory);

  ScriptedFixture judge;
  auto [prefix, child] = split_prefix_child(trajectory);
  judge.add_judge(prefix, 0.5);
  judge.add_judge(child, 0.3);
  judge.save(dir / "judge_fixture.jsonl");
}

}  // namespace nest::demo
