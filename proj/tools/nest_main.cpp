// nest: search, baselines, reward scoring, format validation, curation, stats.
//
// Exit codes: 0 success, 1 usage error, 2 input/format error, 3 oracle or
// transport error. stdout carries only machine-parseable summary records
// (one JSON object per line); human-oriented notes go to stderr.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "nest/data_engine.hpp"
#include "nest/error.hpp"
#include "nest/io.hpp"
#include "nest/remote.hpp"
#include "nest/reward.hpp"
#include "nest/search.hpp"
#include "nest/text.hpp"
#include "nest/trajectory.hpp"

namespace {

using nest::Error;
using nest::ErrorCode;
using ordered_json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInput = 2;
constexpr int kExitOracle = 3;

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::OracleFailure:
    case ErrorCode::TransportError:
    case ErrorCode::FixtureMiss:
    case ErrorCode::ParseError:
    case ErrorCode::RangeError:
      return kExitOracle;
    case ErrorCode::InvalidConfig:
    case ErrorCode::BudgetZero:
      return kExitUsage;
    default:
      return kExitInput;
  }
}

struct OracleFlags {
  std::string spec = "scripted:fixture.jsonl";
  std::string model = "default";
  std::string base_url;
  double temperature = 0.0;
  double timeout_s = 30.0;
  int max_retries = 2;
  std::string cache_dir;

  void attach(CLI::App* cmd) {
    cmd->add_option("--oracle", spec, "remote or scripted:FIXTURE")->required();
    cmd->add_option("--model", model, "remote model name");
    cmd->add_option("--base-url", base_url, "remote base URL (overrides OMNI_O3_BASE_URL)");
    cmd->add_option("--temperature", temperature, "remote sampling temperature");
    cmd->add_option("--timeout", timeout_s, "remote timeout in seconds");
    cmd->add_option("--retries", max_retries, "remote transport retries");
    cmd->add_option("--cache-dir", cache_dir, "remote response cache directory");
  }

  std::unique_ptr<nest::PolicyOracle> build() const {
    if (spec.rfind("scripted:", 0) == 0)
      return nest::scripted_oracle(
          nest::ScriptedFixture::load(spec.substr(std::string("scripted:").size())));
    if (spec == "remote") {
      nest::EndpointConfig config = nest::EndpointConfig::from_env();
      if (!base_url.empty()) config.base_url = base_url;
      config.model = model;
      config.temperature = temperature;
      config.timeout_s = timeout_s;
      config.max_retries = max_retries;
      if (!cache_dir.empty()) config.cache_dir = cache_dir;
      return std::make_unique<nest::RemoteOracle>(std::move(config));
    }
    nest::fail(ErrorCode::InvalidConfig, "--oracle must be remote or scripted:FIXTURE");
  }
};

std::string sanitize_filename(const std::string& name) {
  std::string out;
  for (char c : name) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
              c == '-' || c == '_' || c == '.';
    out.push_back(ok ? c : '_');
  }
  return out.empty() ? "task" : out;
}

void ensure_out_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (!std::filesystem::is_directory(dir))
    nest::fail(ErrorCode::IoError, "cannot create output directory " + dir.string());
}

// --------------------------------------------------------------------------
// search
// --------------------------------------------------------------------------

struct SearchArgs {
  std::string tasks_path;
  OracleFlags oracle;
  std::uint64_t seed = 0;
  nest::SearchConfig config;
  std::string out_dir;
  bool stop_on_success = true;
};

int cmd_search(const SearchArgs& args) {
  std::vector<nest::TaskRecord> tasks = nest::io::load_tasks(args.tasks_path);
  if (tasks.empty()) nest::fail(ErrorCode::EmptyPool, "task file contains no tasks");
  std::unique_ptr<nest::PolicyOracle> oracle = args.oracle.build();
  ensure_out_dir(args.out_dir);

  nest::SearchConfig config = args.config;
  config.stop_on_success = args.stop_on_success;
  nest::validate_config(config);

  std::vector<ordered_json> summaries;
  std::size_t failures = 0;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const nest::TaskRecord& task = tasks[i];
    try {
      nest::SearchResult result = nest::run_nested(task, *oracle, config, args.seed + i);
      nest::io::write_text_file(
          std::filesystem::path(args.out_dir) / (sanitize_filename(task.id) + ".tree.jsonl"),
          nest::snapshot_jsonl(result.tree));
      ordered_json summary = nest::io::search_summary(task, result);
      std::cout << summary.dump() << "\n";
      summaries.push_back(std::move(summary));
    } catch (const Error& e) {
      ++failures;
      std::cerr << "[search] task '" << task.id << "' failed: " << e.what() << "\n";
    }
  }
  std::vector<ordered_json> records(summaries.begin(), summaries.end());
  nest::io::write_jsonl(std::filesystem::path(args.out_dir) / "summary.jsonl", records);
  return failures == tasks.size() ? kExitOracle : kExitOk;
}

// --------------------------------------------------------------------------
// baseline cot|bon
// --------------------------------------------------------------------------

struct BaselineArgs {
  std::string tasks_path;
  OracleFlags oracle;
  std::uint64_t seed = 0;
  int max_steps = 8;
  int k = 3;
  std::string rule = "majority";
};

int cmd_baseline_cot(const BaselineArgs& args) {
  std::vector<nest::TaskRecord> tasks = nest::io::load_tasks(args.tasks_path);
  if (tasks.empty()) nest::fail(ErrorCode::EmptyPool, "task file contains no tasks");
  std::unique_ptr<nest::PolicyOracle> oracle = args.oracle.build();

  std::size_t failures = 0;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    try {
      nest::ChainResult chain =
          nest::run_cot(tasks[i], *oracle, args.max_steps, args.seed + i);
      ordered_json record;
      record["task"] = tasks[i].id;
      record["steps"] = chain.steps.size();
      record["answer"] = chain.answer;
      std::cout << record.dump() << "\n";
    } catch (const Error& e) {
      ++failures;
      std::cerr << "[baseline] task '" << tasks[i].id << "' failed: " << e.what() << "\n";
    }
  }
  return failures == tasks.size() ? kExitOracle : kExitOk;
}

int cmd_baseline_bon(const BaselineArgs& args) {
  if (args.k < 1) nest::fail(ErrorCode::InvalidConfig, "--k must be >= 1");
  nest::AggregationRule rule;
  if (args.rule == "majority")
    rule = nest::AggregationRule::MajorityVote;
  else if (args.rule == "best-reward")
    rule = nest::AggregationRule::BestReward;
  else
    nest::fail(ErrorCode::InvalidConfig, "--rule must be majority or best-reward");

  std::vector<nest::TaskRecord> tasks = nest::io::load_tasks(args.tasks_path);
  if (tasks.empty()) nest::fail(ErrorCode::EmptyPool, "task file contains no tasks");
  std::unique_ptr<nest::PolicyOracle> oracle = args.oracle.build();

  std::size_t failures = 0;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    try {
      nest::ParallelResult result =
          nest::run_parallel(tasks[i], *oracle, args.k, rule, args.seed + i, args.max_steps);
      ordered_json record;
      record["task"] = tasks[i].id;
      record["answer"] = result.answer;
      ordered_json candidates = ordered_json::array();
      for (const nest::Candidate& candidate : result.candidates) {
        ordered_json item;
        item["answer"] = candidate.answer;
        item["reward"] =
            candidate.reward ? ordered_json(*candidate.reward) : ordered_json(nullptr);
        candidates.push_back(std::move(item));
      }
      record["candidates"] = std::move(candidates);
      std::cout << record.dump() << "\n";
    } catch (const Error& e) {
      ++failures;
      std::cerr << "[baseline] task '" << tasks[i].id << "' failed: " << e.what() << "\n";
    }
  }
  return failures == tasks.size() ? kExitOracle : kExitOk;
}

// --------------------------------------------------------------------------
// reward score
// --------------------------------------------------------------------------

struct RewardArgs {
  std::string trajectory_path;
  std::string task_path;
  std::optional<OracleFlags> judge;
};

int cmd_reward_score(const RewardArgs& args) {
  std::string trajectory = nest::io::read_text_file(args.trajectory_path);
  std::vector<nest::TaskRecord> tasks = nest::io::load_tasks(args.task_path);
  if (tasks.empty()) nest::fail(ErrorCode::EmptyPool, "task file contains no tasks");
  const nest::TaskRecord& task = tasks.front();

  std::unique_ptr<nest::PolicyOracle> judge;
  if (args.judge) judge = args.judge->build();

  nest::traj::FormatReport report = nest::traj::validate(trajectory);
  double r_format = report.valid ? 0.0 : -1.0;

  std::string prediction;
  if (report.valid) {
    nest::traj::TrajectoryDoc doc = nest::traj::parse(trajectory);
    if (doc.answer) prediction = *doc.answer;
  }

  nest::OutcomeResult outcome;
  if (prediction.empty()) {
    outcome.reward = 0.0;
    outcome.parse_ok = false;
    outcome.flag = report.valid ? "no-answer: trajectory carries no answer block"
                                : "no-answer: trajectory does not validate";
  } else {
    outcome = nest::outcome_reward(prediction, task.ground_truth, task.metric, judge.get());
  }

  double r_nest = 0.0, r_child = 0.0;
  if (report.valid && judge)
    std::tie(r_nest, r_child) = nest::process_rewards(trajectory, *judge);

  nest::RewardBreakdown breakdown = nest::compose(outcome.reward, r_nest, r_child, r_format);
  ordered_json record;
  record["task"] = task.id;
  record["r_outcome"] = breakdown.r_outcome;
  record["r_nest"] = breakdown.r_nest;
  record["r_child"] = breakdown.r_child;
  record["r_format"] = breakdown.r_format;
  record["r_total"] = breakdown.r_total;
  record["metric"] = nest::metric_kind_name(task.metric);
  record["parse_ok"] = outcome.parse_ok;
  record["flag"] = outcome.flag;
  std::cout << record.dump() << "\n";
  return report.valid ? kExitOk : kExitInput;
}

// --------------------------------------------------------------------------
// fmt validate|roundtrip
// --------------------------------------------------------------------------

ordered_json report_to_json(const nest::traj::FormatReport& report) {
  ordered_json record;
  record["valid"] = report.valid;
  ordered_json violations = ordered_json::array();
  for (const nest::traj::Violation& violation : report.violations) {
    ordered_json item;
    item["line"] = violation.line;
    item["code"] = nest::traj::violation_code_name(violation.code);
    item["message"] = violation.message;
    violations.push_back(std::move(item));
  }
  record["violations"] = std::move(violations);
  return record;
}

int cmd_fmt_validate(const std::string& in_path) {
  nest::traj::FormatReport report = nest::traj::validate(nest::io::read_text_file(in_path));
  std::cout << report_to_json(report).dump() << "\n";
  return report.valid ? kExitOk : kExitInput;
}

int cmd_fmt_roundtrip(const std::string& in_path) {
  std::string input = nest::io::read_text_file(in_path);
  nest::traj::FormatReport report = nest::traj::validate(input);
  ordered_json record = report_to_json(report);
  if (!report.valid) {
    record["roundtrip_identical"] = false;
    std::cout << record.dump() << "\n";
    return kExitInput;
  }
  std::string reserialized = nest::traj::serialize(nest::traj::parse(input));
  bool identical = reserialized == input;
  record["roundtrip_identical"] = identical;
  std::cout << record.dump() << "\n";
  return identical ? kExitOk : kExitInput;
}

// --------------------------------------------------------------------------
// curate + stats
// --------------------------------------------------------------------------

struct CurateArgs {
  std::string tasks_path;
  OracleFlags oracle;
  std::uint64_t seed = 0;
  nest::SearchConfig search;
  nest::CurationConfig curation;
  std::string out_dir;
  int jobs = 0;  // 0 = hardware concurrency
};

int cmd_curate(const CurateArgs& args) {
  std::vector<nest::TaskRecord> pool = nest::io::load_tasks(args.tasks_path);
  if (pool.empty()) nest::fail(ErrorCode::EmptyPool, "task file contains no tasks");
  std::unique_ptr<nest::PolicyOracle> oracle = args.oracle.build();
  ensure_out_dir(args.out_dir);

  int jobs = args.jobs > 0 ? args.jobs
                           : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  nest::CurationResult result =
      nest::curate(pool, *oracle, args.search, args.curation, args.seed, jobs);

  std::filesystem::path out(args.out_dir);
  nest::export_sft(result.sft, out / "sft.jsonl");
  nest::export_rl(result.rl, out / "rl.jsonl");
  nest::io::write_text_file(out / "stats.json",
                            nest::stats_to_json(nest::dataset_stats(result.sft, &pool)).dump() +
                                "\n");
  std::vector<ordered_json> failures;
  for (const nest::TaskFailure& failure : result.failures) {
    ordered_json record;
    record["task"] = failure.task_id;
    record["error"] = failure.error;
    failures.push_back(std::move(record));
  }
  nest::io::write_jsonl(out / "failures.jsonl", failures);

  ordered_json summary;
  summary["tasks"] = pool.size();
  summary["solved"] = result.solved;
  summary["failed"] = result.failures.size();
  summary["sft_records"] = result.sft.size();
  summary["rl_records"] = result.rl.size();
  std::cout << summary.dump() << "\n";
  return result.failures.size() == pool.size() ? kExitOracle : kExitOk;
}

int cmd_stats(const std::string& in_path) {
  std::vector<nest::SftRecord> records = nest::load_sft(in_path);
  std::cout << nest::stats_to_json(nest::dataset_stats(records)).dump() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reasoning-tree search, curation, and reward tooling"};
  app.require_subcommand(1);

  // search
  SearchArgs search_args;
  CLI::App* search = app.add_subcommand("search", "run the nested search over a task file");
  search->add_option("--tasks", search_args.tasks_path, "task file, one record per line")
      ->required();
  search_args.oracle.attach(search);
  search->add_option("--seed", search_args.seed, "base seed (task i runs with seed+i)");
  search->add_option("--budget", search_args.config.budget_iterations, "search iterations");
  search->add_option("--k", search_args.config.k_expand, "expansions per iteration");
  search->add_option("--max-turns", search_args.config.max_turns, "maximum trajectory depth");
  search->add_option("--success-threshold", search_args.config.success_threshold,
                     "terminal valuation threshold");
  search->add_option("--c-uct", search_args.config.c_uct, "UCT exploration constant");
  search->add_option("--lambda", search_args.config.lambda_semantic, "semantic prior weight");
  search->add_flag("--stop-on-success,!--no-stop-on-success", search_args.stop_on_success,
                   "stop at the first terminal node");
  search->add_option("--out", search_args.out_dir, "output directory")->required();

  // baseline
  BaselineArgs baseline_args;
  CLI::App* baseline = app.add_subcommand("baseline", "sequential and parallel baselines");
  baseline->require_subcommand(1);
  CLI::App* cot = baseline->add_subcommand("cot", "sequential chain mode");
  CLI::App* bon = baseline->add_subcommand("bon", "parallel best-of-N mode");
  for (CLI::App* cmd : {cot, bon}) {
    cmd->add_option("--tasks", baseline_args.tasks_path, "task file")->required();
    baseline_args.oracle.attach(cmd);
    cmd->add_option("--seed", baseline_args.seed, "base seed");
    cmd->add_option("--max-steps", baseline_args.max_steps, "chain step cap");
  }
  bon->add_option("--k", baseline_args.k, "number of rollouts");
  bon->add_option("--rule", baseline_args.rule, "majority or best-reward");

  // reward score
  RewardArgs reward_args;
  OracleFlags judge_flags;
  std::string judge_spec;
  CLI::App* reward = app.add_subcommand("reward", "reward-model scoring");
  reward->require_subcommand(1);
  CLI::App* score = reward->add_subcommand("score", "score one trajectory against a task");
  score->add_option("--trajectory", reward_args.trajectory_path, "trajectory text file")
      ->required();
  score->add_option("--task", reward_args.task_path, "task file (first record is used)")
      ->required();
  score->add_option("--judge", judge_spec, "judge oracle: remote or scripted:FIXTURE");

  // fmt
  std::string fmt_in;
  CLI::App* fmt = app.add_subcommand("fmt", "trajectory grammar checks");
  fmt->require_subcommand(1);
  CLI::App* fmt_validate = fmt->add_subcommand("validate", "report every violation");
  CLI::App* fmt_roundtrip = fmt->add_subcommand("roundtrip", "parse, reserialize, compare");
  fmt_validate->add_option("--in", fmt_in, "input file")->required();
  fmt_roundtrip->add_option("--in", fmt_in, "input file")->required();

  // curate
  CurateArgs curate_args;
  CLI::App* curate = app.add_subcommand("curate", "search a pool and export datasets");
  curate->add_option("--tasks", curate_args.tasks_path, "task file")->required();
  curate_args.oracle.attach(curate);
  curate->add_option("--seed", curate_args.seed, "base seed (task i runs with seed+i)");
  curate->add_option("--budget", curate_args.search.budget_iterations, "search iterations");
  curate->add_option("--k", curate_args.search.k_expand, "expansions per iteration");
  curate->add_option("--max-turns", curate_args.search.max_turns, "maximum trajectory depth");
  curate->add_option("--success-threshold", curate_args.curation.success_threshold,
                     "SFT valuation threshold");
  curate->add_option("--min-rl-turns", curate_args.curation.min_rl_turns,
                     "minimum turns-to-solve for RL");
  curate->add_flag("--require-multi-branch,!--no-require-multi-branch",
                   curate_args.curation.require_multi_branch, "RL needs a branching tree");
  curate->add_flag("--dedupe,!--no-dedupe", curate_args.curation.dedupe,
                   "drop normalized duplicates");
  curate->add_option("--max-sft-per-task", curate_args.curation.max_sft_per_task,
                     "SFT records kept per task");
  curate->add_option("--jobs", curate_args.jobs, "task-level parallelism (0 = cores)");
  curate->add_option("--out", curate_args.out_dir, "output directory")->required();

  // stats
  std::string stats_in;
  CLI::App* stats = app.add_subcommand("stats", "histograms over an exported SFT file");
  stats->add_option("--in", stats_in, "sft.jsonl file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (app.got_subcommand(search)) return cmd_search(search_args);
    if (app.got_subcommand(baseline)) {
      // keep search-level success_threshold defaults for terminal detection
      if (baseline->got_subcommand(cot)) return cmd_baseline_cot(baseline_args);
      return cmd_baseline_bon(baseline_args);
    }
    if (app.got_subcommand(reward)) {
      if (!judge_spec.empty()) {
        judge_flags.spec = judge_spec;
        reward_args.judge = judge_flags;
      }
      return cmd_reward_score(reward_args);
    }
    if (app.got_subcommand(fmt)) {
      if (fmt->got_subcommand(fmt_validate)) return cmd_fmt_validate(fmt_in);
      return cmd_fmt_roundtrip(fmt_in);
    }
    if (app.got_subcommand(curate)) return cmd_curate(curate_args);
    if (app.got_subcommand(stats)) return cmd_stats(stats_in);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const nest::traj::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitUsage;
}
