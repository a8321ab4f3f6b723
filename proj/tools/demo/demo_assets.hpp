#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nest/oracle.hpp"
#include "nest/search.hpp"

// Offline demo scenarios: a rule-driven oracle plus canned task pools, and
// recorders that replay real engine runs into scripted fixtures so the CLI
// can run the same scenarios with --oracle scripted:FILE and no network.

namespace nest::demo {

inline constexpr std::uint64_t kDemoSeed = 7;
inline constexpr int kDemoBudget = 4;
inline constexpr int kDemoMaxSteps = 8;

// Deterministic oracle whose behavior is keyed on the task id, the rollout
// seed, and the trajectory depth it reads back from the context text.
//
// Scenarios:
//   demo-drums  three-turn self-correction: a wrong window valued 0, a
//               partial observation valued 60, then the located event valued
//               90 with the final interval answer.
//   easy-NN     solved by a single caption step valued 95.
//   deep-NN     two root branches, then a second-turn scan that solves the
//               task at depth 2.
//   hard-NN     two root branches and inconclusive scans; never solves.
//   vote-1      answers immediately; the answer flips to "B" when the
//               rollout seed is congruent to 2 mod 3.
class RuleOracle : public PolicyOracle {
public:
  std::vector<Proposal> propose(const std::string& context, int k) override;
  SimulationOutcome simulate(const Proposal& proposal, const std::string& context) override;
  double judge(const std::string& text) override;
  std::string answer(const std::string& context) override;
};

TaskRecord replay_task();               // demo-drums
std::vector<TaskRecord> demo_pool();    // 8 easy + 10 deep + 2 hard
TaskRecord vote_task();                 // vote-1

SearchConfig demo_search_config();

// Replays run_nested over each task (seed + index) through a recorder.
ScriptedFixture record_nested_fixture(const std::vector<TaskRecord>& tasks,
                                      const SearchConfig& config, std::uint64_t seed);

// Replays run_cot rollouts for seeds seed+0..seed+k-1.
ScriptedFixture record_chain_fixture(const TaskRecord& task, int k, int max_steps,
                                     std::uint64_t seed);

// Writes every demo asset (task files, fixtures, a sample trajectory with a
// judge fixture) into `dir` for the CLI walkthrough in the README.
void write_demo_assets(const std::filesystem::path& dir);

}  // namespace nest::demo
