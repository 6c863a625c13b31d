// Experiment configuration, the algorithm registry, and the trial runner
// shared by the CLI, the verification suites, and the acceptance tests.
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "roundrank/harness.hpp"
#include "roundrank/noisy.hpp"
#include "roundrank/stats.hpp"

namespace roundrank {

enum class AlgorithmId {
  OneRoundSortedTopK,
  RSorted1Id,
  RSorted2Id,
  NoiselessDispatch,
  RRoundSort,
  FindMaxId,
  OneRoundTopK,
  TwoRoundTopKId,
  OneRoundSortedTopKNoisy,
  TwoRoundSortedTopKNoisyId,
  RepeatLiftId,
};

const char* to_string(AlgorithmId id);
std::optional<AlgorithmId> algorithm_from_string(const std::string& name);
std::vector<AlgorithmId> all_algorithms();

// How an output is judged: as an unordered set, an ordered prefix, or the
// full ordering.
enum class TaskKind { TopKSet, SortedTopK, FullSort };

struct ExperimentConfig {
  AlgorithmId algorithm = AlgorithmId::OneRoundSortedTopK;
  std::uint32_t n = 0;
  std::uint64_t k = 1;
  int r = 2;
  NoiseModel noise = NoiseModel::noiseless();
  std::uint64_t trials = 100;
  std::uint64_t base_seed = 1;
  AlgoConstants constants;
  double find_max_delta = 1.0 / 9.0;
  std::optional<std::uint32_t> lift_reps;           // repeat_lift override
  std::optional<double> small_k_threshold;          // alg-9 branch override
  int jobs = 1;
  std::string out_path;

  void validate() const;  // throws ConfigError
};

struct AlgorithmPlan {
  std::unique_ptr<RoundAlgorithm> algorithm;
  PaddingSpec padding;
  TaskKind task = TaskKind::SortedTopK;
  int rounds_declared = 1;
  std::optional<std::uint64_t> budget;  // algorithm-imposed halting budget
};

AlgorithmPlan plan_algorithm(const ExperimentConfig& config,
                             std::uint64_t alg_seed);

// Seeds derived per trial: ground truth, algorithm randomness, and the noise
// stream are independently replayable.
struct TrialSeeds {
  std::uint64_t trial, ground_truth, algorithm, noise;
};
TrialSeeds trial_seeds(std::uint64_t base_seed, std::uint64_t trial_index);

struct TrialRecord {
  std::uint64_t index = 0;
  std::uint64_t seed = 0;  // trial seed
  RunStats stats;
  bool correct = false;
  std::int64_t wall_ms = 0;  // measured only when requested
};

TrialRecord run_trial(const ExperimentConfig& config, std::uint64_t trial_index,
                      bool measure_time = false);

// Correctness of `output` for the task against the real ground truth.
bool output_correct(TaskKind task, const GroundTruth& gt, std::uint64_t k,
                    const std::vector<ItemId>& output);

struct SuccessReport {
  std::uint64_t trials = 0;
  std::uint64_t successes = 0;
  WilsonInterval wilson;
  double mean_comparisons = 0.0;
  std::uint64_t max_comparisons = 0;
  int max_rounds_used = 0;
  std::uint64_t budget_violations = 0;
  double mean_wall_ms = 0.0;
};

// Runs `trials` independent seeded trials (fresh ground truth and noise per
// trial) on a worker pool; `sink` receives records in trial order regardless
// of completion order, so parallel and serial runs emit identical streams.
SuccessReport estimate_success_rate(
    const ExperimentConfig& config, std::uint64_t trials,
    std::uint64_t base_seed, int jobs = 1,
    const std::function<void(const TrialRecord&)>& sink = nullptr,
    bool measure_time = false);

struct ExhaustiveReport {
  std::uint64_t cases = 0;
  std::uint64_t failures = 0;
  std::string first_failure;
};

// Every n <= n_max, every permutation, every k (or k = n for full sorts),
// `seeds` algorithm seeds, under the noiseless oracle: the output must equal
// the true answer. Requires n_max <= 8.
ExhaustiveReport exhaustive_small_check(
    const std::function<std::unique_ptr<RoundAlgorithm>(
        std::uint32_t n, std::uint64_t k, std::uint64_t seed)>& factory,
    TaskKind task, std::uint32_t n_max, int seeds = 3, int jobs = 1,
    bool all_k = true);

}  // namespace roundrank
