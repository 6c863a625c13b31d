#include "roundrank/runner.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "roundrank/noiseless.hpp"

namespace roundrank {

namespace {

constexpr std::pair<AlgorithmId, const char*> kAlgorithmNames[] = {
    {AlgorithmId::OneRoundSortedTopK, "one_round_sorted_topk"},
    {AlgorithmId::RSorted1Id, "rsorted1"},
    {AlgorithmId::RSorted2Id, "rsorted2"},
    {AlgorithmId::NoiselessDispatch, "noiseless_dispatch"},
    {AlgorithmId::RRoundSort, "r_round_sort"},
    {AlgorithmId::FindMaxId, "find_max"},
    {AlgorithmId::OneRoundTopK, "one_round_topk"},
    {AlgorithmId::TwoRoundTopKId, "two_round_topk"},
    {AlgorithmId::OneRoundSortedTopKNoisy, "one_round_sorted_topk_noisy"},
    {AlgorithmId::TwoRoundSortedTopKNoisyId, "two_round_sorted_topk_noisy"},
    {AlgorithmId::RepeatLiftId, "repeat_lift"},
};

std::vector<ItemId> iota_items(std::uint32_t n) {
  std::vector<ItemId> items(n);
  std::iota(items.begin(), items.end(), ItemId{0});
  return items;
}

}  // namespace

const char* to_string(AlgorithmId id) {
  for (auto& [algo, name] : kAlgorithmNames)
    if (algo == id) return name;
  return "unknown";
}

std::optional<AlgorithmId> algorithm_from_string(const std::string& name) {
  for (auto& [algo, algo_name] : kAlgorithmNames)
    if (name == algo_name) return algo;
  return std::nullopt;
}

std::vector<AlgorithmId> all_algorithms() {
  std::vector<AlgorithmId> out;
  for (auto& [algo, name] : kAlgorithmNames) out.push_back(algo);
  return out;
}

void ExperimentConfig::validate() const {
  if (n == 0) throw ConfigError("n must be at least 1");
  if (k < 1 || k > n) throw ConfigError("k must lie in [1, n]");
  if (jobs < 1) throw ConfigError("jobs must be at least 1");
  if (!(constants.constant_scale > 0.0))
    throw ConfigError("constant_scale must be positive");
  if (!(constants.c > 0.0) || !(constants.c1 > 0.0) || !(constants.c2 > 0.0))
    throw ConfigError("repetition constants must be positive");
  if (constants.c0 && !(*constants.c0 > 0.0))
    throw ConfigError("c0 must be positive");
  switch (algorithm) {
    case AlgorithmId::RSorted1Id:
      if (r < 2) throw ConfigError("rsorted1 requires r >= 2");
      break;
    case AlgorithmId::RSorted2Id:
      if (r < 3) throw ConfigError("rsorted2 requires r >= 3");
      break;
    case AlgorithmId::NoiselessDispatch:
    case AlgorithmId::RRoundSort:
    case AlgorithmId::RepeatLiftId:
      if (r < 1) throw ConfigError("r must be at least 1");
      break;
    case AlgorithmId::FindMaxId:
      if (k != 1) throw ConfigError("find_max solves top-1; set k = 1");
      if (!(find_max_delta > 0.0) || find_max_delta > 1.0 / 9.0)
        throw ConfigError("find_max requires 0 < delta <= 1/9");
      break;
    case AlgorithmId::TwoRoundSortedTopKNoisyId:
      if (k < 2) throw ConfigError("two_round_sorted_topk_noisy requires k >= 2");
      break;
    default:
      break;
  }
  if (lift_reps && *lift_reps % 2 == 0)
    throw ConfigError("lift repetitions must be odd");
}

AlgorithmPlan plan_algorithm(const ExperimentConfig& config,
                             std::uint64_t alg_seed) {
  AlgorithmPlan plan;
  const std::uint32_t n = config.n;
  const std::uint64_t k = config.k;
  switch (config.algorithm) {
    case AlgorithmId::OneRoundSortedTopK:
      plan.algorithm = one_round_sorted_topk(n, k);
      plan.task = TaskKind::SortedTopK;
      plan.rounds_declared = 1;
      break;
    case AlgorithmId::RSorted1Id:
      plan.algorithm = rsorted1(n, k, config.r, alg_seed);
      plan.task = TaskKind::SortedTopK;
      plan.rounds_declared = config.r;
      break;
    case AlgorithmId::RSorted2Id:
      plan.algorithm = rsorted2(n, k, config.r, alg_seed);
      plan.task = TaskKind::SortedTopK;
      plan.rounds_declared = config.r;
      break;
    case AlgorithmId::NoiselessDispatch:
      plan.algorithm = noiseless_sorted_topk(n, k, config.r, alg_seed);
      plan.task = TaskKind::SortedTopK;
      plan.rounds_declared = config.r;
      break;
    case AlgorithmId::RRoundSort:
      plan.algorithm = r_round_sort(n, config.r, alg_seed);
      plan.task = TaskKind::FullSort;
      plan.rounds_declared = config.r;
      break;
    case AlgorithmId::FindMaxId: {
      const auto padded = std::bit_ceil<std::uint64_t>(n);
      plan.padding = {0, static_cast<std::uint32_t>(padded - n)};
      plan.algorithm = find_max(iota_items(n), config.find_max_delta,
                                config.constants, n, n);
      plan.task = TaskKind::TopKSet;
      plan.rounds_declared = 1;
      break;
    }
    case AlgorithmId::OneRoundTopK:
      plan.algorithm = one_round_topk(iota_items(n), k, config.constants, alg_seed);
      plan.task = TaskKind::TopKSet;
      plan.rounds_declared = 1;
      break;
    case AlgorithmId::TwoRoundTopKId: {
      auto alg = two_round_topk(n, k, config.constants, alg_seed);
      plan.padding = alg->padding();
      plan.budget = alg->budget();
      plan.algorithm = std::move(alg);
      plan.task = TaskKind::TopKSet;
      plan.rounds_declared = 2;
      break;
    }
    case AlgorithmId::OneRoundSortedTopKNoisy:
      if (k == 1) {
        // Sorted top-1 is top-1: route to FindMax at delta = 1/9.
        const auto padded = std::bit_ceil<std::uint64_t>(n);
        plan.padding = {0, static_cast<std::uint32_t>(padded - n)};
        plan.algorithm = find_max(iota_items(n), 1.0 / 9.0, config.constants, n, n);
      } else {
        plan.algorithm = one_round_sorted_topk_noisy(iota_items(n), k,
                                                     config.constants, alg_seed, n);
      }
      plan.task = TaskKind::SortedTopK;
      plan.rounds_declared = 1;
      break;
    case AlgorithmId::TwoRoundSortedTopKNoisyId: {
      const double threshold =
          config.small_k_threshold.value_or(pow_frac(n, 1, 10));
      if (static_cast<double>(k) >= threshold) {
        plan.algorithm = repeat_lift(
            noiseless_sorted_topk(n, k, 2, alg_seed),
            lift_reps_for(n, config.constants.constant_scale));
      } else {
        auto alg = std::make_unique<TwoRoundSortedTopKNoisy>(n, k,
                                                             config.constants,
                                                             alg_seed);
        plan.padding = alg->padding();
        plan.algorithm = std::move(alg);
      }
      plan.task = TaskKind::SortedTopK;
      plan.rounds_declared = 2;
      break;
    }
    case AlgorithmId::RepeatLiftId: {
      const std::uint32_t reps = config.lift_reps.value_or(
          lift_reps_for(n, config.constants.constant_scale));
      plan.algorithm =
          repeat_lift(noiseless_sorted_topk(n, k, config.r, alg_seed), reps);
      plan.task = TaskKind::SortedTopK;
      plan.rounds_declared = config.r;
      break;
    }
  }
  return plan;
}

TrialSeeds trial_seeds(std::uint64_t base_seed, std::uint64_t trial_index) {
  TrialSeeds seeds;
  seeds.trial = mix64(base_seed + kGolden * (trial_index + 1));
  seeds.ground_truth = mix64(seeds.trial + 1);
  seeds.algorithm = mix64(seeds.trial + 2);
  seeds.noise = mix64(seeds.trial + 3);
  return seeds;
}

bool output_correct(TaskKind task, const GroundTruth& gt, std::uint64_t k,
                    const std::vector<ItemId>& output) {
  switch (task) {
    case TaskKind::FullSort:
      return output == true_sorted_topk(gt, gt.n);
    case TaskKind::SortedTopK:
      return output == true_sorted_topk(gt, k);
    case TaskKind::TopKSet: {
      auto expected = true_sorted_topk(gt, k);
      std::sort(expected.begin(), expected.end());
      auto got = output;
      std::sort(got.begin(), got.end());
      return got == expected;
    }
  }
  return false;
}

TrialRecord run_trial(const ExperimentConfig& config, std::uint64_t trial_index,
                      bool measure_time) {
  const TrialSeeds seeds = trial_seeds(config.base_seed, trial_index);
  const GroundTruth gt = make_ground_truth(config.n, seeds.ground_truth);
  AlgorithmPlan plan = plan_algorithm(config, seeds.algorithm);
  const RankView view(gt, plan.padding);
  ExecOptions opts;
  opts.max_rounds = plan.rounds_declared;
  opts.budget = plan.budget;
  opts.run_seed = seeds.noise;

  TrialRecord record;
  record.index = trial_index;
  record.seed = seeds.trial;
  const auto start = std::chrono::steady_clock::now();
  record.stats = execute(*plan.algorithm, view, config.noise, opts);
  if (measure_time) {
    const auto end = std::chrono::steady_clock::now();
    record.wall_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(end - start).count();
  }
  record.correct = output_correct(plan.task, gt, config.k, record.stats.output);
  record.stats.correct = record.correct;
  return record;
}

SuccessReport estimate_success_rate(
    const ExperimentConfig& config, std::uint64_t trials,
    std::uint64_t base_seed, int jobs,
    const std::function<void(const TrialRecord&)>& sink, bool measure_time) {
  ExperimentConfig cfg = config;
  cfg.base_seed = base_seed;
  cfg.trials = trials;

  std::vector<TrialRecord> records(trials);
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::uint64_t i = next.fetch_add(1);
      if (i >= trials) return;
      try {
        records[i] = run_trial(cfg, i, measure_time);
      } catch (...) {
        std::scoped_lock lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(trials ? trials : 1)));
  if (workers == 1 || trials <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  SuccessReport report;
  report.trials = trials;
  std::optional<std::uint64_t> budget;
  if (trials > 0) {
    const AlgorithmPlan probe = plan_algorithm(cfg, trial_seeds(base_seed, 0).algorithm);
    budget = probe.budget;
  }
  double total = 0.0;
  double wall = 0.0;
  for (const auto& record : records) {
    report.successes += record.correct ? 1 : 0;
    total += static_cast<double>(record.stats.total_comparisons);
    wall += static_cast<double>(record.wall_ms);
    report.max_comparisons =
        std::max(report.max_comparisons, record.stats.total_comparisons);
    report.max_rounds_used = std::max(report.max_rounds_used, record.stats.rounds_used);
    if (budget && record.stats.total_comparisons > *budget)
      ++report.budget_violations;
    if (sink) sink(record);
  }
  report.mean_comparisons = trials ? total / static_cast<double>(trials) : 0.0;
  report.mean_wall_ms = trials ? wall / static_cast<double>(trials) : 0.0;
  report.wilson = wilson_interval(report.successes, trials);
  return report;
}

ExhaustiveReport exhaustive_small_check(
    const std::function<std::unique_ptr<RoundAlgorithm>(
        std::uint32_t n, std::uint64_t k, std::uint64_t seed)>& factory,
    TaskKind task, std::uint32_t n_max, int seeds, int jobs, bool all_k) {
  if (n_max > 8)
    throw InvalidParameterError("exhaustive check is limited to n <= 8");
  ExhaustiveReport report;
  std::mutex report_mutex;
  const NoiseModel noiseless = NoiseModel::noiseless();

  for (std::uint32_t n = 1; n <= n_max; ++n) {
    std::vector<std::vector<Rank>> perms;
    std::vector<Rank> ranks(n);
    std::iota(ranks.begin(), ranks.end(), Rank{1});
    do {
      perms.push_back(ranks);
    } while (std::next_permutation(ranks.begin(), ranks.end()));

    std::atomic<std::size_t> next{0};
    std::atomic<std::uint64_t> cases{0};
    std::atomic<std::uint64_t> failures{0};
    auto worker = [&]() {
      for (;;) {
        const std::size_t p = next.fetch_add(1);
        if (p >= perms.size()) return;
        const GroundTruth gt = ground_truth_from_ranks(perms[p]);
        const RankView view(gt);
        for (std::uint64_t k = all_k ? 1 : n; k <= n; ++k) {
          for (int s = 0; s < seeds; ++s) {
            const std::uint64_t seed = mix64(kGolden * (p + 1) + 977 * k + s);
            auto alg = factory(n, k, seed);
            ExecOptions opts;
            opts.max_rounds = alg->rounds_declared();
            opts.run_seed = mix64(seed + 5);
            RunStats stats;
            bool ok = false;
            std::string error;
            try {
              stats = execute(*alg, view, noiseless, opts);
              ok = output_correct(task, gt, k, stats.output);
            } catch (const std::exception& e) {
              error = e.what();
            }
            cases.fetch_add(1);
            if (!ok) {
              failures.fetch_add(1);
              std::scoped_lock lock(report_mutex);
              if (report.first_failure.empty()) {
                std::ostringstream oss;
                oss << "n=" << n << " k=" << k << " seed=" << s << " ranks=[";
                for (Rank r : perms[p]) oss << r << ' ';
                oss << "] output=[";
                for (ItemId id : stats.output) oss << id << ' ';
                oss << "]";
                if (!error.empty()) oss << " error=" << error;
                report.first_failure = oss.str();
              }
            }
          }
        }
      }
    };
    const int workers = std::max(1, jobs);
    if (workers == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
    report.cases += cases.load();
    report.failures += failures.load();
  }
  return report;
}

}  // namespace roundrank
