#include "roundrank/harness.hpp"

#include <algorithm>
#include <tuple>

namespace roundrank {

namespace {

// Hot kernel: counts draws in [o0, o0 + count) whose noise bits fall below
// the Bernoulli threshold. Written so the compiler can vectorize the mix.
std::uint32_t count_below(std::uint64_t stream_base, std::uint64_t o0,
                          std::uint32_t count, std::uint64_t threshold) {
  std::uint64_t key = stream_base + (o0 + 1) * kGolden;
  std::uint32_t wins = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint64_t x = key;
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    wins += (x < threshold);
    key += kGolden;
  }
  return wins;
}

// Majority verdict over `reps` (odd) truthful/untruthful draws. Evaluation
// stops once the majority is locked; the verdict is identical to evaluating
// every draw, and the comparison count reported upstream is always `reps`.
bool truth_wins_majority(std::uint64_t stream_base, std::uint64_t o0,
                         std::uint32_t reps, std::uint64_t threshold) {
  const std::uint32_t need = reps / 2 + 1;
  std::uint32_t truthful = count_below(stream_base, o0, need, threshold);
  std::uint32_t done = need;
  while (done < reps && truthful < need && done - truthful < need) {
    const std::uint32_t chunk = std::min<std::uint32_t>(reps - done, 64);
    truthful += count_below(stream_base, o0 + done, chunk, threshold);
    done += chunk;
  }
  return truthful >= need;
}

struct EvalContext {
  const Rank* ranks = nullptr;
  std::uint32_t universe = 0;
  bool noiseless = false;
  std::uint64_t threshold = 0;
  std::uint64_t stream_base = 0;
  std::uint32_t round = 0;
  // Slow-path features.
  Transcript* transcript = nullptr;
  const NoiseFlip* flip = nullptr;
};

void check_pair(const EvalContext& ctx, ItemId a, ItemId b) {
  if (a == b) throw SelfComparisonError("batch rejected: self-comparison");
  if (a >= ctx.universe || b >= ctx.universe)
    throw InvalidParameterError("batch rejected: item outside the universe");
}

// Exact per-draw path: used when a transcript is recorded, a flip is
// injected, or the budget truncates the batch mid-pair.
void evaluate_pair_slow(const EvalContext& ctx, ItemId a, ItemId b,
                        std::uint32_t reps_to_eval, std::uint64_t o0,
                        std::uint32_t issued_reps, RoundVerdicts* verdicts) {
  check_pair(ctx, a, b);
  const bool a_better = ctx.ranks[a] < ctx.ranks[b];
  std::uint32_t wins_a = 0;
  for (std::uint32_t i = 0; i < reps_to_eval; ++i) {
    const std::uint64_t ordinal = o0 + i;
    bool truthful = ctx.noiseless ||
                    noise_bits(ctx.stream_base, ordinal) < ctx.threshold;
    if (ctx.flip && ctx.flip->round_index == ctx.round &&
        ctx.flip->ordinal == ordinal)
      truthful = !truthful;
    wins_a += (truthful == a_better);
  }
  if (ctx.transcript)
    ctx.transcript->rounds.back().push_back(
        PairOutcome{{a, b}, reps_to_eval, wins_a});
  if (verdicts && reps_to_eval == issued_reps)
    verdicts->first_won.push_back(wins_a > issued_reps / 2 ? 1 : 0);
}

// Evaluates the first `allowed` comparisons of a batch. Returns verdicts for
// fully evaluated pairs in canonical order.
void evaluate_round(const EvalContext& ctx, const RoundBatch& batch,
                    std::uint64_t allowed, RoundVerdicts& verdicts) {
  verdicts.first_won.clear();
  if (ctx.transcript) ctx.transcript->rounds.emplace_back();
  const bool slow = ctx.transcript != nullptr || ctx.flip != nullptr;
  std::uint64_t ordinal = 0;
  std::uint64_t left = allowed;
  for (const auto& seg : batch.segments) {
    if (left == 0) break;
    for_each_pair(seg, [&](ItemId a, ItemId b, std::uint32_t reps) {
      if (left == 0) return;
      const auto now = static_cast<std::uint32_t>(
          std::min<std::uint64_t>(reps, left));
      if (slow || now < reps) {
        evaluate_pair_slow(ctx, a, b, now, ordinal, reps, &verdicts);
      } else if (ctx.noiseless) {
        check_pair(ctx, a, b);
        verdicts.first_won.push_back(ctx.ranks[a] < ctx.ranks[b] ? 1 : 0);
      } else {
        check_pair(ctx, a, b);
        const bool truth_won =
            truth_wins_majority(ctx.stream_base, ordinal, reps, ctx.threshold);
        const bool a_better = ctx.ranks[a] < ctx.ranks[b];
        verdicts.first_won.push_back(truth_won == a_better ? 1 : 0);
      }
      ordinal += reps;
      left -= now;
    });
  }
}

}  // namespace

RunStats execute(RoundAlgorithm& alg, const RankView& view,
                 const NoiseModel& noise, const ExecOptions& opts) {
  if (opts.max_rounds < 1)
    throw InvalidParameterError("max_rounds must be at least 1");
  RunStats stats;
  EvalContext ctx;
  ctx.ranks = view.data();
  ctx.universe = view.size();
  ctx.noiseless = noise.noiseless_effective();
  ctx.threshold = ctx.noiseless ? 0 : bernoulli_threshold(noise.p);
  ctx.transcript = opts.transcript;
  ctx.flip = opts.flip;

  RoundBatch batch;
  RoundVerdicts verdicts;
  const RoundVerdicts* prev = nullptr;
  for (std::uint32_t round = 1;; ++round) {
    batch.clear();
    if (!alg.next_batch(prev, batch)) {
      stats.output = alg.output();
      return stats;
    }
    if (static_cast<int>(round) > opts.max_rounds)
      throw RoundLimitError("algorithm exceeded the round limit");
    const std::uint64_t want = batch.comparison_count();
    std::uint64_t allowed = want;
    bool halt = false;
    if (opts.budget && stats.total_comparisons + want > *opts.budget) {
      allowed = *opts.budget - stats.total_comparisons;
      halt = true;
    }
    ctx.round = round;
    ctx.stream_base = noise_stream_base(opts.run_seed, round);
    evaluate_round(ctx, batch, allowed, verdicts);
    stats.comparisons_per_round.push_back(allowed);
    stats.total_comparisons += allowed;
    stats.rounds_used = static_cast<int>(round);
    if (halt) {
      stats.halted = true;
      stats.output = alg.finalize_on_halt();
      return stats;
    }
    prev = &verdicts;
  }
}

ItemId OracleHandle::winner(ItemId a, ItemId b, std::uint32_t round_index,
                            std::uint64_t ordinal) const {
  if (a == b) throw SelfComparisonError("self-comparison");
  const ItemId better = view_->rank(a) < view_->rank(b) ? a : b;
  const ItemId worse = better == a ? b : a;
  bool truthful =
      noise_.noiseless_effective() ||
      noise_bits(noise_stream_base(run_seed_, round_index), ordinal) <
          bernoulli_threshold(noise_.p);
  if (flip_ && flip_->round_index == round_index && flip_->ordinal == ordinal)
    truthful = !truthful;
  return truthful ? better : worse;
}

namespace {

using FlatBatch = std::vector<std::tuple<ItemId, ItemId, std::uint32_t>>;

FlatBatch flatten(const RoundBatch& batch) {
  FlatBatch flat;
  flat.reserve(batch.pair_count());
  for_each_pair(batch, [&](ItemId a, ItemId b, std::uint32_t reps) {
    flat.emplace_back(a, b, reps);
  });
  return flat;
}

}  // namespace

AdaptivenessReport audit_adaptiveness(
    const std::function<std::unique_ptr<RoundAlgorithm>(const OracleHandle&)>&
        factory,
    const RankView& view, const NoiseModel& noise, int probe_count,
    std::uint64_t run_seed) {
  AdaptivenessReport report;

  // Drives an instance up to `upto` rounds (0 = run to completion), applying
  // `flip` to the noise stream, and returns the flattened batches.
  auto capture = [&](const NoiseFlip* flip, int upto,
                     std::vector<std::uint64_t>* round_sizes) {
    OracleHandle handle(view, noise, run_seed, flip);
    auto alg = factory(handle);
    EvalContext ctx;
    ctx.ranks = view.data();
    ctx.universe = view.size();
    ctx.noiseless = noise.noiseless_effective();
    ctx.threshold = ctx.noiseless ? 0 : bernoulli_threshold(noise.p);
    ctx.flip = flip;
    std::vector<FlatBatch> batches;
    RoundBatch batch;
    RoundVerdicts verdicts;
    const RoundVerdicts* prev = nullptr;
    const int limit = alg->rounds_declared() + 4;
    for (int round = 1; round <= limit; ++round) {
      batch.clear();
      if (!alg->next_batch(prev, batch)) break;
      batches.push_back(flatten(batch));
      if (round_sizes) round_sizes->push_back(batch.comparison_count());
      if (upto > 0 && round >= upto) break;
      ctx.round = static_cast<std::uint32_t>(round);
      ctx.stream_base = noise_stream_base(run_seed, static_cast<std::uint32_t>(round));
      evaluate_round(ctx, batch, batch.comparison_count(), verdicts);
      prev = &verdicts;
    }
    return batches;
  };

  std::vector<std::uint64_t> round_sizes;
  const auto reference = capture(nullptr, 0, &round_sizes);
  const int rounds = static_cast<int>(reference.size());
  if (rounds == 0) {
    report.probes_run = 0;
    return report;  // nothing to probe; trivially pure
  }

  for (int probe = 0; probe < probe_count; ++probe) {
    const int t = 1 + probe % rounds;
    const std::uint64_t size = round_sizes[t - 1];
    if (size == 0) continue;
    // Divergence point: alternate early, late, and a seeded middle position.
    std::uint64_t at = 0;
    switch ((probe / rounds) % 3) {
      case 0: at = 0; break;
      case 1: at = size - 1; break;
      default: at = mix64(run_seed + probe) % size; break;
    }
    NoiseFlip flip{static_cast<std::uint32_t>(t), at};
    const auto flipped = capture(&flip, t, nullptr);
    for (int r = 0; r < t && r < static_cast<int>(flipped.size()); ++r) {
      if (flipped[r] != reference[r]) {
        report.passed = false;
        report.failure_detail =
            "batch " + std::to_string(r + 1) +
            " changed when outcomes diverged inside round " + std::to_string(t);
        report.probes_run = probe + 1;
        return report;
      }
    }
    if (flipped.size() < static_cast<std::size_t>(std::min(t, rounds))) {
      report.passed = false;
      report.failure_detail = "instance ended early under a round-" +
                              std::to_string(t) + " divergence";
      report.probes_run = probe + 1;
      return report;
    }
    report.probes_run = probe + 1;
  }
  return report;
}

}  // namespace roundrank
