// Noisy-case algorithms: recursive FindMax, the level-ladder 1-round top-k,
// the budgeted 2-round top-k with placement walks, the 1- and 2-round sorted
// top-k constructions, and the generic repetition lift.
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "roundrank/constants.hpp"
#include "roundrank/harness.hpp"

namespace roundrank {

// Majority winner of an odd number of outcomes for one pair.
ItemId majority(ItemId a, ItemId b, std::uint64_t wins_a, std::uint64_t wins_b);
ItemId majority(std::span<const ItemId> winners);

// l_0 = n and l_{i+1} = max(ceil(log2 l_i), 1); log* = first index hitting 1.
struct LevelLadder {
  std::vector<std::uint64_t> levels;
  int log_star = 0;
};
LevelLadder level_ladder(std::uint64_t n);

// J in [0, len] maximizing the prefix sum of a +/-1 row; empty prefix counts
// as 0 and ties break toward the smallest J.
std::size_t place_by_walk(std::span<const std::int8_t> row);

// Smallest J with |P_0| + ... + |P_J| >= k (the prefix includes P_0); the
// last index if the total never reaches k.
std::size_t boundary_chunk_index(std::span<const std::uint64_t> chunk_sizes,
                                 std::uint64_t k);

// Majority-verdict table for one trim level: a sample S compared against a
// pool W (S is a subset of W). Owns the batch layout for the level and
// resolves verdict bits back to "sample item beats x" queries.
class TrimLevelVerdicts {
 public:
  TrimLevelVerdicts() = default;
  TrimLevelVerdicts(std::vector<ItemId> pool, std::vector<ItemId> sample,
                    std::uint32_t reps);

  void emit(RoundBatch& out) const;
  std::uint64_t pair_count() const;
  std::uint64_t comparison_count() const { return pair_count() * reps_; }
  void bind(VerdictCursor& cur);

  const std::vector<ItemId>& pool() const { return pool_; }
  const std::vector<ItemId>& sample() const { return sample_; }
  std::uint32_t reps() const { return reps_; }
  bool in_pool(ItemId x) const;
  // Whether sample[j] won the majority against pool member x.
  bool sample_beats(std::size_t j, ItemId x) const;

  // Classifies active items the level never compared (outside its pool):
  // negative = placed above the window (treated as better than the pool),
  // positive = placed below. Windowed levels set this from the round-1
  // placement; levels whose pool is the whole active set never consult it.
  void set_side_of(std::function<int(ItemId)> side) { side_ = std::move(side); }
  bool has_side() const { return static_cast<bool>(side_); }
  int side_of(ItemId x) const { return side_(x); }

 private:
  std::int64_t sample_index(ItemId x) const;
  std::int64_t rest_index(ItemId x) const;

  std::vector<ItemId> pool_, sample_, rest_;
  std::vector<std::pair<ItemId, std::uint32_t>> sample_sorted_, rest_sorted_,
      pool_sorted_;
  std::uint32_t reps_ = 1;
  std::function<int(ItemId)> side_;
  const std::uint8_t* cross_ = nullptr;  // sample-major over rest
  const std::uint8_t* within_ = nullptr; // all pairs within sample
};

// One step of the accept/reject cascade shared by the 1-round and 2-round
// top-k algorithms (test-facing form; the execution path uses the same rules
// over TrimLevelVerdicts).
struct TrimState {
  std::vector<ItemId> active;    // N_i, sorted by id
  std::vector<ItemId> accepted;  // T_{i-1}
  std::int64_t quota = 0;        // k_i
  // Filled by trim_step for inspection:
  std::optional<ItemId> a, b;
  std::vector<ItemId> A, B;      // B is kept disjoint from A
};

TrimState trim_step(const TrimState& state, std::span<const ItemId> sample,
                    const std::function<bool(ItemId, ItemId)>& beats);

struct TrimTraceLevel {
  std::optional<ItemId> a, b;
  std::vector<ItemId> A, B;
  std::vector<ItemId> active_after;
  std::int64_t quota_after = 0;
};

struct TrimResult {
  std::vector<ItemId> accepted;
  std::vector<ItemId> active_left;
  std::int64_t quota_left = 0;
};

TrimResult run_trim_cascade(std::span<TrimLevelVerdicts> levels,
                            std::vector<ItemId> active,
                            std::vector<ItemId> accepted, std::int64_t quota,
                            std::vector<TrimTraceLevel>* trace = nullptr);

// FindMax recursion (single round): the set splits in halves, all cross
// pairs at a node repeat odd-ceil(100 ln(1/delta) * scale) times, and
// majority winners meet up the tree. The set pads to a power of two with
// worst-rank dummies.
class FindMaxCore {
 public:
  FindMaxCore(std::vector<ItemId> items, double delta,
              const AlgoConstants& constants, ItemId dummy_first);

  void emit(RoundBatch& out) const;
  void consume(VerdictCursor& cur);
  ItemId winner() const { return winner_; }
  std::uint64_t planned_comparisons() const;
  std::size_t padded_size() const { return padded_.size(); }

 private:
  struct Node {
    std::uint32_t lo, mid, hi;
    std::uint32_t reps;
    const std::uint8_t* bits = nullptr;
  };
  std::uint32_t resolve(std::uint32_t lo, std::uint32_t hi, std::size_t& node) const;

  std::vector<ItemId> padded_;
  std::vector<Node> nodes_;  // pre-order
  ItemId winner_ = 0;
};

// delta <= 1/9. Dummies are stripped from the output; padding is declared to
// the runner via plan_algorithm.
std::unique_ptr<RoundAlgorithm> find_max(std::vector<ItemId> items, double delta,
                                         const AlgoConstants& constants,
                                         ItemId dummy_first,
                                         std::uint32_t n_real);

// One-round top-k over an item list: level samples S_i of ceil(n / l_i^2)
// items, odd-ceil(c * l_i * scale) repetitions, trim cascade on the
// majorities. Usable standalone or embedded (emit/consume once).
class TopKCore {
 public:
  TopKCore(std::vector<ItemId> items, std::uint64_t k,
           const AlgoConstants& constants, std::uint64_t seed);

  void emit(RoundBatch& out) const;
  void consume(VerdictCursor& cur, std::vector<TrimTraceLevel>* trace = nullptr);
  const std::vector<ItemId>& result() const { return result_; }
  std::uint64_t planned_comparisons() const;
  const LevelLadder& ladder() const { return ladder_; }

 private:
  std::vector<ItemId> items_;
  std::uint64_t k_;
  LevelLadder ladder_;
  std::vector<TrimLevelVerdicts> levels_;
  std::vector<ItemId> result_;
};

std::unique_ptr<RoundAlgorithm> one_round_topk(std::vector<ItemId> items,
                                               std::uint64_t k,
                                               const AlgoConstants& constants,
                                               std::uint64_t seed);

// One-round sorted top-k: three independent one-round top-k copies vote on
// the set; every pair is also compared odd-ceil(100 (ln k + 1) * scale)
// times and the set is ordered by those majorities. k = 1 is routed to
// FindMax by plan_algorithm.
class SortedTopKNoisyCore {
 public:
  SortedTopKNoisyCore(std::vector<ItemId> items, std::uint64_t k,
                      const AlgoConstants& constants, std::uint64_t seed);

  void emit(RoundBatch& out) const;
  void consume(VerdictCursor& cur);
  const std::vector<ItemId>& result() const { return result_; }
  std::uint64_t planned_comparisons() const;

 private:
  std::vector<ItemId> items_;
  std::uint64_t k_;
  std::uint32_t pair_reps_;
  std::vector<TopKCore> copies_;
  std::vector<std::pair<ItemId, std::uint32_t>> items_sorted_;
  std::vector<ItemId> result_;
};

std::unique_ptr<RoundAlgorithm> one_round_sorted_topk_noisy(
    std::vector<ItemId> items, std::uint64_t k, const AlgoConstants& constants,
    std::uint64_t seed, std::uint32_t n_real);

// Two-round top-k (budgeted): round 1 places every item against
// ceil(n^(1/3)) sorted pivots via prefix-sum walks; round 2 trims the window
// around the boundary chunk. The run halts at c0 * n^(4/3) * scale
// comparisons (n pre-padding) and pads with dummy items around the universe
// when min(k, n-k) is small.
class TwoRoundTopK final : public RoundAlgorithm {
 public:
  TwoRoundTopK(std::uint32_t n, std::uint64_t k, const AlgoConstants& constants,
               std::uint64_t seed);

  bool next_batch(const RoundVerdicts* prev, RoundBatch& out) override;
  std::vector<ItemId> finalize_on_halt() override;
  const std::vector<ItemId>& output() const override { return output_; }
  int rounds_declared() const override { return 2; }

  static std::uint32_t padding_per_side(std::uint32_t n, std::uint64_t k);
  PaddingSpec padding() const { return padding_; }
  std::uint64_t budget() const { return budget_; }
  std::size_t pivot_count() const { return pivots_.size(); }
  std::size_t boundary_index() const { return m_; }

 private:
  void build_round2();

  std::uint32_t n_real_;
  std::uint64_t k_real_;
  PaddingSpec padding_;
  std::uint32_t n_;      // padded universe size
  std::uint64_t k_;      // shifted quota
  AlgoConstants constants_;
  std::uint64_t budget_;
  std::mt19937_64 rng_;
  LevelLadder ladder_;

  std::vector<ItemId> pivots_;      // sample order
  std::vector<ItemId> rest_;
  std::vector<ItemId> sorted_pivots_;
  std::vector<std::vector<ItemId>> placement_;  // P_0..P_g
  std::vector<std::int32_t> placement_of_;      // per item id
  std::size_t m_ = 0;

  std::vector<TrimLevelVerdicts> levels_;
  std::vector<ItemId> accepted_t0_;
  std::int64_t quota1_ = 0;

  int round_ = 0;
  std::vector<ItemId> output_;
};

std::unique_ptr<TwoRoundTopK> two_round_topk(std::uint32_t n, std::uint64_t k,
                                             const AlgoConstants& constants,
                                             std::uint64_t seed);

// Replays every request of a noiseless algorithm `reps` times (odd) in the
// same round and feeds the majority verdicts back as single outcomes.
class RepeatLift final : public RoundAlgorithm {
 public:
  RepeatLift(std::unique_ptr<RoundAlgorithm> inner, std::uint32_t reps);

  bool next_batch(const RoundVerdicts* prev, RoundBatch& out) override;
  std::vector<ItemId> finalize_on_halt() override { return inner_->finalize_on_halt(); }
  const std::vector<ItemId>& output() const override { return inner_->output(); }
  int rounds_declared() const override { return inner_->rounds_declared(); }
  std::uint32_t reps() const { return reps_; }

 private:
  std::unique_ptr<RoundAlgorithm> inner_;
  std::uint32_t reps_;
};

std::unique_ptr<RepeatLift> repeat_lift(std::unique_ptr<RoundAlgorithm> inner,
                                        std::uint32_t reps);

// Repetition count used when lifting a noiseless algorithm at universe size
// n: odd-ceil(ln(12 n^2) / D(1/2 || 1/3) * scale).
std::uint32_t lift_reps_for(std::uint32_t n, double constant_scale);

// Two-round sorted top-k, small-k branch: the universe pads up to a perfect
// cube, splits into random groups, every group elects a champion by majority
// over odd-ceil(200 ln k * scale) one-round top-1 copies, and the champions
// meet in a one-round sorted top-k in round 2. The large-k branch
// (k >= n^(1/10)) is built by plan_algorithm as a repetition lift of the
// noiseless 2-round dispatcher.
class TwoRoundSortedTopKNoisy final : public RoundAlgorithm {
 public:
  TwoRoundSortedTopKNoisy(std::uint32_t n, std::uint64_t k,
                          const AlgoConstants& constants, std::uint64_t seed);

  bool next_batch(const RoundVerdicts* prev, RoundBatch& out) override;
  std::vector<ItemId> finalize_on_halt() override;
  const std::vector<ItemId>& output() const override { return output_; }
  int rounds_declared() const override { return 2; }

  std::size_t group_count() const { return groups_.size(); }
  std::size_t group_size() const { return group_size_; }
  std::uint32_t copies_per_group() const { return copies_; }
  PaddingSpec padding() const { return {0, static_cast<std::uint32_t>(cube_ - n_real_)}; }

 private:
  std::uint32_t n_real_;
  std::uint64_t k_;
  AlgoConstants constants_;
  std::uint64_t final_seed_ = 0;
  std::uint64_t cube_ = 0;
  std::size_t group_size_ = 0;
  std::uint32_t copies_ = 0;
  std::vector<std::vector<ItemId>> groups_;
  std::vector<TopKCore> group_copies_;  // group-major, copy-minor
  std::vector<ItemId> champions_;
  std::unique_ptr<SortedTopKNoisyCore> final_round_;
  int round_ = 0;
  std::vector<ItemId> output_;
};

}  // namespace roundrank
