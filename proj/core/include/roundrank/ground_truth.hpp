// Hidden permutations and the rank view algorithms are judged against.
#pragma once

#include <cstdint>
#include <vector>

#include "roundrank/noise.hpp"
#include "roundrank/types.hpp"

namespace roundrank {

// A hidden bijection item id -> rank in [1, n], 1 = best.
struct GroundTruth {
  std::uint32_t n = 0;
  std::uint64_t seed = 0;
  std::vector<Rank> rank_of;  // indexed by item id
};

// Uniformly random permutation, Fisher-Yates over a seeded generator.
// Identical (n, seed) produce identical permutations.
GroundTruth make_ground_truth(std::uint32_t n, std::uint64_t seed);

// Wraps an explicit rank assignment (used by exhaustive enumeration).
GroundTruth ground_truth_from_ranks(std::vector<Rank> rank_of);

// Items of ranks 1..k in rank order. k = n yields the full sort.
std::vector<ItemId> true_sorted_topk(const GroundTruth& gt, std::uint64_t k);

// Dummy items requested by an algorithm around the real universe.
// Ids: real items keep [0, n); top dummies take [n, n+top) and rank better
// than every real item; bottom dummies take [n+top, n+top+bottom) and rank
// worse than everything.
struct PaddingSpec {
  std::uint32_t top = 0;
  std::uint32_t bottom = 0;
  std::uint32_t total() const { return top + bottom; }
};

// Immutable rank table over the padded universe; safe to share across threads.
class RankView {
 public:
  RankView(const GroundTruth& gt, PaddingSpec padding = {});

  std::uint32_t size() const { return static_cast<std::uint32_t>(rank_.size()); }
  std::uint32_t n_real() const { return n_real_; }
  bool is_dummy(ItemId id) const { return id >= n_real_; }
  Rank rank(ItemId id) const { return rank_[id]; }
  const Rank* data() const { return rank_.data(); }

 private:
  std::uint32_t n_real_ = 0;
  std::vector<Rank> rank_;  // indexed by padded item id
};

// Plain single-comparison oracle (spec surface; the harness uses a batched
// path with identical semantics). Draws u from coords; the truly better item
// wins iff u < p. Noiseless always favors the better item.
ComparisonOutcome compare(const GroundTruth& gt, const NoiseModel& noise,
                          const ComparisonRequest& req,
                          const NoiseCoordinates& coords);
ComparisonOutcome compare(const RankView& view, const NoiseModel& noise,
                          const ComparisonRequest& req,
                          const NoiseCoordinates& coords);

}  // namespace roundrank
