#include "roundrank/ground_truth.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace roundrank {

namespace {

// Lemire-style bounded draw; keeps permutations reproducible independent of
// the standard library's distribution internals.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  return static_cast<std::uint64_t>(
      (static_cast<__uint128_t>(rng()) * bound) >> 64);
}

}  // namespace

GroundTruth make_ground_truth(std::uint32_t n, std::uint64_t seed) {
  if (n == 0) throw InvalidUniverseError("universe must contain at least one item");
  std::vector<ItemId> by_rank(n);
  std::iota(by_rank.begin(), by_rank.end(), ItemId{0});
  std::mt19937_64 rng(seed);
  for (std::uint32_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::uint32_t>(bounded(rng, i + 1));
    std::swap(by_rank[i], by_rank[j]);
  }
  GroundTruth gt;
  gt.n = n;
  gt.seed = seed;
  gt.rank_of.assign(n, 0);
  for (std::uint32_t r = 0; r < n; ++r) gt.rank_of[by_rank[r]] = r + 1;
  return gt;
}

GroundTruth ground_truth_from_ranks(std::vector<Rank> rank_of) {
  const auto n = static_cast<std::uint32_t>(rank_of.size());
  if (n == 0) throw InvalidUniverseError("universe must contain at least one item");
  std::vector<std::uint8_t> seen(n + 1, 0);
  for (Rank r : rank_of) {
    if (r < 1 || r > n || seen[r]) throw InvalidParameterError("ranks must form a bijection onto [1, n]");
    seen[r] = 1;
  }
  GroundTruth gt;
  gt.n = n;
  gt.seed = 0;
  gt.rank_of = std::move(rank_of);
  return gt;
}

std::vector<ItemId> true_sorted_topk(const GroundTruth& gt, std::uint64_t k) {
  if (k < 1 || k > gt.n) throw InvalidParameterError("k must lie in [1, n]");
  std::vector<ItemId> by_rank(gt.n);
  for (ItemId id = 0; id < gt.n; ++id) by_rank[gt.rank_of[id] - 1] = id;
  by_rank.resize(k);
  return by_rank;
}

RankView::RankView(const GroundTruth& gt, PaddingSpec padding)
    : n_real_(gt.n) {
  const std::uint64_t total =
      static_cast<std::uint64_t>(gt.n) + padding.top + padding.bottom;
  rank_.resize(total);
  // Top dummies occupy ranks 1..top, reals shift by top, bottom dummies trail.
  for (ItemId id = 0; id < gt.n; ++id) rank_[id] = gt.rank_of[id] + padding.top;
  for (std::uint32_t i = 0; i < padding.top; ++i) rank_[gt.n + i] = i + 1;
  for (std::uint32_t i = 0; i < padding.bottom; ++i)
    rank_[gt.n + padding.top + i] = padding.top + gt.n + i + 1;
}

namespace {

ComparisonOutcome compare_on_ranks(const Rank* ranks, std::uint32_t universe,
                                   const NoiseModel& noise,
                                   const ComparisonRequest& req,
                                   const NoiseCoordinates& coords) {
  if (req.a == req.b) throw SelfComparisonError("cannot compare an item to itself");
  if (req.a >= universe || req.b >= universe)
    throw InvalidParameterError("comparison request outside the universe");
  const ItemId better = ranks[req.a] < ranks[req.b] ? req.a : req.b;
  const ItemId worse = better == req.a ? req.b : req.a;
  if (noise.noiseless_effective()) return {req, better};
  const bool truthful = uniform01(coords) < noise.p;
  return {req, truthful ? better : worse};
}

}  // namespace

ComparisonOutcome compare(const GroundTruth& gt, const NoiseModel& noise,
                          const ComparisonRequest& req,
                          const NoiseCoordinates& coords) {
  return compare_on_ranks(gt.rank_of.data(), gt.n, noise, req, coords);
}

ComparisonOutcome compare(const RankView& view, const NoiseModel& noise,
                          const ComparisonRequest& req,
                          const NoiseCoordinates& coords) {
  return compare_on_ranks(view.data(), view.size(), noise, req, coords);
}

}  // namespace roundrank
