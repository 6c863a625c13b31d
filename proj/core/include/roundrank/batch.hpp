// Round batches: the ordered multiset of comparison requests one round issues.
//
// Large rounds are dominated by regular pair families (every item against a
// sample, all pairs within a set), so a batch is a sequence of segments
// rather than one flat request list. The canonical expansion order below
// defines both the ordinal numbering used by the noise stream and the order
// in which per-pair verdicts are delivered back:
//   - segments expand in order;
//   - PairBlock: listed pair order;
//   - CrossBlock: left-major (for each left item, every right item);
//   - AllPairsBlock: positions (i, j), i < j, j-minor;
//   - within a pair, its `reps` repetitions occupy consecutive ordinals.
#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "roundrank/noise.hpp"
#include "roundrank/types.hpp"

namespace roundrank {

struct PairBlock {
  std::vector<ComparisonRequest> pairs;
  std::uint32_t reps = 1;
};

// All pairs {l, r}, l from left, r from right. Sets must be disjoint.
struct CrossBlock {
  std::vector<ItemId> left;
  std::vector<ItemId> right;
  std::uint32_t reps = 1;
};

// All unordered pairs within `items`.
struct AllPairsBlock {
  std::vector<ItemId> items;
  std::uint32_t reps = 1;
};

using BatchSegment = std::variant<PairBlock, CrossBlock, AllPairsBlock>;

struct RoundBatch {
  std::vector<BatchSegment> segments;

  void clear() { segments.clear(); }
  std::uint64_t pair_count() const;
  std::uint64_t comparison_count() const;  // sum of reps over all pairs
};

std::uint64_t segment_pair_count(const BatchSegment& seg);
std::uint64_t segment_comparison_count(const BatchSegment& seg);

// Visits every canonical pair in order: f(ItemId a, ItemId b, uint32_t reps).
template <class F>
void for_each_pair(const BatchSegment& seg, F&& f) {
  if (const auto* pb = std::get_if<PairBlock>(&seg)) {
    for (const auto& p : pb->pairs) f(p.a, p.b, pb->reps);
  } else if (const auto* cb = std::get_if<CrossBlock>(&seg)) {
    for (ItemId l : cb->left)
      for (ItemId r : cb->right) f(l, r, cb->reps);
  } else {
    const auto& ap = std::get<AllPairsBlock>(seg);
    const std::size_t m = ap.items.size();
    for (std::size_t i = 0; i + 1 < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j) f(ap.items[i], ap.items[j], ap.reps);
  }
}

template <class F>
void for_each_pair(const RoundBatch& batch, F&& f) {
  for (const auto& seg : batch.segments) for_each_pair(seg, f);
}

// Position of pair (i, j), i < j, in the canonical all-pairs order of m items.
inline std::uint64_t all_pairs_index(std::uint64_t m, std::uint64_t i,
                                     std::uint64_t j) {
  return i * m - i * (i + 1) / 2 + (j - i - 1);
}

// Majority verdicts for one evaluated round, aligned with canonical pair
// order: 1 means the pair's first endpoint won the majority of its reps.
struct RoundVerdicts {
  std::vector<std::uint8_t> first_won;
};

// Sequential reader used by algorithms to slice a round's verdicts among the
// sub-structures that emitted the batch.
class VerdictCursor {
 public:
  explicit VerdictCursor(const RoundVerdicts& v) : data_(v.first_won.data()), size_(v.first_won.size()) {}

  const std::uint8_t* take(std::size_t pairs) {
    if (pos_ + pairs > size_) throw Error("verdict cursor overrun");
    const std::uint8_t* out = data_ + pos_;
    pos_ += pairs;
    return out;
  }
  std::size_t remaining() const { return size_ - pos_; }

 private:
  const std::uint8_t* data_ = nullptr;
  std::size_t size_ = 0;
  std::size_t pos_ = 0;
};

}  // namespace roundrank
