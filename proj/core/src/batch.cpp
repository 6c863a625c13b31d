#include "roundrank/batch.hpp"

namespace roundrank {

std::uint64_t segment_pair_count(const BatchSegment& seg) {
  if (const auto* pb = std::get_if<PairBlock>(&seg)) return pb->pairs.size();
  if (const auto* cb = std::get_if<CrossBlock>(&seg))
    return static_cast<std::uint64_t>(cb->left.size()) * cb->right.size();
  const auto& ap = std::get<AllPairsBlock>(seg);
  const std::uint64_t m = ap.items.size();
  return m * (m - 1) / 2;
}

std::uint64_t segment_comparison_count(const BatchSegment& seg) {
  std::uint32_t reps = 1;
  std::visit([&](const auto& s) { reps = s.reps; }, seg);
  return segment_pair_count(seg) * reps;
}

std::uint64_t RoundBatch::pair_count() const {
  std::uint64_t total = 0;
  for (const auto& seg : segments) total += segment_pair_count(seg);
  return total;
}

std::uint64_t RoundBatch::comparison_count() const {
  std::uint64_t total = 0;
  for (const auto& seg : segments) total += segment_comparison_count(seg);
  return total;
}

}  // namespace roundrank
