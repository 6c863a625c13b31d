#include "roundrank/noisy.hpp"

#include <algorithm>
#include <bit>
#include <map>
#include <numeric>

namespace roundrank {

namespace {

std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  return static_cast<std::uint64_t>(
      (static_cast<__uint128_t>(rng()) * bound) >> 64);
}

std::vector<ItemId> sample_without_replacement(std::vector<ItemId> pool,
                                               std::size_t m,
                                               std::mt19937_64& rng) {
  m = std::min(m, pool.size());
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(bounded(rng, pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(m);
  return pool;
}

std::vector<ItemId> iota_items(std::uint64_t n) {
  std::vector<ItemId> items(n);
  std::iota(items.begin(), items.end(), ItemId{0});
  return items;
}

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) {
  return (a + b - 1) / b;
}

std::vector<ItemId> sorted_copy(std::vector<ItemId> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

ItemId majority(ItemId a, ItemId b, std::uint64_t wins_a, std::uint64_t wins_b) {
  if ((wins_a + wins_b) % 2 == 0)
    throw TiePossibleError("majority requires an odd number of outcomes");
  return wins_a > wins_b ? a : b;
}

ItemId majority(std::span<const ItemId> winners) {
  if (winners.empty() || winners.size() % 2 == 0)
    throw TiePossibleError("majority requires an odd number of outcomes");
  const ItemId first = winners.front();
  std::uint64_t wins_first = 0;
  ItemId other = first;
  for (ItemId w : winners) {
    if (w == first) {
      ++wins_first;
    } else {
      other = w;
    }
  }
  return wins_first > winners.size() / 2 ? first : other;
}

LevelLadder level_ladder(std::uint64_t n) {
  if (n < 1) throw InvalidUniverseError("ladder needs n >= 1");
  LevelLadder ladder;
  ladder.levels.push_back(n);
  std::uint64_t v = n;
  while (v > 1) {
    v = std::max<std::uint64_t>(std::bit_width(v - 1), 1);
    ladder.levels.push_back(v);
  }
  ladder.log_star = static_cast<int>(ladder.levels.size()) - 1;
  return ladder;
}

std::size_t place_by_walk(std::span<const std::int8_t> row) {
  std::int64_t sum = 0, best = 0;
  std::size_t best_j = 0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    sum += row[j];
    if (sum > best) {
      best = sum;
      best_j = j + 1;
    }
  }
  return best_j;
}

std::size_t boundary_chunk_index(std::span<const std::uint64_t> chunk_sizes,
                                 std::uint64_t k) {
  std::uint64_t prefix = 0;
  for (std::size_t j = 0; j < chunk_sizes.size(); ++j) {
    prefix += chunk_sizes[j];
    if (prefix >= k) return j;
  }
  return chunk_sizes.empty() ? 0 : chunk_sizes.size() - 1;
}

// ---------------------------------------------------------------------------
// TrimLevelVerdicts

TrimLevelVerdicts::TrimLevelVerdicts(std::vector<ItemId> pool,
                                     std::vector<ItemId> sample,
                                     std::uint32_t reps)
    : pool_(std::move(pool)), sample_(std::move(sample)), reps_(reps) {
  std::vector<std::uint8_t> in_sample;
  auto index_of = [](const std::vector<ItemId>& items) {
    std::vector<std::pair<ItemId, std::uint32_t>> out;
    out.reserve(items.size());
    for (std::uint32_t i = 0; i < items.size(); ++i) out.emplace_back(items[i], i);
    std::sort(out.begin(), out.end());
    return out;
  };
  sample_sorted_ = index_of(sample_);
  rest_.reserve(pool_.size() - sample_.size());
  for (ItemId x : pool_) {
    auto it = std::lower_bound(sample_sorted_.begin(), sample_sorted_.end(),
                               std::make_pair(x, std::uint32_t{0}));
    if (it == sample_sorted_.end() || it->first != x) rest_.push_back(x);
  }
  rest_sorted_ = index_of(rest_);
  pool_sorted_ = index_of(pool_);
}

void TrimLevelVerdicts::emit(RoundBatch& out) const {
  if (pool_.size() < 2 || sample_.empty()) return;
  out.segments.push_back(CrossBlock{sample_, rest_, reps_});
  out.segments.push_back(AllPairsBlock{sample_, reps_});
}

std::uint64_t TrimLevelVerdicts::pair_count() const {
  if (pool_.size() < 2 || sample_.empty()) return 0;
  const std::uint64_t s = sample_.size();
  return s * rest_.size() + s * (s - 1) / 2;
}

void TrimLevelVerdicts::bind(VerdictCursor& cur) {
  if (pool_.size() < 2 || sample_.empty()) return;
  cross_ = cur.take(sample_.size() * rest_.size());
  within_ = cur.take(sample_.size() * (sample_.size() - 1) / 2);
}

bool TrimLevelVerdicts::in_pool(ItemId x) const {
  auto it = std::lower_bound(pool_sorted_.begin(), pool_sorted_.end(),
                             std::make_pair(x, std::uint32_t{0}));
  return it != pool_sorted_.end() && it->first == x;
}

std::int64_t TrimLevelVerdicts::sample_index(ItemId x) const {
  auto it = std::lower_bound(sample_sorted_.begin(), sample_sorted_.end(),
                             std::make_pair(x, std::uint32_t{0}));
  if (it == sample_sorted_.end() || it->first != x) return -1;
  return it->second;
}

std::int64_t TrimLevelVerdicts::rest_index(ItemId x) const {
  auto it = std::lower_bound(rest_sorted_.begin(), rest_sorted_.end(),
                             std::make_pair(x, std::uint32_t{0}));
  if (it == rest_sorted_.end() || it->first != x) return -1;
  return it->second;
}

bool TrimLevelVerdicts::sample_beats(std::size_t j, ItemId x) const {
  const std::int64_t sx = sample_index(x);
  if (sx >= 0) {
    if (static_cast<std::size_t>(sx) == j) return false;
    const auto i = std::min<std::uint64_t>(j, sx);
    const auto l = std::max<std::uint64_t>(j, sx);
    const bool first = within_[all_pairs_index(sample_.size(), i, l)] != 0;
    return (static_cast<std::uint64_t>(j) < static_cast<std::uint64_t>(sx)) == first;
  }
  const std::int64_t rx = rest_index(x);
  return cross_[j * rest_.size() + static_cast<std::uint64_t>(rx)] != 0;
}

// ---------------------------------------------------------------------------
// Trim cascade

namespace {

struct Selection {
  bool present = false;
  std::size_t sample_idx = 0;
  ItemId id = 0;
  std::uint64_t r = 0;
};

}  // namespace

TrimResult run_trim_cascade(std::span<TrimLevelVerdicts> levels,
                            std::vector<ItemId> active,
                            std::vector<ItemId> accepted, std::int64_t quota,
                            std::vector<TrimTraceLevel>* trace) {
  std::sort(active.begin(), active.end());
  for (auto& level : levels) {
    // Judged members: the active items this level actually compared. Active
    // items outside the level's pool are classified by their placement side;
    // items above the window count as better than every judged item.
    std::vector<ItemId> judged, above, below;
    judged.reserve(active.size());
    for (ItemId x : active) {
      if (level.in_pool(x)) {
        judged.push_back(x);
      } else if (level.has_side()) {
        (level.side_of(x) < 0 ? above : below).push_back(x);
      }
    }

    Selection a, b;
    for (std::size_t j = 0; j < level.sample().size(); ++j) {
      const ItemId id = level.sample()[j];
      if (!std::binary_search(judged.begin(), judged.end(), id)) continue;
      std::uint64_t r = 1 + above.size();  // itself plus everything above
      for (ItemId x : judged)
        if (x != id && !level.sample_beats(j, x)) ++r;
      if (static_cast<std::int64_t>(r) <= quota) {
        // argmin |r - k_i| over r <= k_i is the largest r.
        if (!a.present || r > a.r || (r == a.r && id < a.id)) a = {true, j, id, r};
      } else {
        if (!b.present || r < b.r || (r == b.r && id < b.id)) b = {true, j, id, r};
      }
    }

    std::vector<ItemId> set_a, set_b;
    if (a.present) {
      for (ItemId x : judged)
        if (x == a.id || !level.sample_beats(a.sample_idx, x)) set_a.push_back(x);
      set_a.insert(set_a.end(), above.begin(), above.end());
      std::sort(set_a.begin(), set_a.end());
    }
    if (b.present) {
      for (ItemId x : judged) {
        if (x != b.id && !level.sample_beats(b.sample_idx, x)) continue;
        if (std::binary_search(set_a.begin(), set_a.end(), x)) continue;
        set_b.push_back(x);
      }
      for (ItemId x : below)
        if (!std::binary_search(set_a.begin(), set_a.end(), x))
          set_b.push_back(x);
      std::sort(set_b.begin(), set_b.end());
    }

    accepted.insert(accepted.end(), set_a.begin(), set_a.end());
    quota -= static_cast<std::int64_t>(set_a.size());
    std::vector<ItemId> removed;
    removed.reserve(set_a.size() + set_b.size());
    std::merge(set_a.begin(), set_a.end(), set_b.begin(), set_b.end(),
               std::back_inserter(removed));
    std::vector<ItemId> next_active;
    next_active.reserve(active.size());
    std::set_difference(active.begin(), active.end(), removed.begin(),
                        removed.end(), std::back_inserter(next_active));
    active = std::move(next_active);

    if (trace) {
      TrimTraceLevel t;
      if (a.present) t.a = a.id;
      if (b.present) t.b = b.id;
      t.A = set_a;
      t.B = set_b;
      t.active_after = active;
      t.quota_after = quota;
      trace->push_back(std::move(t));
    }
  }
  return {std::move(accepted), std::move(active), quota};
}

TrimState trim_step(const TrimState& state, std::span<const ItemId> sample,
                    const std::function<bool(ItemId, ItemId)>& beats) {
  TrimState next;
  next.accepted = state.accepted;
  next.quota = state.quota;
  std::vector<ItemId> active = sorted_copy(state.active);

  Selection a, b;
  for (std::size_t j = 0; j < sample.size(); ++j) {
    const ItemId id = sample[j];
    if (!std::binary_search(active.begin(), active.end(), id)) continue;
    std::uint64_t r = 1;
    for (ItemId x : active)
      if (x != id && !beats(id, x)) ++r;
    if (static_cast<std::int64_t>(r) <= state.quota) {
      if (!a.present || r > a.r || (r == a.r && id < a.id)) a = {true, j, id, r};
    } else {
      if (!b.present || r < b.r || (r == b.r && id < b.id)) b = {true, j, id, r};
    }
  }
  if (a.present) {
    next.a = a.id;
    for (ItemId x : active)
      if (x == a.id || !beats(a.id, x)) next.A.push_back(x);
  }
  if (b.present) {
    next.b = b.id;
    for (ItemId x : active) {
      if (x != b.id && !beats(b.id, x)) continue;
      if (std::binary_search(next.A.begin(), next.A.end(), x)) continue;
      next.B.push_back(x);
    }
  }
  next.accepted.insert(next.accepted.end(), next.A.begin(), next.A.end());
  next.quota -= static_cast<std::int64_t>(next.A.size());
  std::vector<ItemId> removed;
  std::merge(next.A.begin(), next.A.end(), next.B.begin(), next.B.end(),
             std::back_inserter(removed));
  std::set_difference(active.begin(), active.end(), removed.begin(),
                      removed.end(), std::back_inserter(next.active));
  return next;
}

// ---------------------------------------------------------------------------
// FindMax

FindMaxCore::FindMaxCore(std::vector<ItemId> items, double delta,
                         const AlgoConstants& constants, ItemId dummy_first) {
  if (items.empty()) throw InvalidUniverseError("empty item set");
  if (!(delta > 0.0) || delta > 1.0 / 9.0)
    throw InvalidParameterError("find_max requires 0 < delta <= 1/9");
  padded_ = std::move(items);
  const std::uint64_t target = std::bit_ceil<std::uint64_t>(padded_.size());
  const std::size_t original = padded_.size();
  while (padded_.size() < target)
    padded_.push_back(dummy_first +
                      static_cast<ItemId>(padded_.size() - original));
  const auto build = [&](auto&& self, std::uint32_t lo, std::uint32_t hi,
                         double node_delta) -> void {
    if (hi - lo <= 1) return;
    const std::uint32_t mid = lo + (hi - lo) / 2;
    Node node;
    node.lo = lo;
    node.mid = mid;
    node.hi = hi;
    node.reps = odd_ceil(100.0 * std::log(1.0 / node_delta) *
                         constants.constant_scale);
    nodes_.push_back(node);
    self(self, lo, mid, node_delta / 3.0);
    self(self, mid, hi, node_delta / 3.0);
  };
  build(build, 0, static_cast<std::uint32_t>(padded_.size()), delta);
}

void FindMaxCore::emit(RoundBatch& out) const {
  for (const auto& node : nodes_) {
    CrossBlock block;
    block.left.assign(padded_.begin() + node.lo, padded_.begin() + node.mid);
    block.right.assign(padded_.begin() + node.mid, padded_.begin() + node.hi);
    block.reps = node.reps;
    out.segments.push_back(std::move(block));
  }
}

void FindMaxCore::consume(VerdictCursor& cur) {
  for (auto& node : nodes_) {
    const std::uint64_t half = node.mid - node.lo;
    node.bits = cur.take(half * (node.hi - node.mid));
  }
  std::size_t it = 0;
  winner_ = padded_[resolve(0, static_cast<std::uint32_t>(padded_.size()), it)];
}

std::uint32_t FindMaxCore::resolve(std::uint32_t lo, std::uint32_t hi,
                                   std::size_t& node) const {
  if (hi - lo <= 1) return lo;
  const Node& me = nodes_[node++];
  const std::uint32_t left = resolve(me.lo, me.mid, node);
  const std::uint32_t right = resolve(me.mid, me.hi, node);
  const std::uint64_t idx =
      static_cast<std::uint64_t>(left - me.lo) * (me.hi - me.mid) +
      (right - me.mid);
  return me.bits[idx] ? left : right;
}

std::uint64_t FindMaxCore::planned_comparisons() const {
  std::uint64_t total = 0;
  for (const auto& node : nodes_) {
    const std::uint64_t half = node.mid - node.lo;
    total += half * (node.hi - node.mid) * node.reps;
  }
  return total;
}

namespace {

class FindMaxAlg final : public RoundAlgorithm {
 public:
  FindMaxAlg(std::vector<ItemId> items, double delta,
             const AlgoConstants& constants, ItemId dummy_first,
             std::uint32_t n_real)
      : fallback_(items.front()), n_real_(n_real),
        core_(std::move(items), delta, constants, dummy_first) {}

  bool next_batch(const RoundVerdicts* prev, RoundBatch& out) override {
    if (prev) {
      VerdictCursor cur(*prev);
      core_.consume(cur);
      if (core_.winner() < n_real_) output_ = {core_.winner()};
      return false;
    }
    if (core_.padded_size() == 1) {
      output_ = {fallback_};
      return false;
    }
    core_.emit(out);
    return true;
  }

  std::vector<ItemId> finalize_on_halt() override { return {fallback_}; }
  const std::vector<ItemId>& output() const override { return output_; }
  int rounds_declared() const override { return 1; }

 private:
  ItemId fallback_;
  std::uint32_t n_real_;
  FindMaxCore core_;
  std::vector<ItemId> output_;
};

}  // namespace

std::unique_ptr<RoundAlgorithm> find_max(std::vector<ItemId> items, double delta,
                                         const AlgoConstants& constants,
                                         ItemId dummy_first,
                                         std::uint32_t n_real) {
  return std::make_unique<FindMaxAlg>(std::move(items), delta, constants,
                                      dummy_first, n_real);
}

// ---------------------------------------------------------------------------
// TopKCore (one-round top-k)

TopKCore::TopKCore(std::vector<ItemId> items, std::uint64_t k,
                   const AlgoConstants& constants, std::uint64_t seed)
    : items_(std::move(items)), k_(k) {
  if (items_.empty()) throw InvalidUniverseError("empty item set");
  if (k_ < 1 || k_ > items_.size())
    throw InvalidParameterError("k must lie in [1, n]");
  const std::uint64_t n = items_.size();
  ladder_ = level_ladder(n);
  if (ladder_.log_star == 0) {
    result_ = items_;  // single item, k = 1
    return;
  }
  std::mt19937_64 rng(seed);
  levels_.reserve(ladder_.log_star);
  for (int i = 1; i <= ladder_.log_star; ++i) {
    const std::uint64_t l = ladder_.levels[i];
    const std::uint64_t size =
        std::clamp<std::uint64_t>(ceil_div(n, l * l), 1, n);
    auto sample = sample_without_replacement(items_, static_cast<std::size_t>(size), rng);
    const std::uint32_t reps =
        odd_ceil(constants.c * static_cast<double>(l) * constants.constant_scale);
    levels_.emplace_back(items_, std::move(sample), reps);
  }
}

void TopKCore::emit(RoundBatch& out) const {
  for (const auto& level : levels_) level.emit(out);
}

void TopKCore::consume(VerdictCursor& cur, std::vector<TrimTraceLevel>* trace) {
  if (levels_.empty()) return;
  for (auto& level : levels_) level.bind(cur);
  auto result = run_trim_cascade(levels_, items_, {},
                                 static_cast<std::int64_t>(k_), trace);
  result_ = sorted_copy(std::move(result.accepted));
}

std::uint64_t TopKCore::planned_comparisons() const {
  std::uint64_t total = 0;
  for (const auto& level : levels_) total += level.comparison_count();
  return total;
}

namespace {

class OneRoundTopKAlg final : public RoundAlgorithm {
 public:
  OneRoundTopKAlg(std::vector<ItemId> items, std::uint64_t k,
                  const AlgoConstants& constants, std::uint64_t seed)
      : items_(items), k_(k), core_(std::move(items), k, constants, seed) {}

  bool next_batch(const RoundVerdicts* prev, RoundBatch& out) override {
    if (prev) {
      VerdictCursor cur(*prev);
      core_.consume(cur);
      output_ = core_.result();
      return false;
    }
    if (items_.size() == 1) {
      output_ = core_.result();
      return false;
    }
    core_.emit(out);
    return true;
  }

  std::vector<ItemId> finalize_on_halt() override {
    std::vector<ItemId> out(items_.begin(),
                            items_.begin() + static_cast<std::ptrdiff_t>(k_));
    return out;
  }
  const std::vector<ItemId>& output() const override { return output_; }
  int rounds_declared() const override { return 1; }

 private:
  std::vector<ItemId> items_;
  std::uint64_t k_;
  TopKCore core_;
  std::vector<ItemId> output_;
};

}  // namespace

std::unique_ptr<RoundAlgorithm> one_round_topk(std::vector<ItemId> items,
                                               std::uint64_t k,
                                               const AlgoConstants& constants,
                                               std::uint64_t seed) {
  return std::make_unique<OneRoundTopKAlg>(std::move(items), k, constants, seed);
}

// ---------------------------------------------------------------------------
// SortedTopKNoisyCore (one-round sorted top-k, k >= 2)

SortedTopKNoisyCore::SortedTopKNoisyCore(std::vector<ItemId> items,
                                         std::uint64_t k,
                                         const AlgoConstants& constants,
                                         std::uint64_t seed)
    : items_(std::move(items)), k_(k) {
  if (items_.empty()) throw InvalidUniverseError("empty item set");
  if (k_ < 1 || k_ > items_.size())
    throw InvalidParameterError("k must lie in [1, n]");
  pair_reps_ = odd_ceil(100.0 * (std::log(static_cast<double>(k)) + 1.0) *
                        constants.constant_scale);
  copies_.reserve(3);
  for (int c = 0; c < 3; ++c)
    copies_.emplace_back(items_, k_, constants, mix64(seed + kGolden * (c + 1)));
  items_sorted_.reserve(items_.size());
  for (std::uint32_t i = 0; i < items_.size(); ++i)
    items_sorted_.emplace_back(items_[i], i);
  std::sort(items_sorted_.begin(), items_sorted_.end());
}

void SortedTopKNoisyCore::emit(RoundBatch& out) const {
  for (const auto& copy : copies_) copy.emit(out);
  if (items_.size() > 1)
    out.segments.push_back(AllPairsBlock{items_, pair_reps_});
}

std::uint64_t SortedTopKNoisyCore::planned_comparisons() const {
  std::uint64_t total = 0;
  for (const auto& copy : copies_) total += copy.planned_comparisons();
  const std::uint64_t n = items_.size();
  return total + n * (n - 1) / 2 * pair_reps_;
}

void SortedTopKNoisyCore::consume(VerdictCursor& cur) {
  for (auto& copy : copies_) copy.consume(cur);
  // Plurality answer of the three copies; ties go to copy 1.
  const auto& s1 = copies_[0].result();
  const auto& s2 = copies_[1].result();
  const auto& s3 = copies_[2].result();
  std::vector<ItemId> chosen = (s2 == s3) ? s2 : s1;

  const std::uint8_t* bits = nullptr;
  if (items_.size() > 1)
    bits = cur.take(items_.size() * (items_.size() - 1) / 2);
  auto pos_of = [&](ItemId x) {
    auto it = std::lower_bound(items_sorted_.begin(), items_sorted_.end(),
                               std::make_pair(x, std::uint32_t{0}));
    return it->second;
  };
  // Rank the chosen set by how many of its members each item beats.
  std::vector<std::pair<std::uint64_t, ItemId>> scored;
  scored.reserve(chosen.size());
  for (ItemId x : chosen) {
    std::uint64_t beat = 0;
    const std::uint32_t px = pos_of(x);
    for (ItemId y : chosen) {
      if (y == x) continue;
      const std::uint32_t py = pos_of(y);
      const auto i = std::min(px, py);
      const auto j = std::max(px, py);
      const bool first = bits[all_pairs_index(items_.size(), i, j)] != 0;
      beat += ((px < py) == first) ? 1 : 0;
    }
    scored.emplace_back(beat, x);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  result_.clear();
  for (auto& [beat, id] : scored) result_.push_back(id);
}

namespace {

class OneRoundSortedTopKNoisyAlg final : public RoundAlgorithm {
 public:
  OneRoundSortedTopKNoisyAlg(std::vector<ItemId> items, std::uint64_t k,
                             const AlgoConstants& constants, std::uint64_t seed,
                             std::uint32_t n_real)
      : items_(items), k_(k), n_real_(n_real),
        core_(std::move(items), k, constants, seed) {}

  bool next_batch(const RoundVerdicts* prev, RoundBatch& out) override {
    if (prev) {
      VerdictCursor cur(*prev);
      core_.consume(cur);
      output_.clear();
      for (ItemId x : core_.result())
        if (x < n_real_) output_.push_back(x);
      return false;
    }
    if (items_.size() == 1) {
      output_ = items_;
      return false;
    }
    core_.emit(out);
    return true;
  }

  std::vector<ItemId> finalize_on_halt() override {
    std::vector<ItemId> out(items_.begin(),
                            items_.begin() + static_cast<std::ptrdiff_t>(k_));
    return out;
  }
  const std::vector<ItemId>& output() const override { return output_; }
  int rounds_declared() const override { return 1; }

 private:
  std::vector<ItemId> items_;
  std::uint64_t k_;
  std::uint32_t n_real_;
  SortedTopKNoisyCore core_;
  std::vector<ItemId> output_;
};

}  // namespace

std::unique_ptr<RoundAlgorithm> one_round_sorted_topk_noisy(
    std::vector<ItemId> items, std::uint64_t k, const AlgoConstants& constants,
    std::uint64_t seed, std::uint32_t n_real) {
  return std::make_unique<OneRoundSortedTopKNoisyAlg>(std::move(items), k,
                                                      constants, seed, n_real);
}

// ---------------------------------------------------------------------------
// TwoRoundTopK (Algorithms 5-7)

std::uint32_t TwoRoundTopK::padding_per_side(std::uint32_t n, std::uint64_t k) {
  if (n < 2) return 0;
  const std::uint64_t bound = ceil_snapped(
      40.0 * std::log(static_cast<double>(n)) * pow_frac(n, 2, 3));
  const std::uint64_t edge = std::min<std::uint64_t>(k, n - k);
  return edge < bound ? static_cast<std::uint32_t>(bound) : 0;
}

TwoRoundTopK::TwoRoundTopK(std::uint32_t n, std::uint64_t k,
                           const AlgoConstants& constants, std::uint64_t seed)
    : n_real_(n), k_real_(k), constants_(constants), rng_(seed) {
  if (n == 0) throw InvalidUniverseError("empty universe");
  if (k < 1 || k > n) throw InvalidParameterError("k must lie in [1, n]");
  const std::uint32_t side = padding_per_side(n, k);
  padding_ = {side, side};
  n_ = n + 2 * side;
  k_ = k + side;
  budget_ = ceil_snapped(constants.effective_c0() * pow_frac(n, 4, 3) *
                         constants.constant_scale);
  ladder_ = level_ladder(n_);
  const auto g = std::clamp<std::uint64_t>(ceil_pow_frac(n_, 1, 3), 1, n_);
  pivots_ = sample_without_replacement(iota_items(n_), static_cast<std::size_t>(g), rng_);
  auto sorted = sorted_copy(pivots_);
  rest_.reserve(n_ - pivots_.size());
  for (ItemId id = 0; id < n_; ++id)
    if (!std::binary_search(sorted.begin(), sorted.end(), id)) rest_.push_back(id);
}

bool TwoRoundTopK::next_batch(const RoundVerdicts* prev, RoundBatch& out) {
  if (round_ == 0) {
    if (n_ == 1) {
      output_ = {ItemId{0}};
      return false;
    }
    out.segments.push_back(CrossBlock{
        pivots_, rest_, odd_ceil(constants_.c1 * constants_.constant_scale)});
    out.segments.push_back(AllPairsBlock{
        pivots_, odd_ceil(100.0 * std::log(static_cast<double>(n_)) *
                          constants_.constant_scale)});
    round_ = 1;
    return true;
  }
  VerdictCursor cur(*prev);
  if (round_ == 1) {
    const std::size_t g = pivots_.size();
    const std::uint8_t* cross = cur.take(g * rest_.size());
    const std::uint8_t* within = cur.take(g * (g - 1) / 2);

    // Sort pivots by pairwise majorities: win-count order, id tie-break.
    std::vector<std::uint64_t> wins(g, 0);
    std::size_t idx = 0;
    for (std::size_t i = 0; i + 1 < g; ++i)
      for (std::size_t j = i + 1; j < g; ++j, ++idx)
        ++wins[within[idx] ? i : j];
    std::vector<std::uint32_t> order(g);
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      if (wins[a] != wins[b]) return wins[a] > wins[b];
      return pivots_[a] < pivots_[b];
    });
    sorted_pivots_.resize(g);
    for (std::size_t j = 0; j < g; ++j) sorted_pivots_[j] = pivots_[order[j]];

    // Placement walk for every non-pivot item; pivots place at their own index.
    placement_.assign(g + 1, {});
    placement_of_.assign(n_, 0);
    for (std::size_t j = 0; j < g; ++j) {
      placement_[j + 1].push_back(sorted_pivots_[j]);
      placement_of_[sorted_pivots_[j]] = static_cast<std::int32_t>(j + 1);
    }
    std::vector<std::int8_t> row(g);
    for (std::size_t r = 0; r < rest_.size(); ++r) {
      for (std::size_t j = 0; j < g; ++j) {
        const std::size_t sample_idx = order[j];
        row[j] = cross[sample_idx * rest_.size() + r] ? std::int8_t{1}
                                                      : std::int8_t{-1};
      }
      const std::size_t p = place_by_walk(row);
      placement_[p].push_back(rest_[r]);
      placement_of_[rest_[r]] = static_cast<std::int32_t>(p);
    }
    std::vector<std::uint64_t> sizes(placement_.size());
    for (std::size_t j = 0; j < placement_.size(); ++j)
      sizes[j] = placement_[j].size();
    m_ = boundary_chunk_index(sizes, k_);

    build_round2();
    for (const auto& level : levels_) level.emit(out);
    round_ = 2;
    return true;
  }
  // Round 2 verdicts: run the trim cascade on the first window.
  for (auto& level : levels_) level.bind(cur);
  auto result =
      run_trim_cascade(levels_, levels_.empty() ? std::vector<ItemId>{} : levels_[0].pool(),
                       accepted_t0_, quota1_, nullptr);
  output_.clear();
  for (ItemId x : result.accepted)
    if (x < n_real_) output_.push_back(x);
  std::sort(output_.begin(), output_.end());
  return false;
}

void TwoRoundTopK::build_round2() {
  const std::size_t g = sorted_pivots_.size();
  levels_.clear();
  accepted_t0_.clear();
  const std::uint64_t l1 = ladder_.levels[1];
  const std::size_t lo1 = m_ >= l1 ? m_ - static_cast<std::size_t>(l1) : 0;
  for (std::size_t j = 0; j < lo1; ++j)
    accepted_t0_.insert(accepted_t0_.end(), placement_[j].begin(),
                        placement_[j].end());
  quota1_ = static_cast<std::int64_t>(k_) -
            static_cast<std::int64_t>(accepted_t0_.size());

  for (int i = 1; i <= ladder_.log_star; ++i) {
    const std::uint64_t l = ladder_.levels[i];
    const std::size_t lo = m_ >= l ? m_ - static_cast<std::size_t>(l) : 0;
    const std::size_t hi = std::min<std::size_t>(g, m_ + static_cast<std::size_t>(l));
    std::vector<ItemId> window;
    for (std::size_t j = lo; j <= hi; ++j)
      window.insert(window.end(), placement_[j].begin(), placement_[j].end());
    if (window.empty()) {
      levels_.emplace_back();
      continue;
    }
    const std::uint64_t l4 = l * l * l * l;
    const std::uint64_t size =
        std::clamp<std::uint64_t>(ceil_div(window.size(), l4), 1, window.size());
    auto sample = sample_without_replacement(window, static_cast<std::size_t>(size), rng_);
    const std::uint32_t reps = odd_ceil(constants_.c2 * static_cast<double>(l) *
                                        constants_.constant_scale);
    levels_.emplace_back(std::move(window), std::move(sample), reps);
    // Active items that drifted outside this window sit above or below it by
    // their round-1 placement.
    levels_.back().set_side_of(
        [this, lo](ItemId x) {
          return placement_of_[x] < static_cast<std::int32_t>(lo) ? -1 : 1;
        });
  }
}

std::vector<ItemId> TwoRoundTopK::finalize_on_halt() {
  // Best effort: accepted items so far, padded with the smallest real ids.
  std::vector<ItemId> out;
  std::vector<std::uint8_t> used(n_real_, 0);
  for (ItemId x : accepted_t0_)
    if (x < n_real_) {
      out.push_back(x);
      used[x] = 1;
    }
  for (ItemId id = 0; id < n_real_ && out.size() < k_real_; ++id)
    if (!used[id]) out.push_back(id);
  if (out.size() > k_real_) out.resize(k_real_);
  std::sort(out.begin(), out.end());
  return out;
}

std::unique_ptr<TwoRoundTopK> two_round_topk(std::uint32_t n, std::uint64_t k,
                                             const AlgoConstants& constants,
                                             std::uint64_t seed) {
  return std::make_unique<TwoRoundTopK>(n, k, constants, seed);
}

// ---------------------------------------------------------------------------
// RepeatLift

RepeatLift::RepeatLift(std::unique_ptr<RoundAlgorithm> inner, std::uint32_t reps)
    : inner_(std::move(inner)), reps_(reps) {
  if (reps_ % 2 == 0) throw InvalidParameterError("lift repetitions must be odd");
}

bool RepeatLift::next_batch(const RoundVerdicts* prev, RoundBatch& out) {
  if (!inner_->next_batch(prev, out)) return false;
  for (auto& seg : out.segments) {
    std::visit(
        [&](auto& block) {
          if (block.reps != 1)
            throw InvalidParameterError(
                "repeat lift expects single-repetition requests");
          block.reps = reps_;
        },
        seg);
  }
  return true;
}

std::unique_ptr<RepeatLift> repeat_lift(std::unique_ptr<RoundAlgorithm> inner,
                                        std::uint32_t reps) {
  return std::make_unique<RepeatLift>(std::move(inner), reps);
}

std::uint32_t lift_reps_for(std::uint32_t n, double constant_scale) {
  const double n2 = 12.0 * static_cast<double>(n) * static_cast<double>(n);
  return odd_ceil(std::log(n2) / majority_error_rate() * constant_scale);
}

// ---------------------------------------------------------------------------
// TwoRoundSortedTopKNoisy (Algorithm 9, small-k branch)

TwoRoundSortedTopKNoisy::TwoRoundSortedTopKNoisy(std::uint32_t n,
                                                 std::uint64_t k,
                                                 const AlgoConstants& constants,
                                                 std::uint64_t seed)
    : n_real_(n), k_(k), constants_(constants) {
  if (n == 0) throw InvalidUniverseError("empty universe");
  if (k < 2 || k > n)
    throw InvalidParameterError("two-round sorted top-k needs 2 <= k <= n");
  const std::uint64_t g = std::max<std::uint64_t>(ceil_pow_frac(n, 1, 3), 1);
  cube_ = g * g * g;
  group_size_ = static_cast<std::size_t>(g);
  copies_ = odd_ceil(200.0 * std::log(static_cast<double>(k)) *
                     constants.constant_scale);
  std::mt19937_64 rng(seed);
  auto shuffled = sample_without_replacement(iota_items(cube_),
                                             static_cast<std::size_t>(cube_), rng);
  groups_.reserve(static_cast<std::size_t>(g * g));
  for (std::uint64_t i = 0; i < g * g; ++i)
    groups_.emplace_back(shuffled.begin() + static_cast<std::ptrdiff_t>(i * g),
                         shuffled.begin() + static_cast<std::ptrdiff_t>((i + 1) * g));
  group_copies_.reserve(groups_.size() * copies_);
  for (std::size_t gi = 0; gi < groups_.size(); ++gi)
    for (std::uint32_t c = 0; c < copies_; ++c)
      group_copies_.emplace_back(groups_[gi], 1, constants,
                                 mix64(seed ^ mix64((gi + 1) * kGolden + c)));
  final_seed_ = mix64(seed + kGolden);
}

bool TwoRoundSortedTopKNoisy::next_batch(const RoundVerdicts* prev,
                                         RoundBatch& out) {
  if (round_ == 0) {
    for (const auto& core : group_copies_) core.emit(out);
    round_ = 1;
    return true;
  }
  VerdictCursor cur(*prev);
  if (round_ == 1) {
    champions_.clear();
    champions_.reserve(groups_.size());
    for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
      // Majority answer of the copies; ties go to the earliest copy.
      std::map<ItemId, std::uint32_t> counts;
      std::vector<ItemId> in_order;
      for (std::uint32_t c = 0; c < copies_; ++c) {
        auto& core = group_copies_[gi * copies_ + c];
        core.consume(cur);
        if (core.result().empty()) continue;
        const ItemId candidate = core.result().front();
        if (counts[candidate]++ == 0) in_order.push_back(candidate);
      }
      ItemId champion = groups_[gi].front();
      std::uint32_t best = 0;
      for (ItemId candidate : in_order) {
        if (counts[candidate] > best) {
          best = counts[candidate];
          champion = candidate;
        }
      }
      champions_.push_back(champion);
    }
    final_round_ = std::make_unique<SortedTopKNoisyCore>(champions_, k_,
                                                         constants_, final_seed_);
    final_round_->emit(out);
    round_ = 2;
    return true;
  }
  final_round_->consume(cur);
  output_.clear();
  for (ItemId x : final_round_->result())
    if (x < n_real_) output_.push_back(x);
  return false;
}

std::vector<ItemId> TwoRoundSortedTopKNoisy::finalize_on_halt() {
  std::vector<ItemId> out;
  for (ItemId id = 0; id < k_ && id < n_real_; ++id) out.push_back(id);
  return out;
}

}  // namespace roundrank
