#include "roundrank/noiseless.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace roundrank {

namespace detail {
void throw_partition_inconsistency(const char* what) {
  throw PartitionInconsistencyError(what);
}
}  // namespace detail

namespace {

std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  return static_cast<std::uint64_t>(
      (static_cast<__uint128_t>(rng()) * bound) >> 64);
}

// Partial Fisher-Yates over a copy of the pool.
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

// `draws` samples with repetition from [0, n), merged before comparing.
std::vector<ItemId> sample_with_repetition_dedup(std::uint32_t n,
                                                 std::uint64_t draws,
                                                 std::mt19937_64& rng) {
  std::vector<ItemId> out;
  out.reserve(draws);
  for (std::uint64_t i = 0; i < draws; ++i)
    out.push_back(static_cast<ItemId>(bounded(rng, n)));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<ItemId> iota_items(std::uint32_t n) {
  std::vector<ItemId> items(n);
  std::iota(items.begin(), items.end(), ItemId{0});
  return items;
}

// sorted-id -> position lookup
struct PosIndex {
  std::vector<std::pair<ItemId, std::uint32_t>> entries;

  explicit PosIndex(const std::vector<ItemId>& items) {
    entries.reserve(items.size());
    for (std::uint32_t i = 0; i < items.size(); ++i)
      entries.emplace_back(items[i], i);
    std::sort(entries.begin(), entries.end());
  }
  std::int64_t find(ItemId x) const {
    auto it = std::lower_bound(entries.begin(), entries.end(),
                               std::make_pair(x, std::uint32_t{0}));
    if (it == entries.end() || it->first != x) return -1;
    return it->second;
  }
};

// Items of an all-pairs block ordered best-first by win counts. Noiseless
// win counts must be distinct; a tie means the verdicts fit no total order.
std::vector<ItemId> order_by_allpairs(const std::vector<ItemId>& items,
                                      const std::uint8_t* bits) {
  const std::size_t m = items.size();
  std::vector<std::uint32_t> wins(m, 0);
  std::size_t idx = 0;
  for (std::size_t i = 0; i + 1 < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j, ++idx)
      ++wins[bits[idx] ? i : j];
  std::vector<std::uint32_t> order(m);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(),
            [&](std::uint32_t a, std::uint32_t b) { return wins[a] > wins[b]; });
  for (std::size_t i = 0; i + 1 < m; ++i)
    if (wins[order[i]] == wins[order[i + 1]])
      detail::throw_partition_inconsistency("tied win-counts in a noiseless all-pairs block");
  std::vector<ItemId> out(m);
  for (std::size_t i = 0; i < m; ++i) out[i] = items[order[i]];
  return out;
}

// Verdict lookups for a round that compared `pivots` against everything:
// an all-pairs block over the pivots followed by a pivot-major cross block.
struct PivotVerdicts {
  const std::vector<ItemId>& pivots;
  const std::vector<ItemId>& rest;
  const std::uint8_t* within = nullptr;
  const std::uint8_t* cross = nullptr;
  PosIndex pivot_pos;
  PosIndex rest_pos;

  PivotVerdicts(const std::vector<ItemId>& pivots_in,
                const std::vector<ItemId>& rest_in, VerdictCursor& cur)
      : pivots(pivots_in),
        rest(rest_in),
        pivot_pos(pivots_in),
        rest_pos(rest_in) {
    const std::size_t g = pivots.size();
    within = cur.take(g * (g - 1) / 2);
    cross = cur.take(g * rest.size());
  }

  bool beats(ItemId x, ItemId y) const {
    const std::int64_t px = pivot_pos.find(x);
    const std::int64_t py = pivot_pos.find(y);
    if (px >= 0 && py >= 0) {
      const auto i = static_cast<std::uint64_t>(std::min(px, py));
      const auto j = static_cast<std::uint64_t>(std::max(px, py));
      const bool first = within[all_pairs_index(pivots.size(), i, j)] != 0;
      return (px < py) == first;
    }
    if (px >= 0) {
      const std::int64_t r = rest_pos.find(y);
      return cross[static_cast<std::uint64_t>(px) * rest.size() + r] != 0;
    }
    const std::int64_t py2 = pivot_pos.find(y);
    const std::int64_t r = rest_pos.find(x);
    return cross[static_cast<std::uint64_t>(py2) * rest.size() + r] == 0;
  }

  std::uint64_t wins_of_pivot(std::size_t p) const {
    std::uint64_t wins = 0;
    for (std::size_t r = 0; r < rest.size(); ++r)
      wins += cross[p * rest.size() + r];
    for (std::size_t q = 0; q < pivots.size(); ++q) {
      if (q == p) continue;
      const auto i = std::min(p, q);
      const auto j = std::max(p, q);
      const bool first = within[all_pairs_index(pivots.size(), i, j)] != 0;
      wins += ((p < q) == first) ? 1 : 0;
    }
    return wins;
  }
};

void emit_pivot_round(RoundBatch& out, const std::vector<ItemId>& pivots,
                      const std::vector<ItemId>& rest) {
  out.segments.push_back(AllPairsBlock{pivots, 1});
  out.segments.push_back(CrossBlock{pivots, rest, 1});
}

std::vector<ItemId> complement_of_sorted(std::uint32_t n,
                                         const std::vector<ItemId>& sorted_subset) {
  std::vector<ItemId> out;
  out.reserve(n - sorted_subset.size());
  std::size_t j = 0;
  for (ItemId id = 0; id < n; ++id) {
    if (j < sorted_subset.size() && sorted_subset[j] == id) {
      ++j;
    } else {
      out.push_back(id);
    }
  }
  return out;
}

// N_1 s_1 N_2 s_2 ... up to chunk l; covers the sorted prefix ending at s_l.
std::vector<ItemId> splice_partition(const PivotPartition& part,
                                     const std::vector<std::vector<ItemId>>& sorted_chunks) {
  std::vector<ItemId> out;
  for (std::size_t i = 0; i < sorted_chunks.size(); ++i) {
    out.insert(out.end(), sorted_chunks[i].begin(), sorted_chunks[i].end());
    if (i < part.pivots.size()) out.push_back(part.pivots[i]);
  }
  return out;
}

void validate_topk_params(std::uint32_t n, std::uint64_t k) {
  if (n == 0) throw InvalidUniverseError("universe must contain at least one item");
  if (k < 1 || k > n) throw InvalidParameterError("k must lie in [1, n]");
}

}  // namespace

SortedTopKParams SortedTopKParams::make(std::uint32_t n, std::uint64_t k, int r) {
  validate_topk_params(n, k);
  if (r < 1) throw InvalidParameterError("round count must be positive");
  SortedTopKParams p;
  p.n = n;
  p.k = k;
  p.r = r;
  // alpha = k^((r-1)/r) * n^((2-r)/r)
  const double exponent =
      (std::log2(static_cast<double>(k)) * (r - 1) +
       std::log2(static_cast<double>(n)) * (2 - r)) /
      r;
  p.alpha = std::max<std::uint64_t>(ceil_snapped(snap_integer(std::exp2(exponent))), 1);
  return p;
}

// ---------------------------------------------------------------------------
// SortTask

SortTask::SortTask(std::vector<ItemId> items, int rounds, std::mt19937_64* rng)
    : items_(std::move(items)), rounds_(rounds), rng_(rng) {
  if (rounds_ < 1) throw InvalidParameterError("sorting needs at least one round");
  if (items_.size() <= 1) {
    result_ = items_;
    stage_ = Stage::Done;
    return;
  }
  stage_ = (rounds_ == 1 || items_.size() <= kAllPairsCutoff) ? Stage::AllPairs
                                                              : Stage::Pivot;
}

void SortTask::emit(RoundBatch& out) {
  switch (stage_) {
    case Stage::Done:
      return;
    case Stage::AllPairs:
      out.segments.push_back(AllPairsBlock{items_, 1});
      return;
    case Stage::Pivot: {
      const std::uint64_t m = std::max<std::uint64_t>(
          ceil_pow_frac(static_cast<double>(items_.size()), 1.0, rounds_), 1);
      pivots_ = sample_without_replacement(items_, static_cast<std::size_t>(m), *rng_);
      std::vector<ItemId> sorted_pivots = pivots_;
      std::sort(sorted_pivots.begin(), sorted_pivots.end());
      rest_.clear();
      rest_.reserve(items_.size() - pivots_.size());
      for (ItemId x : items_)
        if (!std::binary_search(sorted_pivots.begin(), sorted_pivots.end(), x))
          rest_.push_back(x);
      emit_pivot_round(out, pivots_, rest_);
      return;
    }
    case Stage::Children:
      for (auto& child : children_)
        if (!child.done()) child.emit(out);
      return;
  }
}

void SortTask::consume(VerdictCursor& cur) {
  switch (stage_) {
    case Stage::Done:
      return;
    case Stage::AllPairs: {
      const std::size_t m = items_.size();
      result_ = order_by_allpairs(items_, cur.take(m * (m - 1) / 2));
      stage_ = Stage::Done;
      return;
    }
    case Stage::Pivot: {
      PivotVerdicts v(pivots_, rest_, cur);
      partition_ = partition_by_pivots(
          std::span<const ItemId>(rest_), std::span<const ItemId>(pivots_),
          [&](ItemId x, ItemId y) { return v.beats(x, y); }, items_.size());
      children_.clear();
      children_.reserve(partition_.chunks.size());
      for (auto& chunk : partition_.chunks)
        children_.emplace_back(chunk, rounds_ - 1, rng_);
      stage_ = Stage::Children;
      break;
    }
    case Stage::Children:
      for (auto& child : children_)
        if (!child.done()) child.consume(cur);
      break;
  }
  if (stage_ == Stage::Children) {
    for (const auto& child : children_)
      if (!child.done()) return;
    assemble();
  }
}

void SortTask::assemble() {
  std::vector<std::vector<ItemId>> sorted_chunks;
  sorted_chunks.reserve(children_.size());
  for (auto& child : children_) sorted_chunks.push_back(child.result());
  result_ = splice_partition(partition_, sorted_chunks);
  stage_ = Stage::Done;
}

// ---------------------------------------------------------------------------
// One-round all-pairs sorted top-k

namespace {

class OneRoundSortedTopKAlg final : public RoundAlgorithm {
 public:
  OneRoundSortedTopKAlg(std::vector<ItemId> items, std::uint64_t k)
      : items_(std::move(items)), k_(k) {
    if (items_.empty()) throw InvalidUniverseError("empty universe");
    if (k_ < 1 || k_ > items_.size())
      throw InvalidParameterError("k must lie in [1, n]");
  }

  bool next_batch(const RoundVerdicts* prev, RoundBatch& out) override {
    if (prev) {
      VerdictCursor cur(*prev);
      const std::size_t m = items_.size();
      output_ = order_by_allpairs(items_, cur.take(m * (m - 1) / 2));
      output_.resize(k_);
      return false;
    }
    if (items_.size() == 1) {
      output_ = items_;
      return false;
    }
    out.segments.push_back(AllPairsBlock{items_, 1});
    return true;
  }

  std::vector<ItemId> finalize_on_halt() override {
    std::vector<ItemId> out(items_.begin(), items_.begin() + k_);
    return out;
  }
  const std::vector<ItemId>& output() const override { return output_; }
  int rounds_declared() const override { return 1; }

 private:
  std::vector<ItemId> items_;
  std::uint64_t k_;
  std::vector<ItemId> output_;
};

class SortTaskAlg final : public RoundAlgorithm {
 public:
  SortTaskAlg(std::vector<ItemId> items, int r, std::uint64_t seed)
      : items_(std::move(items)), r_(r), rng_(seed),
        task_(items_, r, &rng_) {}

  bool next_batch(const RoundVerdicts* prev, RoundBatch& out) override {
    if (prev) {
      VerdictCursor cur(*prev);
      task_.consume(cur);
    }
    if (task_.done()) {
      output_ = task_.result();
      return false;
    }
    task_.emit(out);
    return true;
  }

  std::vector<ItemId> finalize_on_halt() override { return items_; }
  const std::vector<ItemId>& output() const override { return output_; }
  int rounds_declared() const override { return r_; }

 private:
  std::vector<ItemId> items_;
  int r_;
  std::mt19937_64 rng_;
  SortTask task_;
  std::vector<ItemId> output_;
};

}  // namespace

std::unique_ptr<RoundAlgorithm> one_round_sorted_topk(std::vector<ItemId> items,
                                                      std::uint64_t k) {
  return std::make_unique<OneRoundSortedTopKAlg>(std::move(items), k);
}

std::unique_ptr<RoundAlgorithm> one_round_sorted_topk(std::uint32_t n,
                                                      std::uint64_t k) {
  validate_topk_params(n, k);
  return one_round_sorted_topk(iota_items(n), k);
}

std::unique_ptr<RoundAlgorithm> r_round_sort(std::vector<ItemId> items, int r,
                                             std::uint64_t seed) {
  return std::make_unique<SortTaskAlg>(std::move(items), r, seed);
}

std::unique_ptr<RoundAlgorithm> r_round_sort(std::uint32_t n, int r,
                                             std::uint64_t seed) {
  if (n == 0) throw InvalidUniverseError("empty universe");
  return r_round_sort(iota_items(n), r, seed);
}

// ---------------------------------------------------------------------------
// RSorted1

RSorted1::RSorted1(std::uint32_t n, std::uint64_t k, int r, std::uint64_t seed)
    : params_(SortedTopKParams::make(n, k, r)), rng_(seed) {
  if (r < 2) throw InvalidParameterError("rsorted1 needs at least two rounds");
}

void RSorted1::finish(std::vector<ItemId> out) {
  output_ = std::move(out);
  if (output_.size() > params_.k) output_.resize(params_.k);
  final_ = true;
}

bool RSorted1::next_batch(const RoundVerdicts* prev, RoundBatch& out) {
  if (round_ == 0) {
    if (params_.n == 1) {
      finish({ItemId{0}});
      return false;
    }
    pivots_ = sample_with_repetition_dedup(params_.n, params_.alpha, rng_);
    rest_ = complement_of_sorted(params_.n, pivots_);
    emit_pivot_round(out, pivots_, rest_);
    round_ = 1;
    return true;
  }
  VerdictCursor cur(*prev);
  if (round_ == 1) {
    PivotVerdicts v(pivots_, rest_, cur);
    partition_ = partition_by_pivots(
        std::span<const ItemId>(rest_), std::span<const ItemId>(pivots_),
        [&](ItemId x, ItemId y) { return v.beats(x, y); }, params_.k);
    tasks_.clear();
    tasks_.reserve(partition_.chunks.size());
    for (auto& chunk : partition_.chunks)
      tasks_.emplace_back(chunk, params_.r - 1, &rng_);
  } else {
    for (auto& task : tasks_)
      if (!task.done()) task.consume(cur);
  }
  bool all_done = true;
  for (const auto& task : tasks_)
    if (!task.done()) {
      all_done = false;
      break;
    }
  if (all_done) {
    std::vector<std::vector<ItemId>> chunks;
    chunks.reserve(tasks_.size());
    for (auto& task : tasks_) chunks.push_back(task.result());
    finish(splice_partition(partition_, chunks));
    return false;
  }
  for (auto& task : tasks_)
    if (!task.done()) task.emit(out);
  ++round_;
  return true;
}

std::vector<ItemId> RSorted1::finalize_on_halt() {
  std::vector<ItemId> out;
  for (ItemId id = 0; id < params_.k; ++id) out.push_back(id);
  return out;
}

std::unique_ptr<RSorted1> rsorted1(std::uint32_t n, std::uint64_t k, int r,
                                   std::uint64_t seed) {
  return std::make_unique<RSorted1>(n, k, r, seed);
}

// ---------------------------------------------------------------------------
// QuantilePivotFinder

std::uint64_t QuantilePivotFinder::tolerance_for(std::uint32_t n,
                                                 std::uint64_t sample_size) {
  const double d = 3.0 * n *
                   std::sqrt(std::log(static_cast<double>(n)) /
                             static_cast<double>(sample_size));
  return ceil_snapped(d);
}

QuantilePivotFinder::QuantilePivotFinder(std::uint32_t n, std::uint64_t alpha,
                                         std::vector<double> target_ranks,
                                         std::uint64_t budget,
                                         std::uint64_t seed)
    : n_(n) {
  if (n == 0) throw InvalidUniverseError("empty universe");
  if (budget < n) throw InsufficientBudgetError("pivot finder budget must be at least n");
  (void)alpha;  // recorded in the result only
  std::mt19937_64 rng(seed);
  const auto t = std::max<std::uint64_t>(
      1, std::min<std::uint64_t>(
             static_cast<std::uint64_t>(std::floor(std::sqrt(static_cast<double>(budget)))), n));
  sample_ = sample_without_replacement(iota_items(n), static_cast<std::size_t>(t), rng);
  result_.targets = std::move(target_ranks);
  result_.sample_size = t;
  result_.tolerance = tolerance_for(n, t);
}

bool QuantilePivotFinder::next_batch(const RoundVerdicts* prev, RoundBatch& out) {
  if (!emitted_ && sample_.size() > 1) {
    out.segments.push_back(AllPairsBlock{sample_, 1});
    emitted_ = true;
    return true;
  }
  std::vector<ItemId> ordered;
  if (prev) {
    VerdictCursor cur(*prev);
    const std::size_t t = sample_.size();
    ordered = order_by_allpairs(sample_, cur.take(t * (t - 1) / 2));
  } else {
    ordered = sample_;  // single-item sample
  }
  const auto t = static_cast<std::int64_t>(ordered.size());
  result_.pivots.clear();
  for (double target : result_.targets) {
    auto idx = static_cast<std::int64_t>(std::llround(target * t / n_));
    idx = std::clamp<std::int64_t>(idx, 1, t);
    result_.pivots.push_back(ordered[static_cast<std::size_t>(idx - 1)]);
  }
  output_ = result_.pivots;
  return false;
}

std::vector<ItemId> QuantilePivotFinder::finalize_on_halt() { return sample_; }

std::unique_ptr<QuantilePivotFinder> approx_quantile_pivots(
    std::uint32_t n, std::uint64_t alpha, std::vector<double> target_ranks,
    std::uint64_t budget, std::uint64_t seed) {
  return std::make_unique<QuantilePivotFinder>(n, alpha, std::move(target_ranks),
                                               budget, seed);
}

// ---------------------------------------------------------------------------
// RSorted2

RSorted2::RSorted2(std::uint32_t n, std::uint64_t k, int r, std::uint64_t seed)
    : params_(SortedTopKParams::make(n, k, r)), rng_(seed) {
  if (r < 3) throw InvalidParameterError("rsorted2 needs at least three rounds");
  all_items_ = iota_items(n);
}

void RSorted2::finish(std::vector<ItemId> out) {
  output_ = std::move(out);
  if (output_.size() > params_.k) output_.resize(params_.k);
  phase_ = Phase::Done;
}

bool RSorted2::next_batch(const RoundVerdicts* prev, RoundBatch& out) {
  const std::uint32_t n = params_.n;
  const double alpha = static_cast<double>(params_.alpha);
  if (phase_ == Phase::Round1 && round_ == 0) {
    if (n == 1) {
      finish({ItemId{0}});
      return false;
    }
    const double ln_n = std::log(static_cast<double>(n));
    probes_ = sample_with_repetition_dedup(n, ceil_snapped(alpha * ln_n), rng_);
    probe_rest_ = complement_of_sorted(n, probes_);
    const std::uint64_t qbudget =
        std::max<std::uint64_t>(n, ceil_snapped(alpha * n * ln_n));
    const auto t = std::max<std::uint64_t>(
        1, std::min<std::uint64_t>(
               static_cast<std::uint64_t>(std::floor(std::sqrt(static_cast<double>(qbudget)))), n));
    sample_ = sample_without_replacement(all_items_, static_cast<std::size_t>(t), rng_);
    tolerance_ = QuantilePivotFinder::tolerance_for(n, t);
    const std::uint64_t pivot_count = params_.alpha * params_.alpha + 1;
    targets_.clear();
    for (std::uint64_t i = 1; i <= pivot_count; ++i)
      targets_.push_back(static_cast<double>(i) * params_.k / (alpha * alpha));
    emit_pivot_round(out, probes_, probe_rest_);
    out.segments.push_back(AllPairsBlock{sample_, 1});
    round_ = 1;
    return true;
  }

  VerdictCursor cur(*prev);
  if (round_ == 1) {
    consume_round1(cur);
    ++round_;
    if (phase_ == Phase::Fallback) {
      out.segments.push_back(AllPairsBlock{all_items_, 1});
      return true;
    }
    out.segments.push_back(AllPairsBlock{distinct_pivots_, 1});
    out.segments.push_back(CrossBlock{distinct_pivots_, nprime_rest_, 1});
    return true;
  }
  if (phase_ == Phase::Fallback) {
    const std::size_t m = all_items_.size();
    finish(order_by_allpairs(all_items_, cur.take(m * (m - 1) / 2)));
    return false;
  }
  if (phase_ == Phase::Round2) {
    if (!consume_round2(cur)) {
      // FAIL: restore correctness by comparing all pairs next round.
      failed_ = true;
      phase_ = Phase::Fallback;
      out.segments.push_back(AllPairsBlock{all_items_, 1});
      ++round_;
      return true;
    }
    phase_ = Phase::ChunkSorts;
  } else {
    for (auto& task : tasks_)
      if (!task.done()) task.consume(cur);
  }
  bool all_done = true;
  for (const auto& task : tasks_)
    if (!task.done()) {
      all_done = false;
      break;
    }
  if (all_done) {
    std::vector<std::vector<ItemId>> chunks;
    chunks.reserve(tasks_.size());
    for (auto& task : tasks_) chunks.push_back(task.result());
    auto spliced = splice_partition(chunk_partition_, chunks);
    spliced.push_back(out_boundary_);
    finish(std::move(spliced));
    return false;
  }
  for (auto& task : tasks_)
    if (!task.done()) task.emit(out);
  ++round_;
  return true;
}

void RSorted2::consume_round1(VerdictCursor& cur) {
  const std::uint32_t n = params_.n;
  PivotVerdicts v(probes_, probe_rest_, cur);
  const std::size_t t = sample_.size();
  std::vector<ItemId> ordered_sample =
      t > 1 ? order_by_allpairs(sample_, cur.take(t * (t - 1) / 2)) : sample_;

  quantile_pivots_.clear();
  for (double target : targets_) {
    auto idx = static_cast<std::int64_t>(
        std::llround(target * static_cast<double>(t) / n));
    idx = std::clamp<std::int64_t>(idx, 1, static_cast<std::int64_t>(t));
    quantile_pivots_.push_back(ordered_sample[static_cast<std::size_t>(idx - 1)]);
  }
  distinct_pivots_ = quantile_pivots_;
  std::sort(distinct_pivots_.begin(), distinct_pivots_.end());
  distinct_pivots_.erase(
      std::unique(distinct_pivots_.begin(), distinct_pivots_.end()),
      distinct_pivots_.end());

  // Boundary probe: smallest rank inside [2n/alpha, 3n/alpha].
  const double alpha = static_cast<double>(params_.alpha);
  const double lo = 2.0 * n / alpha;
  const double hi = 3.0 * n / alpha;
  Rank best_rank = 0;
  bool found = false;
  std::vector<Rank> probe_ranks(probes_.size());
  for (std::size_t p = 0; p < probes_.size(); ++p) {
    probe_ranks[p] = static_cast<Rank>(n - v.wins_of_pivot(p));
    const double rank = probe_ranks[p];
    if (rank >= lo && rank <= hi && (!found || probe_ranks[p] < best_rank)) {
      best_rank = probe_ranks[p];
      boundary_ = probes_[p];
      found = true;
    }
  }
  if (!found) {
    failed_ = true;
    phase_ = Phase::Fallback;
    return;
  }
  boundary_rank_ = best_rank;

  in_nprime_.assign(n, 0);
  nprime_.clear();
  for (ItemId x : all_items_)
    if (x != boundary_ && v.beats(x, boundary_)) {
      in_nprime_[x] = 1;
      nprime_.push_back(x);
    }
  nprime_rest_.clear();
  std::vector<std::uint8_t> is_pivot(n, 0);
  for (ItemId q : distinct_pivots_) is_pivot[q] = 1;
  for (ItemId x : nprime_)
    if (!is_pivot[x]) nprime_rest_.push_back(x);
  phase_ = Phase::Round2;
}

bool RSorted2::consume_round2(VerdictCursor& cur) {
  PivotVerdicts v(distinct_pivots_, nprime_rest_, cur);
  const std::uint64_t k = params_.k;

  // Exact rank of each pivot within N' (|N'|+1 when the pivot sits outside).
  std::vector<std::uint64_t> within_rank(distinct_pivots_.size());
  for (std::size_t q = 0; q < distinct_pivots_.size(); ++q) {
    std::uint64_t beaten_by = 0;
    for (ItemId x : nprime_)
      if (x != distinct_pivots_[q] && v.beats(x, distinct_pivots_[q])) ++beaten_by;
    within_rank[q] = beaten_by + 1;
  }
  PosIndex pivot_pos(distinct_pivots_);

  // Audit every target against the advertised tolerance.
  for (std::size_t i = 0; i < targets_.size(); ++i) {
    const auto q = static_cast<std::size_t>(pivot_pos.find(quantile_pivots_[i]));
    const double deviation =
        std::abs(static_cast<double>(within_rank[q]) - targets_[i]);
    if (deviation > static_cast<double>(tolerance_)) return false;
  }

  // Output boundary: the pivot of smallest within-N' rank >= k, falling back
  // to the probe boundary itself. Without a boundary of known rank >= k the
  // chunk structure cannot cover the sorted top-k, so FAIL.
  std::int64_t chosen = -1;
  for (std::size_t q = 0; q < distinct_pivots_.size(); ++q) {
    if (in_nprime_[distinct_pivots_[q]] == 0) continue;
    if (within_rank[q] < k) continue;
    if (chosen < 0 || within_rank[q] < within_rank[static_cast<std::size_t>(chosen)])
      chosen = static_cast<std::int64_t>(q);
  }
  std::uint64_t boundary_within_rank;
  if (chosen >= 0) {
    out_boundary_ = distinct_pivots_[static_cast<std::size_t>(chosen)];
    boundary_within_rank = within_rank[static_cast<std::size_t>(chosen)];
  } else if (boundary_rank_ > k) {
    out_boundary_ = boundary_;
    boundary_within_rank = nprime_.size() + 1;
  } else {
    return false;
  }

  // Chunk the items better than the boundary, delimited by the better pivots.
  delimiters_.clear();
  std::vector<std::pair<std::uint64_t, ItemId>> ordered;
  for (std::size_t q = 0; q < distinct_pivots_.size(); ++q) {
    if (in_nprime_[distinct_pivots_[q]] == 0) continue;
    if (within_rank[q] < boundary_within_rank)
      ordered.emplace_back(within_rank[q], distinct_pivots_[q]);
  }
  std::sort(ordered.begin(), ordered.end());
  for (auto& [rank, id] : ordered) delimiters_.push_back(id);

  std::vector<std::uint8_t> is_delimiter(params_.n, 0);
  for (ItemId q : delimiters_) is_delimiter[q] = 1;
  std::vector<ItemId> better;
  for (ItemId x : nprime_) {
    if (x == out_boundary_ || is_delimiter[x]) continue;
    const bool beats_boundary =
        chosen >= 0 ? v.beats(x, out_boundary_) : true;  // boundary==s: all of N'
    if (beats_boundary) better.push_back(x);
  }
  chunk_partition_ = partition_by_pivots(
      std::span<const ItemId>(better), std::span<const ItemId>(delimiters_),
      [&](ItemId x, ItemId y) { return v.beats(x, y); },
      better.size() + delimiters_.size());
  tasks_.clear();
  tasks_.reserve(chunk_partition_.chunks.size());
  for (auto& chunk : chunk_partition_.chunks)
    tasks_.emplace_back(chunk, params_.r - 2, &rng_);
  return true;
}

std::vector<ItemId> RSorted2::finalize_on_halt() {
  std::vector<ItemId> out;
  for (ItemId id = 0; id < params_.k; ++id) out.push_back(id);
  return out;
}

std::unique_ptr<RSorted2> rsorted2(std::uint32_t n, std::uint64_t k, int r,
                                   std::uint64_t seed) {
  return std::make_unique<RSorted2>(n, k, r, seed);
}

// ---------------------------------------------------------------------------
// Dispatcher

namespace {

class TruncateAdapter final : public RoundAlgorithm {
 public:
  TruncateAdapter(std::unique_ptr<RoundAlgorithm> inner, std::uint64_t k)
      : inner_(std::move(inner)), k_(k) {}

  bool next_batch(const RoundVerdicts* prev, RoundBatch& out) override {
    if (inner_->next_batch(prev, out)) return true;
    output_ = inner_->output();
    if (output_.size() > k_) output_.resize(k_);
    return false;
  }
  std::vector<ItemId> finalize_on_halt() override {
    auto out = inner_->finalize_on_halt();
    if (out.size() > k_) out.resize(k_);
    return out;
  }
  const std::vector<ItemId>& output() const override { return output_; }
  int rounds_declared() const override { return inner_->rounds_declared(); }

 private:
  std::unique_ptr<RoundAlgorithm> inner_;
  std::uint64_t k_;
  std::vector<ItemId> output_;
};

}  // namespace

std::unique_ptr<RoundAlgorithm> truncate_output(
    std::unique_ptr<RoundAlgorithm> inner, std::uint64_t k) {
  return std::make_unique<TruncateAdapter>(std::move(inner), k);
}

DispatchChoice describe_noiseless_dispatch(std::uint32_t n, std::uint64_t k,
                                           int r) {
  validate_topk_params(n, k);
  if (r < 1) throw InvalidParameterError("round count must be positive");
  DispatchChoice choice;
  if (r == 1) {
    choice.which = DispatchCase::AllPairs;
    choice.inner_k = k;
    return choice;
  }
  if (r == 2) {
    const double threshold = pow_frac(n, 2, 3);
    if (static_cast<double>(k) > threshold) {
      choice.which = DispatchCase::RSorted1;
      choice.inner_k = k;
    } else {
      choice.which = DispatchCase::RSorted1Inflated;
      choice.inner_k = std::min<std::uint64_t>(ceil_snapped(threshold), n);
    }
    return choice;
  }
  const double t1 = pow_frac(n, 2 * r - 2, 2 * r - 1);
  const double t2 = 10.0 * pow_frac(n, r - 2, r - 1);
  if (static_cast<double>(k) > t1) {
    choice.which = DispatchCase::RSorted1;
    choice.inner_k = k;
  } else if (static_cast<double>(k) >= t2) {
    choice.which = DispatchCase::RSorted2;
    choice.inner_k = k;
  } else {
    choice.which = DispatchCase::RSorted2Inflated;
    choice.inner_k = std::min<std::uint64_t>(ceil_snapped(t2), n);
  }
  return choice;
}

std::unique_ptr<RoundAlgorithm> noiseless_sorted_topk(std::uint32_t n,
                                                      std::uint64_t k, int r,
                                                      std::uint64_t seed) {
  const DispatchChoice choice = describe_noiseless_dispatch(n, k, r);
  switch (choice.which) {
    case DispatchCase::AllPairs:
      return one_round_sorted_topk(n, k);
    case DispatchCase::RSorted1:
      return rsorted1(n, k, r, seed);
    case DispatchCase::RSorted1Inflated:
      return truncate_output(rsorted1(n, choice.inner_k, r, seed), k);
    case DispatchCase::RSorted2:
      return rsorted2(n, k, r, seed);
    case DispatchCase::RSorted2Inflated:
    default:
      return truncate_output(rsorted2(n, choice.inner_k, r, seed), k);
  }
}

}  // namespace roundrank
