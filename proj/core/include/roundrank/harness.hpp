// Round-model execution harness.
//
// Drives a RoundAlgorithm against an oracle one round at a time: the whole
// batch is issued before any of its outcomes are visible, comparisons are
// counted exactly, and a hard budget truncates the offending batch to the
// prefix that still fits.
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "roundrank/batch.hpp"
#include "roundrank/ground_truth.hpp"

namespace roundrank {

// Behavioral contract: the requests of batch t may depend only on outcomes of
// rounds < t and on internal randomness fixed before round t begins.
class RoundAlgorithm {
 public:
  virtual ~RoundAlgorithm() = default;

  // Either fills `out` with the next round's batch and returns true, or
  // returns false meaning Final (output() is ready). `prev` carries the
  // previous round's verdicts; it is null before the first round.
  virtual bool next_batch(const RoundVerdicts* prev, RoundBatch& out) = 0;

  // Best-effort answer when the harness halts the run on its budget.
  virtual std::vector<ItemId> finalize_on_halt() = 0;

  virtual const std::vector<ItemId>& output() const = 0;

  // Upper bound on rounds this instance may use.
  virtual int rounds_declared() const = 0;
};

// Expanded per-pair record, kept only when a transcript is requested.
struct PairOutcome {
  ComparisonRequest request;
  std::uint32_t reps = 0;    // evaluated repetitions (may be short on halt)
  std::uint32_t wins_a = 0;  // how many repetitions item `a` won
};

struct Transcript {
  std::vector<std::vector<PairOutcome>> rounds;
};

struct RunStats {
  std::vector<std::uint64_t> comparisons_per_round;
  std::uint64_t total_comparisons = 0;
  int rounds_used = 0;
  bool halted = false;
  std::vector<ItemId> output;
  std::optional<bool> correct;  // filled by the verifier
};

// Flips the winner of one designated comparison; used by the adaptiveness
// audit to make outcomes diverge inside a chosen round.
struct NoiseFlip {
  std::uint32_t round_index = 0;
  std::uint64_t ordinal = 0;
};

struct ExecOptions {
  int max_rounds = 64;
  std::optional<std::uint64_t> budget;
  std::uint64_t run_seed = 0;
  Transcript* transcript = nullptr;
  const NoiseFlip* flip = nullptr;
};

RunStats execute(RoundAlgorithm& alg, const RankView& view,
                 const NoiseModel& noise, const ExecOptions& opts);

// Read-only window into the oracle an honest algorithm never touches; the
// audit hands it to factories so a deliberately adaptive test double can
// cheat with it (and get caught).
class OracleHandle {
 public:
  OracleHandle(const RankView& view, NoiseModel noise, std::uint64_t run_seed,
               const NoiseFlip* flip)
      : view_(&view), noise_(noise), run_seed_(run_seed), flip_(flip) {}

  ItemId winner(ItemId a, ItemId b, std::uint32_t round_index,
                std::uint64_t ordinal) const;

 private:
  const RankView* view_;
  NoiseModel noise_;
  std::uint64_t run_seed_;
  const NoiseFlip* flip_;
};

struct AdaptivenessReport {
  bool passed = true;
  int probes_run = 0;
  std::string failure_detail;
};

// Runs the factory's algorithm twice per probe with oracles that agree on
// every round before t and diverge on a single comparison inside round t
// (early and late positions are both probed). Identically seeded instances
// must issue identical batches for rounds 1..t; any difference is evidence
// of intra-round adaptivity.
AdaptivenessReport audit_adaptiveness(
    const std::function<std::unique_ptr<RoundAlgorithm>(const OracleHandle&)>&
        factory,
    const RankView& view, const NoiseModel& noise, int probe_count,
    std::uint64_t run_seed);

}  // namespace roundrank
