// Repetition constants and the small numeric helpers shared by the
// algorithms: odd-ceiled repetition counts, snapped fractional powers,
// Bernoulli KL divergence.
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>

#include "roundrank/types.hpp"

namespace roundrank {

// Repetition constants. constant_scale multiplies every repetition count
// (and the halting budget) so desk-scale experiments stay tractable;
// statistical guarantees are only claimed at scale 1.
struct AlgoConstants {
  double c = 864.0;    // 18*48, one-round top-k per-level repetitions
  double c1 = 2304.0;  // 72*32, two-round top-k item-vs-pivot repetitions
  double c2 = 864.0;   // two-round top-k second-round repetitions
  std::optional<double> c0;  // halting budget constant; derived if unset
  double constant_scale = 1.0;

  double effective_c0() const {
    return c0 ? *c0 : c1 + 20000.0 * c2 + 1.0;
  }
};

// Snaps values that are within floating-point noise of an integer, so that
// quantities like 1000^(2/3) or 864*8 round the way the formulas intend.
inline double snap_integer(double x) {
  const double r = std::nearbyint(x);
  if (std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x))) return r;
  return x;
}

inline std::uint64_t ceil_snapped(double x) {
  const double s = std::ceil(snap_integer(x));
  return s <= 0.0 ? 0u : static_cast<std::uint64_t>(s);
}

// Smallest odd integer >= max(ceil(x), 1). Every repetition count goes
// through this so majorities are always defined.
inline std::uint32_t odd_ceil(double x) {
  std::uint64_t v = ceil_snapped(x);
  if (v < 1) v = 1;
  if (v % 2 == 0) ++v;
  return static_cast<std::uint32_t>(v);
}

// base^(num/den) computed in log2 space (exact for powers of two) and
// snapped to nearby integers.
inline double pow_frac(double base, double num, double den) {
  if (base <= 0.0) return 0.0;
  return snap_integer(std::exp2(std::log2(base) * num / den));
}

inline std::uint64_t ceil_pow_frac(double base, double num, double den) {
  return ceil_snapped(pow_frac(base, num, den));
}

// KL divergence between Bernoulli(p) and Bernoulli(q), natural log.
inline double kl_bernoulli(double p, double q) {
  double out = 0.0;
  if (p > 0.0) out += p * std::log(p / q);
  if (p < 1.0) out += (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
  return out;
}

// Chernoff rate for a majority of p=2/3 comparisons going the wrong way.
inline double majority_error_rate() { return kl_bernoulli(0.5, 1.0 / 3.0); }

}  // namespace roundrank
