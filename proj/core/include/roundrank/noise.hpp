// Counter-based noise streams and the comparison oracle.
//
// Every noisy comparison outcome is a pure function of
// (run_seed, round_index, ordinal): the triple is hashed through the
// splitmix64 finalizer, so batches can be evaluated in any order (or in
// parallel) with bit-identical results and no shared mutable state.
#pragma once

#include <cmath>
#include <cstdint>

#include "roundrank/types.hpp"

namespace roundrank {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// splitmix64 finalizer; also used to derive child seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

enum class NoiseKind { Noiseless, Bernoulli };

// Noiseless behaves as p = 1; Bernoulli requires 1/2 < p <= 1.
struct NoiseModel {
  NoiseKind kind = NoiseKind::Noiseless;
  double p = 1.0;

  static NoiseModel noiseless() { return {NoiseKind::Noiseless, 1.0}; }
  static NoiseModel bernoulli(double p) {
    if (!(p > 0.5) || !(p <= 1.0))
      throw InvalidParameterError("Bernoulli noise requires 1/2 < p <= 1");
    return {NoiseKind::Bernoulli, p};
  }
  bool noiseless_effective() const {
    return kind == NoiseKind::Noiseless || p >= 1.0;
  }
};

// (run_seed, round_index, ordinal) uniquely determines one uniform variate.
struct NoiseCoordinates {
  std::uint64_t run_seed = 0;
  std::uint32_t round_index = 1;  // 1-based
  std::uint64_t ordinal = 0;      // index within the round's expanded batch
};

// Per-round stream base; drawing then only needs the ordinal.
inline std::uint64_t noise_stream_base(std::uint64_t run_seed,
                                       std::uint32_t round_index) {
  return mix64(run_seed + kGolden * round_index);
}

inline std::uint64_t noise_bits(std::uint64_t stream_base,
                                std::uint64_t ordinal) {
  return mix64(stream_base + (ordinal + 1) * kGolden);
}

// The uniform variate attached to one coordinate triple: top 53 bits.
inline double uniform01(const NoiseCoordinates& c) {
  const std::uint64_t bits =
      noise_bits(noise_stream_base(c.run_seed, c.round_index), c.ordinal);
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// bits < threshold  <=>  uniform01 < p. Only valid for p < 1.
inline std::uint64_t bernoulli_threshold(double p) {
  return static_cast<std::uint64_t>(std::ceil(p * 0x1.0p53)) << 11;
}

struct ComparisonRequest {
  ItemId a = 0;
  ItemId b = 0;
};

struct ComparisonOutcome {
  ComparisonRequest request;
  ItemId winner = 0;
};

}  // namespace roundrank
