// Basic identifiers and error taxonomy shared across the library.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace roundrank {

// Items carry 0-based labels. Dummy padding items occupy ids >= the real
// universe size and are flagged via RankView::is_dummy.
using ItemId = std::uint32_t;

// Ranks are 1-based, 1 = best.
using Rank = std::uint32_t;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// n = 0 or an otherwise unusable universe.
struct InvalidUniverseError : Error {
  using Error::Error;
};

// Parameter outside its documented range (k, r, delta, probabilities, ...).
struct InvalidParameterError : Error {
  using Error::Error;
};

// A comparison request with a == b.
struct SelfComparisonError : Error {
  using Error::Error;
};

// Algorithm emitted more batches than the configured round limit.
struct RoundLimitError : Error {
  using Error::Error;
};

// Noiseless outcomes that admit no consistent pivot partition. Under a
// noiseless oracle this signals a harness bug, not bad luck.
struct PartitionInconsistencyError : Error {
  using Error::Error;
};

struct InsufficientBudgetError : Error {
  using Error::Error;
};

struct InsufficientDataError : Error {
  using Error::Error;
};

// Majority asked over an even number of outcomes.
struct TiePossibleError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace roundrank
