// Statistical verification helpers: Wilson intervals and log-log scaling fits.
#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "roundrank/types.hpp"

namespace roundrank {

struct WilsonInterval {
  double rate = 0.0;
  double lo = 0.0;
  double hi = 1.0;
};

// Two-sided Wilson score interval (default 95%).
WilsonInterval wilson_interval(std::uint64_t successes, std::uint64_t trials,
                               double z = 1.959963984540054);

struct ScalingFit {
  std::vector<std::pair<double, double>> points;  // (n, mean comparisons)
  double slope = 0.0;
  double intercept = 0.0;   // in log space
  double residual = 0.0;    // RMS residual in log space
};

// Least-squares slope in log-log space. Requires >= 3 points with distinct n
// and positive means (InsufficientDataError otherwise).
ScalingFit fit_scaling_exponent(std::span<const std::pair<double, double>> points);

}  // namespace roundrank
