#include "roundrank/stats.hpp"

#include <algorithm>
#include <cmath>

namespace roundrank {

WilsonInterval wilson_interval(std::uint64_t successes, std::uint64_t trials,
                               double z) {
  WilsonInterval out;
  if (trials == 0) {
    out.rate = 0.0;
    out.lo = 0.0;
    out.hi = 1.0;
    return out;
  }
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  out.rate = p;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half =
      z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  // Endpoints are exact at the boundary counts.
  out.lo = successes == 0 ? 0.0 : std::max(0.0, center - half);
  out.hi = successes == trials ? 1.0 : std::min(1.0, center + half);
  return out;
}

ScalingFit fit_scaling_exponent(std::span<const std::pair<double, double>> points) {
  if (points.size() < 3)
    throw InsufficientDataError("scaling fit needs at least three points");
  ScalingFit fit;
  fit.points.assign(points.begin(), points.end());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(points.size());
  for (auto& [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0))
      throw InsufficientDataError("scaling fit needs positive sizes and means");
    const double lx = std::log(x);
    const double ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double det = n * sxx - sx * sx;
  if (!(std::abs(det) > 0.0))
    throw InsufficientDataError("scaling fit needs distinct sizes");
  fit.slope = (n * sxy - sx * sy) / det;
  fit.intercept = (sy - fit.slope * sx) / n;
  double ss = 0;
  for (auto& [x, y] : points) {
    const double r = std::log(y) - (fit.intercept + fit.slope * std::log(x));
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / n);
  return fit;
}

}  // namespace roundrank
