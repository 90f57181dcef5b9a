#pragma once

// Weighted quantiles and equal-tailed credible intervals with linear
// interpolation on the weighted empirical CDF (midpoint knots).

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace bayesbench::diag {

struct WeightedSampleSet {
  std::vector<std::vector<double>> samples;  // P x k
  std::vector<double> weights;               // P, normalized
};

inline double weighted_quantile(std::span<const double> values, std::span<const double> weights,
                                double q) {
  if (values.size() != weights.size() || values.empty())
    throw std::invalid_argument("weighted_quantile: bad inputs");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("weighted_quantile: q outside [0, 1]");

  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("weighted_quantile: negative weight");
    total += w;
  }
  if (!(total > 0.0)) throw std::invalid_argument("weighted_quantile: zero total weight");

  const double target = q * total;
  double cum = 0.0;
  double prev_knot = 0.0;
  double prev_value = values[order.front()];
  for (std::size_t idx = 0; idx < order.size(); ++idx) {
    const double w = weights[order[idx]];
    const double knot = cum + 0.5 * w;  // midpoint of this sample's weight span
    const double value = values[order[idx]];
    if (target <= knot) {
      if (idx == 0 || knot == prev_knot) return value;
      const double frac = (target - prev_knot) / (knot - prev_knot);
      return prev_value + frac * (value - prev_value);
    }
    cum += w;
    prev_knot = knot;
    prev_value = value;
  }
  return values[order.back()];
}

inline std::pair<double, double> equal_tailed_interval(std::span<const double> values,
                                                       std::span<const double> weights,
                                                       double mass) {
  if (!(mass > 0.0 && mass < 1.0))
    throw std::invalid_argument("equal_tailed_interval: mass must lie in (0, 1)");
  // need at least two distinct values for a nondegenerate interval
  double lo_v = values.front(), hi_v = values.front();
  for (double v : values) {
    lo_v = std::min(lo_v, v);
    hi_v = std::max(hi_v, v);
  }
  if (!(hi_v > lo_v))
    throw std::invalid_argument("equal_tailed_interval: fewer than two distinct samples");
  const double tail = 0.5 * (1.0 - mass);
  return {weighted_quantile(values, weights, tail),
          weighted_quantile(values, weights, 1.0 - tail)};
}

inline std::pair<double, double> equal_tailed_interval(const WeightedSampleSet& set,
                                                       std::size_t parameter, double mass) {
  if (set.samples.empty()) throw std::invalid_argument("equal_tailed_interval: empty sample set");
  std::vector<double> values(set.samples.size());
  for (std::size_t i = 0; i < set.samples.size(); ++i) values[i] = set.samples[i][parameter];
  return equal_tailed_interval(values, set.weights, mass);
}

}  // namespace bayesbench::diag
