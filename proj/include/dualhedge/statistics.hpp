#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>

namespace dualhedge {

/// Monte Carlo estimate: sample mean and its standard error.
struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Sample mean and standard error (stdev / sqrt(n)); with `weights`, the
/// weighted mean of an exactly weighted sample and a zero standard error.
inline Estimate estimate_mean(std::span<const double> values,
                              std::span<const double> weights = {}) {
  if (values.empty()) throw std::invalid_argument("estimate_mean: empty sample");
  if (!weights.empty()) {
    if (weights.size() != values.size())
      throw std::invalid_argument("estimate_mean: weight count mismatch");
    double wsum = 0.0, acc = 0.0;
    for (std::size_t q = 0; q < values.size(); ++q) {
      wsum += weights[q];
      acc += weights[q] * values[q];
    }
    return {acc / wsum, 0.0};
  }
  const auto n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double var = values.size() > 1 ? ss / (n - 1.0) : 0.0;
  return {mean, std::sqrt(var / n)};
}

inline double sample_variance(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const auto n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return ss / (n - 1.0);
}

}  // namespace dualhedge
