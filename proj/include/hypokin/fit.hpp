#pragma once

#include <cstddef>
#include <span>
#include <utility>

namespace hypokin {

/// Least-squares line through (log h, log value).
struct PowerFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // max |log value - fitted| over the pairs
  std::size_t n = 0;
};

/// Throws InsufficientData below `min_pairs` and InvalidData on non-positive entries.
PowerFit fit_power_law(std::span<const std::pair<double, double>> pairs,
                       std::size_t min_pairs = 2);

}  // namespace hypokin
