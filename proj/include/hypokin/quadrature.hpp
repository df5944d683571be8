#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hypokin/types.hpp"

namespace hypokin {

/// One-dimensional rule: sum_k weights[k] * f(nodes[k]).
struct Rule1D {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

/// Gauss-Legendre on [a, b].
Rule1D gauss_legendre(int n, double a = -1.0, double b = 1.0);

/// Gauss-Hermite for the standard normal weight; weights sum to one.
Rule1D gauss_hermite(int n);

/// Tensor Gauss-Hermite for N(0, I_dim): nodes are the columns of `points`.
struct TensorHermite {
  int dim = 0;
  int per_axis = 0;
  MatX points;
  std::vector<double> weights;

  TensorHermite() = default;
  TensorHermite(int dim, int per_axis);
  /// Tensor product of any one-dimensional rule for the standard normal weight.
  TensorHermite(int dim, const Rule1D& base);

  std::size_t size() const { return weights.size(); }
};

/// Composite Gauss-Legendre for the standard normal weight on [-half_width, half_width].
/// Converges far faster than Gauss-Hermite on kinked integrands.
Rule1D normal_composite(int panels, int nodes_per_panel, double half_width = 9.0);

/// Composite Gauss-Legendre on [a, b] graded toward both endpoints.
/// Each half uses r = end -/+ (half length) * u^p with u Gauss-Legendre on [0, 1];
/// p = 1 means no grading on that side. Nodes within a few ulp of an endpoint are dropped.
Rule1D graded_two_sided(double a, double b, int nodes_per_half, double p_left, double p_right);

/// Gauss-Legendre panels split at the given breakpoints inside (a, b).
Rule1D panelled_gauss_legendre(double a, double b, int nodes_per_panel,
                               std::span<const double> breakpoints);

/// Pairwise summation in index order; the result depends only on the input order.
template <typename T>
T pairwise_sum(std::span<const T> values) {
  if (values.empty()) return T{};
  if (values.size() == 1) return values[0];
  if (values.size() <= 8) {
    T acc = values[0];
    for (std::size_t i = 1; i < values.size(); ++i) acc = acc + values[i];
    return acc;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

}  // namespace hypokin
