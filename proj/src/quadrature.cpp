#include "hypokin/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>

#include "hypokin/errors.hpp"

namespace hypokin {

namespace {

Rule1D legendre_reference(int n) {
  Rule1D rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // recompute derivative at the converged node
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    if (n == 1) p0 = 1.0;
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

const Rule1D& cached_legendre(int n) {
  static std::mutex mutex;
  static std::map<int, Rule1D> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, legendre_reference(n)).first;
  return it->second;
}

}  // namespace

Rule1D gauss_legendre(int n, double a, double b) {
  if (n < 1) fail(ErrorKind::InvalidConfig, "Gauss-Legendre needs at least one node");
  Rule1D rule = cached_legendre(n);
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = mid + half * rule.nodes[i];
    rule.weights[i] *= half;
  }
  return rule;
}

Rule1D gauss_hermite(int n) {
  if (n < 1) fail(ErrorKind::InvalidConfig, "Gauss-Hermite needs at least one node");
  // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite polynomials.
  MatX jacobi = MatX::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    jacobi(k, k - 1) = std::sqrt(static_cast<double>(k));
    jacobi(k - 1, k) = jacobi(k, k - 1);
  }
  Eigen::SelfAdjointEigenSolver<MatX> eig(jacobi);
  Rule1D rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = eig.eigenvalues()(i);
    const double v = eig.eigenvectors()(0, i);
    rule.weights[i] = v * v;
  }
  // symmetrize against round-off
  for (int i = 0; i < n / 2; ++i) {
    const double x = 0.5 * (rule.nodes[n - 1 - i] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[i] + rule.weights[n - 1 - i]);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  double total = 0.0;
  for (double w : rule.weights) total += w;
  for (double& w : rule.weights) w /= total;
  return rule;
}

TensorHermite::TensorHermite(int dim_, int per_axis_)
    : TensorHermite(dim_, per_axis_ >= 1 ? gauss_hermite(per_axis_) : Rule1D{}) {}

TensorHermite::TensorHermite(int dim_, const Rule1D& base) : dim(dim_) {
  per_axis = static_cast<int>(base.size());
  if (dim < 1 || per_axis < 1) fail(ErrorKind::InvalidConfig, "invalid tensor Hermite rule");
  std::size_t total = 1;
  for (int i = 0; i < dim; ++i) total *= static_cast<std::size_t>(per_axis);
  points.resize(dim, static_cast<Eigen::Index>(total));
  weights.resize(total);
  for (std::size_t k = 0; k < total; ++k) {
    std::size_t rem = k;
    double w = 1.0;
    for (int i = 0; i < dim; ++i) {
      const std::size_t idx = rem % per_axis;
      rem /= per_axis;
      points(i, static_cast<Eigen::Index>(k)) = base.nodes[idx];
      w *= base.weights[idx];
    }
    weights[k] = w;
  }
}

Rule1D normal_composite(int panels, int nodes_per_panel, double half_width) {
  if (panels < 1 || nodes_per_panel < 1 || !(half_width > 0.0)) {
    fail(ErrorKind::InvalidConfig, "composite normal rule needs panels, nodes >= 1");
  }
  Rule1D out;
  const double h = 2.0 * half_width / panels;
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  for (int p = 0; p < panels; ++p) {
    const Rule1D g = gauss_legendre(nodes_per_panel, -half_width + p * h, -half_width + (p + 1) * h);
    for (std::size_t i = 0; i < g.size(); ++i) {
      out.nodes.push_back(g.nodes[i]);
      out.weights.push_back(g.weights[i] * norm * std::exp(-0.5 * g.nodes[i] * g.nodes[i]));
    }
  }
  return out;
}

Rule1D graded_two_sided(double a, double b, int nodes_per_half, double p_left, double p_right) {
  if (!(b > a)) fail(ErrorKind::EmptyInterval, "graded rule needs a < b");
  if (nodes_per_half < 1 || p_left < 1.0 || p_right < 1.0) {
    fail(ErrorKind::InvalidConfig, "graded rule needs >= 1 node and exponents >= 1");
  }
  const Rule1D& ref = cached_legendre(nodes_per_half);
  const double half = 0.5 * (b - a);
  // nodes within a few ulp of an endpoint carry negligible weight and would make
  // the covariance quadrature on [a, r] degenerate; they are dropped
  const double guard =
      16.0 * std::numeric_limits<double>::epsilon() * std::max({1.0, std::abs(a), std::abs(b)});
  Rule1D rule;
  rule.nodes.reserve(2 * nodes_per_half);
  rule.weights.reserve(2 * nodes_per_half);
  for (int k = 0; k < nodes_per_half; ++k) {
    const double u = 0.5 * (ref.nodes[k] + 1.0);
    const double w = 0.5 * ref.weights[k];
    const double r = a + half * std::pow(u, p_left);
    if (!(r - a > guard)) continue;
    rule.nodes.push_back(r);
    rule.weights.push_back(half * p_left * std::pow(u, p_left - 1.0) * w);
  }
  for (int k = nodes_per_half - 1; k >= 0; --k) {
    const double u = 0.5 * (ref.nodes[k] + 1.0);
    const double w = 0.5 * ref.weights[k];
    const double r = b - half * std::pow(u, p_right);
    if (!(b - r > guard)) continue;
    rule.nodes.push_back(r);
    rule.weights.push_back(half * p_right * std::pow(u, p_right - 1.0) * w);
  }
  return rule;
}

Rule1D panelled_gauss_legendre(double a, double b, int nodes_per_panel,
                               std::span<const double> breakpoints) {
  std::vector<double> cuts{a};
  for (double c : breakpoints) {
    if (c > a && c < b) cuts.push_back(c);
  }
  std::sort(cuts.begin() + 1, cuts.end());
  cuts.push_back(b);
  const Rule1D& ref = cached_legendre(nodes_per_panel);
  Rule1D rule;
  for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
    const double half = 0.5 * (cuts[p + 1] - cuts[p]);
    const double mid = 0.5 * (cuts[p + 1] + cuts[p]);
    for (int k = 0; k < nodes_per_panel; ++k) {
      rule.nodes.push_back(mid + half * ref.nodes[k]);
      rule.weights.push_back(half * ref.weights[k]);
    }
  }
  return rule;
}

}  // namespace hypokin
