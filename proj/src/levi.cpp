#include "hypokin/levi.hpp"

#include <cmath>

#include "hypokin/errors.hpp"
#include "hypokin/parallel.hpp"

namespace hypokin {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void check_finite(double v, double r, const Vec& z, const char* what) {
  if (std::isfinite(v)) return;
  std::vector<double> where{r};
  for (int i = 0; i < z.size(); ++i) where.push_back(z(i));
  throw NumericalDivergence(std::string("non-finite ") + what, std::move(where));
}

KernelEvaluation sum_in_order(const std::vector<KernelEvaluation>& parts, int d, int order) {
  if (parts.empty()) return KernelEvaluation::zero(d, order);
  return pairwise_sum(std::span<const KernelEvaluation>(parts));
}

}  // namespace

void LeviConfig::validate() const {
  if (depth < 0) fail(ErrorKind::InvalidConfig, "Levi depth must be >= 0");
  if (time_nodes < 2 || space_nodes < 2) {
    fail(ErrorKind::InvalidConfig, "Levi node counts must be >= 2");
  }
}

double LeviConfig::grading_exponent(const CoefficientField& cf) const {
  if (grading > 0.0) return std::max(1.0, grading);
  return std::max(1.0, 2.0 / cf.alpha_bar);
}

void to_json(nlohmann::json& j, const LeviConfig& c) {
  j = nlohmann::json{{"depth", c.depth},
                     {"time_nodes", c.time_nodes},
                     {"space_nodes", c.space_nodes},
                     {"grading", c.grading}};
}

void from_json(const nlohmann::json& j, LeviConfig& c) {
  c.depth = j.value("depth", c.depth);
  c.time_nodes = j.value("time_nodes", c.time_nodes);
  c.space_nodes = j.value("space_nodes", c.space_nodes);
  c.grading = j.value("grading", c.grading);
  c.validate();
}

LeviExpansion::LeviExpansion(const CoefficientField& cf, const DriftStructure& S, LeviConfig cfg)
    : cf_(cf), S_(S), cfg_(cfg) {
  cfg_.validate();
  rule_ = TensorHermite(S_.N, cfg_.space_nodes);
  grading_ = cfg_.grading_exponent(cf_);
}

GaussianKernel LeviExpansion::parametrix_to(double t, double s, const Vec& y,
                                            const GaussianKernel* shared) const {
  if (shared != nullptr && cf_.space_homogeneous) return *shared;
  return parametrix_kernel(cf_, S_, t, s, y);
}

NodeSet LeviExpansion::forward_nodes(double t, const Vec& x, double s,
                                     const TensorHermite* rule) const {
  const TensorHermite& tensor = rule != nullptr ? *rule : rule_;
  const Vec m = S_.exp(s - t) * x;
  const CovarianceMatrix cov = frozen_covariance(cf_, S_, s, m, t, s);
  NodeSet out;
  out.points.reserve(tensor.size());
  out.log_weight.reserve(tensor.size());
  for (std::size_t k = 0; k < tensor.size(); ++k) {
    const auto xi = tensor.points.col(static_cast<Eigen::Index>(k));
    out.offsets.push_back(cov.chol * xi);
    out.points.push_back(m + out.offsets.back());
    const double log_rho = -0.5 * (S_.N * kLog2Pi + cov.logdet + xi.squaredNorm());
    out.log_weight.push_back(std::log(tensor.weights[k]) - log_rho);
  }
  return out;
}

NodeSet LeviExpansion::bridge_nodes(double t, const Vec& x, double r, double s,
                                    const Vec& y) const {
  const int n = S_.N;
  const Vec m1 = S_.exp(r - t) * x;
  const CovarianceMatrix c1 = frozen_covariance(cf_, S_, r, m1, t, r);
  const CovarianceMatrix c2 = frozen_covariance(cf_, S_, s, y, r, s);
  const Mat E = S_.exp(s - r);

  const Mat a1 = c1.chol.triangularView<Eigen::Lower>().solve(Mat::Identity(n, n));
  const Mat a2 = c2.chol.triangularView<Eigen::Lower>().solve(E);
  const Mat precision = a1.transpose() * a1 + a2.transpose() * a2;

  const CovarianceMatrix p = CovarianceMatrix::factor(precision);
  // bridge mean relative to m1, solved without forming m_b - m1 by subtraction
  const Vec shift = p.solve(a2.transpose() * c2.whiten(Vec(y - E * m1)));
  const Mat root = p.chol.transpose().triangularView<Eigen::Upper>().solve(Mat::Identity(n, n));

  NodeSet out;
  out.points.reserve(rule_.size());
  out.log_weight.reserve(rule_.size());
  for (std::size_t k = 0; k < rule_.size(); ++k) {
    const auto xi = rule_.points.col(static_cast<Eigen::Index>(k));
    out.offsets.push_back(shift + root * xi);
    out.points.push_back(m1 + out.offsets.back());
    const double log_rho = -0.5 * (n * kLog2Pi - p.logdet + xi.squaredNorm());
    out.log_weight.push_back(std::log(rule_.weights[k]) - log_rho);
  }
  return out;
}

double LeviExpansion::kernel(double t, const Vec& x, double s, const Vec& y) const {
  return levi_first_kernel(cf_, S_, t, x, s, y);
}

double LeviExpansion::phi_density(int level, double r, const Vec& z, double s,
                                  const Vec& y) const {
  const GaussianKernel to_s = parametrix_kernel(cf_, S_, r, s, y);
  double out = levi_first_kernel(cf_, S_, r, z, s, y, to_s.eval(z, y, 2));
  if (level >= 2) {
    const Rule1D times = graded_two_sided(r, s, cfg_.time_nodes, grading_, grading_);
    std::vector<double> parts(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
      const double rp = times.nodes[i];
      const NodeSet nodes = bridge_nodes(r, z, rp, s, y);
      std::vector<double> inner(nodes.size());
      for (std::size_t k = 0; k < nodes.size(); ++k) {
        const Vec& zp = nodes.points[k];
        const KernelEvaluation zk =
            parametrix_kernel(cf_, S_, r, rp, zp).eval_offset(nodes.offsets[k], 2);
        const double h = levi_first_kernel(cf_, S_, r, z, rp, zp, zk);
        inner[k] = h == 0.0 ? 0.0
                            : std::exp(nodes.log_weight[k]) * h *
                                  phi_density(level - 1, rp, zp, s, y);
      }
      parts[i] = times.weights[i] * pairwise_sum(std::span<const double>(inner));
    }
    out += pairwise_sum(std::span<const double>(parts));
  }
  check_finite(out, r, z, "Levi density");
  return out;
}

KernelEvaluation LeviExpansion::phi(double t, const Vec& x, double s, const Vec& y,
                                    int order) const {
  if (!(s > t)) fail(ErrorKind::EmptyInterval, "Phi needs t < s");
  const int d = S_.d;
  if (trivial() || cfg_.depth == 0) return KernelEvaluation::zero(d, order);

  const Rule1D times = graded_two_sided(t, s, cfg_.time_nodes, grading_, grading_);
  const auto parts = parallel_map<KernelEvaluation>(times.size(), [&](std::size_t i) {
    const double r = times.nodes[i];
    const NodeSet nodes = bridge_nodes(t, x, r, s, y);
    std::vector<KernelEvaluation> inner(nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const Vec& z = nodes.points[k];
      const double density = phi_density(cfg_.depth, r, z, s, y);
      KernelEvaluation zk = parametrix_kernel(cf_, S_, t, r, z).eval_offset(nodes.offsets[k], order);
      zk *= std::exp(nodes.log_weight[k]) * density;
      inner[k] = std::move(zk);
    }
    KernelEvaluation acc = sum_in_order(inner, d, order);
    acc *= times.weights[i];
    return acc;
  });
  return sum_in_order(parts, d, order);
}

KernelEvaluation LeviExpansion::fundamental(double t, const Vec& x, double s, const Vec& y,
                                            int order) const {
  KernelEvaluation out = parametrix(cf_, S_, t, x, s, y, order);
  if (!trivial() && cfg_.depth > 0) out += phi(t, x, s, y, order);
  return out;
}

KernelEvaluation LeviExpansion::parametrix_against(double t, const Vec& x, double s,
                                                   const SpaceFn& g, int order) const {
  if (!(s > t)) fail(ErrorKind::EmptyInterval, "potential needs t < s");
  const NodeSet nodes = forward_nodes(t, x, s);
  const GaussianKernel shared = parametrix_kernel(cf_, S_, t, s, S_.exp(s - t) * x);
  std::vector<KernelEvaluation> parts(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const Vec& y = nodes.points[k];
    const double gy = g(y);
    if (!std::isfinite(gy)) {
      fail(ErrorKind::DatumEvaluationError, "datum is not finite at a quadrature node");
    }
    KernelEvaluation zk = parametrix_to(t, s, y, &shared).eval_offset(nodes.offsets[k], order);
    zk *= std::exp(nodes.log_weight[k]) * gy;
    parts[k] = std::move(zk);
  }
  return sum_in_order(parts, S_.d, order);
}

double LeviExpansion::kernel_against(double r, const Vec& z, double s, const SpaceFn& g) const {
  if (trivial()) return 0.0;
  const NodeSet nodes = forward_nodes(r, z, s);
  const GaussianKernel shared = parametrix_kernel(cf_, S_, r, s, S_.exp(s - r) * z);
  std::vector<double> parts(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const Vec& y = nodes.points[k];
    const double gy = g(y);
    if (!std::isfinite(gy)) {
      fail(ErrorKind::DatumEvaluationError, "datum is not finite at a quadrature node");
    }
    const KernelEvaluation zk = parametrix_to(r, s, y, &shared).eval_offset(nodes.offsets[k], 2);
    parts[k] = std::exp(nodes.log_weight[k]) * levi_first_kernel(cf_, S_, r, z, s, y, zk) * gy;
  }
  return pairwise_sum(std::span<const double>(parts));
}

double LeviExpansion::iterate(int level, double r, const Vec& z, double T,
                              const SpaceTimeFn& source, double p_right) const {
  double out = source(r, z);
  if (level >= 2) {
    const Rule1D times = graded_two_sided(r, T, cfg_.time_nodes, grading_, p_right);
    std::vector<double> parts(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
      const double rp = times.nodes[i];
      const NodeSet nodes = forward_nodes(r, z, rp);
      const GaussianKernel shared = parametrix_kernel(cf_, S_, r, rp, S_.exp(rp - r) * z);
      std::vector<double> inner(nodes.size());
      for (std::size_t k = 0; k < nodes.size(); ++k) {
        const Vec& zp = nodes.points[k];
        const KernelEvaluation zk = parametrix_to(r, rp, zp, &shared).eval_offset(nodes.offsets[k], 2);
        const double h = levi_first_kernel(cf_, S_, r, z, rp, zp, zk);
        inner[k] = h == 0.0 ? 0.0
                            : std::exp(nodes.log_weight[k]) * h *
                                  iterate(level - 1, rp, zp, T, source, p_right);
      }
      parts[i] = times.weights[i] * pairwise_sum(std::span<const double>(inner));
    }
    out += pairwise_sum(std::span<const double>(parts));
  }
  check_finite(out, r, z, "Levi iterate");
  return out;
}

KernelEvaluation LeviExpansion::remainder_potential(double t, const Vec& x, double T,
                                                    const SpaceTimeFn& source, int order,
                                                    double p_right) const {
  if (!(T > t)) fail(ErrorKind::EmptyInterval, "potential needs t < T");
  const int d = S_.d;
  if (trivial() || cfg_.depth == 0) return KernelEvaluation::zero(d, order);

  const Rule1D times = graded_two_sided(t, T, cfg_.time_nodes, grading_, std::max(1.0, p_right));
  const auto parts = parallel_map<KernelEvaluation>(times.size(), [&](std::size_t i) {
    const double r = times.nodes[i];
    const NodeSet nodes = forward_nodes(t, x, r);
    const GaussianKernel shared = parametrix_kernel(cf_, S_, t, r, S_.exp(r - t) * x);
    std::vector<KernelEvaluation> inner(nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const Vec& z = nodes.points[k];
      const double psi = iterate(cfg_.depth, r, z, T, source, p_right);
      KernelEvaluation zk = parametrix_to(t, r, z, &shared).eval_offset(nodes.offsets[k], order);
      zk *= std::exp(nodes.log_weight[k]) * psi;
      inner[k] = std::move(zk);
    }
    KernelEvaluation acc = sum_in_order(inner, d, order);
    acc *= times.weights[i];
    return acc;
  });
  return sum_in_order(parts, d, order);
}

KernelEvaluation phi_eval(const CoefficientField& cf, const DriftStructure& S,
                          const LeviConfig& cfg, double t, const Vec& x, double s, const Vec& y,
                          int order) {
  return LeviExpansion(cf, S, cfg).phi(t, x, s, y, order);
}

KernelEvaluation fundamental_solution(const CoefficientField& cf, const DriftStructure& S,
                                      const LeviConfig& cfg, double t, const Vec& x, double s,
                                      const Vec& y, int order) {
  return LeviExpansion(cf, S, cfg).fundamental(t, x, s, y, order);
}

}  // namespace hypokin
