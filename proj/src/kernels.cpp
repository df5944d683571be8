#include "hypokin/kernels.hpp"

#include <cmath>
#include <numbers>

#include "hypokin/errors.hpp"
#include "hypokin/quadrature.hpp"

namespace hypokin {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

bool all_finite(const Mat& m) { return m.allFinite(); }

}  // namespace

CovarianceMatrix CovarianceMatrix::factor(const Mat& C) {
  const int n = static_cast<int>(C.rows());
  if (C.cols() != n || n == 0) fail(ErrorKind::Structural, "covariance must be square");
  if (!all_finite(C)) fail(ErrorKind::SingularCovariance, "covariance has non-finite entries");

  const Mat sym = 0.5 * (C + C.transpose());
  Vec scale(n);
  for (int i = 0; i < n; ++i) {
    if (!(sym(i, i) > 0.0)) fail(ErrorKind::SingularCovariance, "non-positive variance");
    scale(i) = 1.0 / std::sqrt(sym(i, i));
  }
  Mat scaled = scale.asDiagonal() * sym * scale.asDiagonal();
  const double floor = 1e-13 * scaled.trace();

  Mat lower;
  Eigen::LLT<Mat> llt(scaled);
  bool fast = llt.info() == Eigen::Success;
  if (fast) {
    lower = llt.matrixL();
    const Mat inv = lower.triangularView<Eigen::Lower>().solve(Mat::Identity(n, n));
    // lambda_min >= 1 / ||L^{-1}||_F^2
    fast = 1.0 / inv.squaredNorm() >= floor;
  }
  if (!fast) {
    Eigen::SelfAdjointEigenSolver<Mat> eig(scaled);
    Vec lambda = eig.eigenvalues();
    const double largest = lambda.maxCoeff();
    for (int i = 0; i < n; ++i) {
      if (lambda(i) < floor) {
        if (floor - lambda(i) > 1e-6 * largest) {
          fail(ErrorKind::SingularCovariance,
               "eigenvalue " + std::to_string(lambda(i)) + " below floor");
        }
        lambda(i) = floor;
      }
    }
    scaled = eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
    Eigen::LLT<Mat> retry(scaled);
    if (retry.info() != Eigen::Success) fail(ErrorKind::SingularCovariance, "factorization failed");
    lower = retry.matrixL();
  }

  CovarianceMatrix out;
  out.C = sym;
  out.chol = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) out.chol(i, j) = lower(i, j) / scale(i);
  }
  out.logdet = 0.0;
  for (int i = 0; i < n; ++i) out.logdet += 2.0 * std::log(out.chol(i, i));
  return out;
}

Vec CovarianceMatrix::whiten(const Vec& z) const {
  return chol.triangularView<Eigen::Lower>().solve(z);
}

Vec CovarianceMatrix::solve(const Vec& z) const {
  const Vec u = whiten(z);
  return chol.transpose().triangularView<Eigen::Upper>().solve(u);
}

KernelEvaluation KernelEvaluation::zero(int d, int order) {
  KernelEvaluation k;
  if (order >= 1) k.grad_d = Vec::Zero(d);
  if (order >= 2) k.hess_d = Mat::Zero(d, d);
  return k;
}

KernelEvaluation& KernelEvaluation::operator+=(const KernelEvaluation& o) {
  value += o.value;
  if (grad_d.size() > 0 && o.grad_d.size() == grad_d.size()) grad_d += o.grad_d;
  if (hess_d.size() > 0 && o.hess_d.size() == hess_d.size()) hess_d += o.hess_d;
  return *this;
}

KernelEvaluation& KernelEvaluation::operator*=(double s) {
  value *= s;
  if (grad_d.size() > 0) grad_d *= s;
  if (hess_d.size() > 0) hess_d *= s;
  return *this;
}

KernelEvaluation operator+(KernelEvaluation a, const KernelEvaluation& b) { return a += b; }
KernelEvaluation operator*(double s, KernelEvaluation a) { return a *= s; }

double log_gaussian_density(const CovarianceMatrix& C, const Vec& z) {
  const Vec u = C.whiten(z);
  return -0.5 * (C.dim() * kLog2Pi + C.logdet + u.squaredNorm());
}

double gaussian_density(const CovarianceMatrix& C, const Vec& z) {
  return std::exp(log_gaussian_density(C, z));
}

double GaussianKernel::log_value(const Vec& x, const Vec& y) const {
  return log_gaussian_density(cov, Vec(y - M * x));
}

KernelEvaluation GaussianKernel::eval(const Vec& x, const Vec& y, int order) const {
  return eval_offset(y - M * x, order);
}

KernelEvaluation GaussianKernel::eval_offset(const Vec& z, int order) const {
  const Vec u = cov.whiten(z);
  KernelEvaluation out;
  out.value = std::exp(-0.5 * (cov.dim() * kLog2Pi + cov.logdet + u.squaredNorm()));
  if (order < 1) return out;

  const Vec w = cov.chol.transpose().triangularView<Eigen::Upper>().solve(u);
  const Vec g = (M.transpose() * w).head(d);
  out.grad_d = out.value * g;
  if (order < 2) return out;

  const Mat P = cov.chol.triangularView<Eigen::Lower>().solve(M.leftCols(d));
  const Mat K = P.transpose() * P;
  out.hess_d.resize(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      const double h = out.value * (g(i) * g(j) - K(i, j));
      out.hess_d(i, j) = h;
      out.hess_d(j, i) = h;
    }
  }
  return out;
}

Mat frozen_covariance_matrix(const CoefficientField& cf, const DriftStructure& S, double tau,
                             const Vec& v, double t, double s) {
  if (!(s > t)) fail(ErrorKind::EmptyInterval, "frozen covariance needs t < s");
  const int d = S.d;
  const Rule1D rule = panelled_gauss_legendre(t, s, cf.time_nodes, cf.breakpoints);
  Mat C = Mat::Zero(S.N, S.N);
  for (std::size_t k = 0; k < rule.size(); ++k) {
    const double r = rule.nodes[k];
    const Mat E = S.exp(s - r);
    const Vec flow = S.exp(r - tau) * v;
    const Mat A = cf.a2(r, flow);
    const Mat G = E.leftCols(d);
    C.noalias() += rule.weights[k] * (G * A * G.transpose());
  }
  return C;
}

CovarianceMatrix frozen_covariance(const CoefficientField& cf, const DriftStructure& S, double tau,
                                   const Vec& v, double t, double s) {
  return CovarianceMatrix::factor(frozen_covariance_matrix(cf, S, tau, v, t, s));
}

Mat reference_covariance(const DriftStructure& S, double h) {
  Mat C = Mat::Zero(S.N, S.N);
  if (!(h > 0.0)) return C;
  const Rule1D rule = gauss_legendre(32, 0.0, h);
  for (std::size_t k = 0; k < rule.size(); ++k) {
    const Mat G = S.exp(rule.nodes[k]).leftCols(S.d);
    C.noalias() += rule.weights[k] * (G * G.transpose());
  }
  return C;
}

GaussianKernel parametrix_kernel(const CoefficientField& cf, const DriftStructure& S, double t,
                                 double s, const Vec& y) {
  GaussianKernel k;
  k.d = S.d;
  k.M = S.exp(s - t);
  k.cov = frozen_covariance(cf, S, s, y, t, s);
  return k;
}

KernelEvaluation parametrix(const CoefficientField& cf, const DriftStructure& S, double t,
                            const Vec& x, double s, const Vec& y, int order) {
  return parametrix_kernel(cf, S, t, s, y).eval(x, y, order);
}

double reference_gaussian(double delta, const DriftStructure& S, double t, const Vec& x, double s,
                          const Vec& y) {
  if (!(delta > 0.0)) fail(ErrorKind::InvalidScale, "delta must be positive");
  if (!(s > t)) fail(ErrorKind::EmptyInterval, "reference Gaussian needs t < s");
  const CovarianceMatrix C = CovarianceMatrix::factor(delta * reference_covariance(S, s - t));
  return gaussian_density(C, Vec(y - S.exp(s - t) * x));
}

double levi_first_kernel(const CoefficientField& cf, const DriftStructure& S, double t,
                         const Vec& x, double s, const Vec& y, const KernelEvaluation& z) {
  if (cf.levi_trivial()) return 0.0;
  double out = 0.0;
  if (!cf.space_homogeneous) {
    const Vec flow = S.exp(t - s) * y;
    const Mat diff = cf.a2(t, x) - cf.a2(t, flow);
    out += 0.5 * diff.cwiseProduct(z.hess_d).sum();
  }
  if (!cf.zero_lower_order) {
    out += cf.a1(t, x).dot(z.grad_d) + cf.a0(t, x) * z.value;
  }
  return out;
}

double levi_first_kernel(const CoefficientField& cf, const DriftStructure& S, double t,
                         const Vec& x, double s, const Vec& y) {
  if (cf.levi_trivial()) {
    if (!(s > t)) fail(ErrorKind::EmptyInterval, "Levi kernel needs t < s");
    return 0.0;
  }
  return levi_first_kernel(cf, S, t, x, s, y, parametrix(cf, S, t, x, s, y, 2));
}

}  // namespace hypokin
