#pragma once

#include "hypokin/coefficients.hpp"
#include "hypokin/structure.hpp"
#include "hypokin/types.hpp"

namespace hypokin {

/// Symmetric positive-definite covariance with its lower Cholesky factor.
struct CovarianceMatrix {
  Mat C;
  Mat chol;
  double logdet = 0.0;

  /// Symmetrizes, floors eigenvalues at 1e-13 * trace of the Jacobi-scaled
  /// matrix and factors it; throws SingularCovariance when the floor would move
  /// an eigenvalue by more than 1e-6 of the largest one.
  static CovarianceMatrix factor(const Mat& C);

  int dim() const { return static_cast<int>(C.rows()); }

  /// L^{-1} z
  Vec whiten(const Vec& z) const;
  /// C^{-1} z
  Vec solve(const Vec& z) const;
};

/// Point value of a kernel with its spatial derivatives in the first d directions.
struct KernelEvaluation {
  double value = 0.0;
  Vec grad_d;  // size d when order >= 1, else empty
  Mat hess_d;  // d x d when order >= 2, else empty

  static KernelEvaluation zero(int d, int order);
  int order() const { return hess_d.size() > 0 ? 2 : (grad_d.size() > 0 ? 1 : 0); }

  KernelEvaluation& operator+=(const KernelEvaluation& o);
  KernelEvaluation& operator*=(double s);
};
KernelEvaluation operator+(KernelEvaluation a, const KernelEvaluation& b);
KernelEvaluation operator*(double s, KernelEvaluation a);

/// log Gamma(C, z) = -N/2 log(2 pi) - logdet/2 - <C^{-1} z, z>/2
double log_gaussian_density(const CovarianceMatrix& C, const Vec& z);

/// (2 pi)^{-N/2} (det C)^{-1/2} exp(-<C^{-1} z, z>/2), evaluated in log space.
double gaussian_density(const CovarianceMatrix& C, const Vec& z);

/// The Gaussian kernel Gamma(cov, y - M x) as a function of (x, y).
struct GaussianKernel {
  Mat M;  // e^{(s-t)B}
  CovarianceMatrix cov;
  int d = 1;

  Vec mean(const Vec& x) const { return M * x; }
  double log_value(const Vec& x, const Vec& y) const;
  /// Value and x-derivatives up to `order` in the first d coordinates.
  KernelEvaluation eval(const Vec& x, const Vec& y, int order) const;
  /// Same with z = y - M x supplied directly, avoiding cancellation when z is tiny
  /// compared with M x.
  KernelEvaluation eval_offset(const Vec& z, int order) const;
};

/// int_t^s e^{(s-r)B} A^{(tau,v)}(r) e^{(s-r)B^T} dr with A^{(tau,v)}(r) holding
/// a2(r, e^{(r-tau)B} v) in its top-left block.
CovarianceMatrix frozen_covariance(const CoefficientField& cf, const DriftStructure& S, double tau,
                                   const Vec& v, double t, double s);

/// Unfactored version of frozen_covariance (may be singular as s -> t).
Mat frozen_covariance_matrix(const CoefficientField& cf, const DriftStructure& S, double tau,
                             const Vec& v, double t, double s);

/// C(h) = int_0^h e^{(h-r)B} diag(I_d, 0) e^{(h-r)B^T} dr
Mat reference_covariance(const DriftStructure& S, double h);

/// Parametrix kernel Z(t, x; s, .) frozen at (s, y).
GaussianKernel parametrix_kernel(const CoefficientField& cf, const DriftStructure& S, double t,
                                 double s, const Vec& y);

/// Z(t,x;s,y) and its derivatives in x_1..x_d.
KernelEvaluation parametrix(const CoefficientField& cf, const DriftStructure& S, double t,
                            const Vec& x, double s, const Vec& y, int order);

/// Gamma^delta(t,x;s,y) = Gamma(delta C(s-t), y - e^{(s-t)B} x)
double reference_gaussian(double delta, const DriftStructure& S, double t, const Vec& x, double s,
                          const Vec& y);

/// (L Z)(t,x;s,y) = 1/2 sum (a_ij(t,x) - a_ij(t, e^{(t-s)B} y)) d_ij Z
///                  + sum a_i(t,x) d_i Z + a(t,x) Z
double levi_first_kernel(const CoefficientField& cf, const DriftStructure& S, double t,
                         const Vec& x, double s, const Vec& y);

/// Same, reusing an already evaluated parametrix (order 2) at (t,x;s,y).
double levi_first_kernel(const CoefficientField& cf, const DriftStructure& S, double t,
                         const Vec& x, double s, const Vec& y, const KernelEvaluation& z);

}  // namespace hypokin
