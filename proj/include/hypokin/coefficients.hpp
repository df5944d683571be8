#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hypokin/types.hpp"

namespace hypokin {

/// Coefficients a_ij, a_i, a of the operator: measurable in time, Hoelder in space.
struct CoefficientField {
  std::string family = "constant";
  int d = 1;
  std::function<Mat(double, const Vec&)> a2;     // symmetric d x d
  std::function<Vec(double, const Vec&)> a1;     // d-vector
  std::function<double(double, const Vec&)> a0;  // scalar
  double mu = 1.0;         // ellipticity constant
  double alpha_bar = 1.0;  // spatial Hoelder exponent
  double T = 1.0;

  /// Time discontinuities of the coefficients; quadrature panels align with them.
  std::vector<double> breakpoints;
  /// Gauss-Legendre nodes per panel in the frozen-covariance time integral.
  int time_nodes = 32;

  bool space_homogeneous = false;  // a2 independent of x
  bool zero_lower_order = false;   // a1 == 0 and a0 == 0

  /// The Levi kernel vanishes identically, so p equals the parametrix.
  bool levi_trivial() const { return space_homogeneous && zero_lower_order; }
};

/// a2 = sigma2 * I_d (or `matrix` when given), a1 = drift, a0 = rate.
CoefficientField constant_coefficients(int d, double sigma2, double T, Vec drift = {},
                                       double rate = 0.0);
CoefficientField constant_coefficients(const Mat& a2, double T);

/// a2 = (1 + eps * sin(x_k)) I_d with k the sine coordinate (0-based).
CoefficientField space_sinusoidal(int d, double eps, int coordinate, double T,
                                  double alpha_bar = 1.0 / 3.0, Vec drift = {}, double rate = 0.0);

/// a2 = levels[k] * I_d on [breaks[k-1], breaks[k]); discontinuous in t.
CoefficientField time_piecewise(int d, std::vector<double> breaks, std::vector<double> levels,
                                double T, Vec drift = {}, double rate = 0.0);

/// Builds a named family from a config object, e.g.
/// {"family": "space_sinusoidal", "eps": 0.3, "coordinate": 1}.
CoefficientField make_coefficients(const nlohmann::json& cfg, int d, double T);

/// Largest sampled violation of mu^{-1}|eta|^2 <= <a2 eta, eta> <= mu |eta|^2
/// and of symmetry; zero means the sample is consistent with (H.1).
struct EllipticityReport {
  double min_eigen = 0.0;
  double max_eigen = 0.0;
  double asymmetry = 0.0;
  bool ok = false;
};
EllipticityReport check_ellipticity(const CoefficientField& cf, int N, int samples,
                                    unsigned seed = 7);

}  // namespace hypokin
