#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <json.hpp>

#include "hypokin/structure.hpp"
#include "hypokin/types.hpp"

namespace hypokin {

/// Deterministic pair sampler: Halton base points (the box centre first), axis
/// and seeded random directions, and a dyadic scale ladder h_k = h0 2^{-k}.
struct SamplerSpec {
  VecX box_lo;  // empty means [-1, 1]^N
  VecX box_hi;
  double t_lo = 0.0;  // time window for time-dependent fields
  double t_hi = 1.0;
  int base_points = 32;
  int directions = 4;  // random directions on top of the axis ones
  int levels = 13;
  double h0 = 1.0;
  unsigned seed = 1;

  void validate(int N) const;
  double scale(int k) const;
  /// Base point i of the spatial Halton sequence (i = 0 is the box centre).
  Vec base_point(int i, int N) const;
  /// Time nodes: Halton in (t_lo, t_hi) plus dyadic ladders toward both ends.
  std::vector<double> times() const;
  /// Unit directions in the given coordinates: axes first, then seeded random ones.
  std::vector<Vec> directions_in(const std::vector<int>& coords, int N) const;
};

void to_json(nlohmann::json& j, const SamplerSpec& s);
void from_json(const nlohmann::json& j, SamplerSpec& s);

/// A field on (0,t) x R^N with its derivative chain in the first d directions.
/// Level k holds the k-th derivative flattened (1, d, d*d entries); an empty level
/// marks a derivative the caller did not supply.
struct SampledField {
  std::vector<std::function<VecX(double, const Vec&)>> levels;
  std::function<double(double, const Vec&)> Yf;

  static SampledField scalar(std::function<double(double, const Vec&)> f,
                             std::function<Vec(double, const Vec&)> grad_d = {},
                             std::function<Mat(double, const Vec&)> hess_d = {},
                             std::function<double(double, const Vec&)> Yf = {});
  /// Time independent field g(x).
  static SampledField spatial(std::function<double(const Vec&)> g,
                              std::function<Vec(const Vec&)> grad_d = {},
                              std::function<Mat(const Vec&)> hess_d = {});
};

struct NormComponents {
  double sup = 0.0;        // ||f||_inf
  double gradient = 0.0;   // ||grad_d f|| at order alpha - 1
  double increment = 0.0;  // spatial increment quotient
  double lie = 0.0;        // C^alpha_{Y,t} quotient
  double yf = 0.0;         // ||Yf|| at order alpha - 2
};

struct NormEstimate {
  double value = 0.0;
  long long n_pairs = 0;
  std::vector<double> argmax_a;  // (t, x) of the pair achieving the top-level quotient
  std::vector<double> argmax_b;
  NormComponents components;
};

void to_json(nlohmann::json& j, const NormEstimate& e);
void from_json(const nlohmann::json& j, NormEstimate& e);

/// ||g||_{C^alpha_B} per the recursive definition; alpha in (0, 3].
NormEstimate anisotropic_norm_est(const SampledField& g, double alpha, const DriftStructure& S,
                                  const SamplerSpec& sampler);

/// sup |F(s, e^{(s-tau)B} x) - F(tau, x)| / |s - tau|^{alpha/2}; alpha in (0, 2].
NormEstimate lie_seminorm_est(const SampledField& F, double alpha, const DriftStructure& S,
                              const SamplerSpec& sampler);

/// Intrinsic norm: L^inf(C^alpha_B) part, the gradient recursion, and either the
/// Lie quotient (alpha <= 2) or ||Yf||_{L^inf(C^{alpha-2})} (alpha in (2, 3]).
NormEstimate intrinsic_norm_est(const SampledField& F, double alpha, const DriftStructure& S,
                                const SamplerSpec& sampler);

/// sup_s (T - s)^gamma ||F(s, .)||_{C^alpha_B}
double weighted_sup_norm(const SampledField& F, double gamma, double alpha, double T,
                         const DriftStructure& S, const SamplerSpec& sampler);

/// f(s,y) + <z, grad_d f> + z^T hess_d f z / 2 over the first d coordinates.
double taylor_t2(const SampledField& F, double s, const Vec& y, const Vec& z);

struct TaylorCheck {
  std::vector<double> scales;      // h_k
  std::vector<double> level_sup;   // sup of the ratio over samples at scale h_k
  std::vector<double> cumulative;  // sup over all scales >= h_k
  double worst_ratio = 0.0;
  double exponent = 0.0;  // fitted slope of log level_sup against log h
  bool bounded = false;   // max(cumulative) < 2 median(cumulative)
  bool diverges = false;  // max(cumulative) >= 10 min(cumulative)
};

/// |F(tau,x) - T2 F(s,y; x - e^{(tau-s)B} y)| / (|tau - s| + |x - e^{(tau-s)B} y|_B^{2+alpha})
TaylorCheck taylor_remainder_check(const SampledField& F, double alpha, const DriftStructure& S,
                                   const SamplerSpec& sampler);

}  // namespace hypokin
