#pragma once

#include <functional>

#include <json.hpp>

#include "hypokin/coefficients.hpp"
#include "hypokin/kernels.hpp"
#include "hypokin/quadrature.hpp"
#include "hypokin/structure.hpp"

namespace hypokin {

struct LeviConfig {
  int depth = 2;          // K, number of Levi iterates kept
  int time_nodes = 8;     // Gauss-Legendre nodes per graded half-interval
  int space_nodes = 9;    // Gauss-Hermite nodes per axis
  double grading = 0.0;   // endpoint grading exponent; <= 0 selects 2 / alpha_bar

  void validate() const;
  double grading_exponent(const CoefficientField& cf) const;
};

void to_json(nlohmann::json& j, const LeviConfig& c);
void from_json(const nlohmann::json& j, LeviConfig& c);

using SpaceFn = std::function<double(const Vec&)>;
using SpaceTimeFn = std::function<double(double, const Vec&)>;

/// Gaussian quadrature nodes z_k with log weights log w_k - log rho(z_k), where rho
/// is the reference density the nodes were drawn from:
///   int F(z) dz ~ sum_k exp(log_weight[k]) F(z_k).
struct NodeSet {
  std::vector<Vec> points;
  std::vector<Vec> offsets;  // points minus the flow image of the source point
  std::vector<double> log_weight;
  std::size_t size() const { return points.size(); }
};

/// Parametrix expansion p = Z + Phi with Phi = Z (*) (H + H(*)H + ...), H = L Z and
/// (*) the space-time convolution int_t^s int . (t,x;r,z) . (r,z;s,y) dz dr.
class LeviExpansion {
 public:
  LeviExpansion(const CoefficientField& cf, const DriftStructure& S, LeviConfig cfg = {});

  const CoefficientField& coefficients() const { return cf_; }
  const DriftStructure& structure() const { return S_; }
  const LeviConfig& config() const { return cfg_; }
  bool trivial() const { return cf_.levi_trivial(); }

  /// H(t,x;s,y) = (L Z)(t,x;s,y)
  double kernel(double t, const Vec& x, double s, const Vec& y) const;

  /// Phi_K(t,x;s,y) with x-derivatives taken inside the convolution.
  KernelEvaluation phi(double t, const Vec& x, double s, const Vec& y, int order) const;

  /// Z + Phi_K
  KernelEvaluation fundamental(double t, const Vec& x, double s, const Vec& y, int order) const;

  /// int Z(t,x;s,y) g(y) dy
  KernelEvaluation parametrix_against(double t, const Vec& x, double s, const SpaceFn& g,
                                      int order) const;

  /// int H(r,z;s,y) g(y) dy
  double kernel_against(double r, const Vec& z, double s, const SpaceFn& g) const;

  /// int_t^T int Z(t,x;r,z) psi_K(r,z) dz dr where psi_1 = source and
  /// psi_{k+1}(r,z) = source(r,z) + int_r^T int H(r,z;r',z') psi_k(r',z') dz' dr'.
  /// `p_right` grades the time nodes toward T.
  KernelEvaluation remainder_potential(double t, const Vec& x, double T, const SpaceTimeFn& source,
                                       int order, double p_right) const;

  /// Nodes for int Z(t,x;s,z) F(z) dz, whitened by Z frozen at its mean.
  /// `rule` overrides the configured tensor rule.
  NodeSet forward_nodes(double t, const Vec& x, double s,
                        const TensorHermite* rule = nullptr) const;

  /// Nodes for int Z(t,x;r,z) G(r,z;s,y) dz, whitened by the product of the forward
  /// Gaussian from (t,x) and the backward Gaussian of Z(r,.;s,y).
  NodeSet bridge_nodes(double t, const Vec& x, double r, double s, const Vec& y) const;

  /// Parametrix kernel Z(t,.;s,y), reusing `shared` when a2 is space homogeneous.
  GaussianKernel parametrix_to(double t, double s, const Vec& y,
                               const GaussianKernel* shared = nullptr) const;

 private:
  double phi_density(int level, double r, const Vec& z, double s, const Vec& y) const;
  double iterate(int level, double r, const Vec& z, double T, const SpaceTimeFn& source,
                 double p_right) const;

  CoefficientField cf_;
  DriftStructure S_;
  LeviConfig cfg_;
  TensorHermite rule_;
  double grading_;
};

KernelEvaluation phi_eval(const CoefficientField& cf, const DriftStructure& S,
                          const LeviConfig& cfg, double t, const Vec& x, double s, const Vec& y,
                          int order = 0);

KernelEvaluation fundamental_solution(const CoefficientField& cf, const DriftStructure& S,
                                      const LeviConfig& cfg, double t, const Vec& x, double s,
                                      const Vec& y, int order = 0);

}  // namespace hypokin
