#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hypokin/cauchy.hpp"
#include "hypokin/coefficients.hpp"
#include "hypokin/structure.hpp"

namespace hypokin {

/// Philox4x32-10 counter-based generator.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Standard normals for (seed, path, step): deterministic in these keys only.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : seed_(seed) {}
  /// Fills out with independent N(0,1) draws for the given path and step.
  void fill(std::uint64_t path, std::uint32_t step, double* out, int n) const;

 private:
  std::uint64_t seed_;
};

enum class SdeScheme { EulerMaruyama, ExactGaussian };

struct SdeConfig {
  long long n_paths = 100000;
  int n_steps = 400;
  SdeScheme scheme = SdeScheme::EulerMaruyama;
  std::uint64_t seed = 12345;
  bool antithetic = true;

  void validate() const;
};
void to_json(nlohmann::json& j, const SdeConfig& c);
void from_json(const nlohmann::json& j, SdeConfig& c);

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  long long n_paths = 0;  // independent samples (antithetic pairs count once)
};
void to_json(nlohmann::json& j, const McEstimate& e);

/// Terminal states (columns) and optional path functionals.
struct PathBatch {
  MatX terminal;                // N x n_paths
  std::vector<double> discount;  // exp(int_t0^T a0)
  std::vector<double> source;    // int_t0^T exp(int_t0^tau a0) f(tau, X_tau) dtau
};

/// Euler-Maruyama for dX = (B X + E a1) dt + E sigma dW with sigma the principal root
/// of a2; `f` (optional) is accumulated with the left-endpoint rule.
PathBatch simulate_paths(const CoefficientField& cf, const DriftStructure& S, const SdeConfig& cfg,
                         double t0, const Vec& x0, double T,
                         const std::function<double(double, const Vec&)>& f = {});

/// e^{(T-t0)B} x0 + chol(C(T-t0)) xi for constant a2.
MatX exact_sample_constant(const DriftStructure& S, const Mat& a2, const SdeConfig& cfg, double t0,
                           const Vec& x0, double T);

/// Mean of exp(int a0) g(X_T) - int exp(int a0) f(tau, X_tau) dtau over paths.
McEstimate feynman_kac_estimate(const CauchyProblem& pb, const SdeConfig& cfg, double t0,
                                const Vec& x0);

/// Gaussian kernel density estimate whitened by chol(C) with Scott's bandwidth.
std::vector<double> kde_whitened(const MatX& samples, const Mat& C, const std::vector<Vec>& probes);

/// One row per path with columns x1..xN.
void write_paths_csv(const std::string& path, const MatX& terminal);

}  // namespace hypokin
