#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hypokin/coefficients.hpp"
#include "hypokin/fit.hpp"
#include "hypokin/kernels.hpp"
#include "hypokin/levi.hpp"
#include "hypokin/structure.hpp"

namespace hypokin {

/// Terminal datum g with its declared anisotropic regularity. Gradient and Hessian
/// (full N-dimensional) are optional; absent ones raise MissingDerivative downstream.
struct TerminalDatum {
  std::string family = "zero";
  double beta = 0.0;
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> grad;
  std::function<Mat(const Vec&)> hess;
  bool is_zero = false;
  bool is_constant = false;
  // factory parameters of the affine (c, offset) and trig (w, amplitude, phase) families
  Vec w;
  double amplitude = 0.0;
  double phase = 0.0;
};

/// Source f(tau, y) = weight(tau) * profile(y) or a general callable.
struct SourceTerm {
  std::string family = "zero";
  double gamma = 0.0;  // declared blow-up (T - tau)^{-gamma}
  std::function<double(double, const Vec&)> value;
  bool is_zero = true;
  // separable sources also expose int_a^b weight and the spatial profile
  std::function<double(double, double)> weight_integral;
  std::function<double(const Vec&)> profile;
};

TerminalDatum zero_datum();
TerminalDatum constant_datum(double c);
TerminalDatum affine_datum(Vec c, double offset = 0.0);
/// amplitude * cos(<w, y> + phase)
TerminalDatum trig_datum(Vec w, double amplitude = 1.0, double phase = 0.0);
/// |sin y_k|^beta for beta <= 1, sin(y_k) |sin y_k|^{beta-1} for beta in (1, 2].
TerminalDatum holder_sine_datum(int N, int coordinate, double beta, double amplitude = 1.0);
/// |y_k|^beta for beta <= 1, y_k |y_k|^{beta-1} for beta in (1, 2]; exactly self-similar,
/// so kernel-scale exponents show without a smooth background.
TerminalDatum power_datum(int N, int coordinate, double beta, double amplitude = 1.0);
/// |y_k|, anisotropically Lipschitz (beta = 1).
TerminalDatum kink_datum(int N, int coordinate);

SourceTerm zero_source();
SourceTerm constant_source(double c);
/// c (T - tau)^{-gamma} profile(y)
SourceTerm weighted_source(double c, double gamma, double T, TerminalDatum profile);

/// {"family": "holder_sine", "beta": 0.5, ...}; smooth families declare beta = 2 + alpha.
TerminalDatum make_datum(const nlohmann::json& cfg, int N, double alpha);
SourceTerm make_source(const nlohmann::json& cfg, int N, double T, double alpha);

struct CauchyProblem {
  TerminalDatum g;
  SourceTerm f;
  double T = 1.0;
  double alpha = 0.25;
  CoefficientField cf;
  DriftStructure S;

  /// 0 < alpha < alpha_bar <= 1, beta in [0, 2 + alpha], gamma in [0, 1).
  void validate() const;
};

struct SolverConfig {
  LeviConfig levi;
  int terminal_nodes = 9;      // Gauss-Hermite per axis for int Z g (per panel if composite)
  std::string terminal_rule = "hermite";  // or "composite" for kinked data
  int terminal_panels = 48;
  int source_time_nodes = 8;   // Gauss-Legendre per graded half in tau
  int source_space_nodes = 9;  // Gauss-Hermite per axis for int Z f

  void validate() const;
};
void to_json(nlohmann::json& j, const SolverConfig& c);
void from_json(const nlohmann::json& j, SolverConfig& c);

enum class PotentialKernel { Z, Phi, P };

/// V_g(t,x) = int p(t,x;T,y) g(y) dy with x-derivatives up to `order`.
KernelEvaluation potential_terminal(const CauchyProblem& pb, const SolverConfig& cfg, double t,
                                    const Vec& x, int order);

/// int_t^T int kernel(t,x;tau,y) f(tau,y) dy dtau
KernelEvaluation potential_source(const CauchyProblem& pb, const SolverConfig& cfg, double t,
                                  const Vec& x, PotentialKernel kernel, int order);

struct SolutionSample {
  double t = 0.0;
  Vec x;
  double u = 0.0;
  Vec grad_d;
  Mat hess_d;
  double Yu = 0.0;  // f - A u
};

/// (A u)(t,x) = 1/2 tr(a2 D^2 u) + <a1, D u> + a0 u from analytic derivatives.
double apply_A(const CoefficientField& cf, double t, const Vec& x, double u, const Vec& grad_d,
               const Mat& hess_d);

/// u = V_g - V_{Z,f} - V_{Phi,f}. `order` 2 fills derivatives and Yu.
std::vector<SolutionSample> solve_cauchy(const CauchyProblem& pb, const SolverConfig& cfg,
                                         const std::vector<std::pair<double, Vec>>& points,
                                         int order = 2);

/// dt_probe default: (T - t) / 1000 clamped to [1e-6, 1e-3].
double default_dt_probe(double t, double T);

/// r = [u(t+dt, e^{dt B} x) - u(t,x)] / dt + (A u)(t,x) - f(t,x); nullopt dt uses the default.
std::vector<double> residual_check(const CauchyProblem& pb, const SolverConfig& cfg,
                                   const std::vector<std::pair<double, Vec>>& points,
                                   std::optional<double> dt_probe = std::nullopt);

struct RegYResult {
  std::vector<std::pair<double, double>> pairs;  // (T - t, sup_x |u(t, e^{(t-T)B} x) - g(x)|)
  PowerFit fit;
  bool degenerate = false;  // increments at the quadrature noise floor
};

/// Fits the decay of u along the flow lines ending at (T, x).
RegYResult boundary_regY_check(const CauchyProblem& pb, const SolverConfig& cfg,
                               const std::vector<Vec>& xs, const std::vector<double>& ts);

/// Columns t, x_1..x_N, u, du_1..du_d, d2u_11.., Yu, residual.
void write_solution_csv(const std::string& path, const std::vector<SolutionSample>& samples,
                        const std::vector<double>& residuals);

}  // namespace hypokin
