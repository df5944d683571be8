#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <limits>

#include "hypokin/levi.hpp"
#include "hypokin/parallel.hpp"
#include "support.hpp"

using namespace hypokin;
using hypokin::testing::Gen;

namespace {

const DriftStructure& langevin() {
  static const DriftStructure S = block_structure(langevin_drift(1), 1);
  return S;
}

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

// Exact transition density with a constant first-order term a1 = c:
// the mean gains m(h) = int_0^h e^{(h-r)B} (c, 0) dr = (c h, c h^2 / 2).
double drifted_density(double c, double h, const Vec& x, const Vec& y) {
  const DriftStructure& S = langevin();
  Mat C(2, 2);
  C << h, h * h / 2, h * h / 2, h * h * h / 3;
  return gaussian_density(CovarianceMatrix::factor(C), y - S.exp(h) * x - v2(c * h, c * h * h / 2));
}

}  // namespace

TEST_CASE("constant coefficients: Phi vanishes and p equals the parametrix") {
  const CoefficientField cf = constant_coefficients(1, 1.0, 1.0);
  for (int K : {0, 1, 2, 3}) {
    LeviConfig cfg;
    cfg.depth = K;
    const KernelEvaluation phi = phi_eval(cf, langevin(), cfg, 0.1, v2(0.2, 0.1), 0.6, v2(0.3, 0.2), 2);
    CHECK(phi.value == 0.0);
    CHECK(phi.grad_d.norm() == 0.0);
    CHECK(phi.hess_d.norm() == 0.0);
    const KernelEvaluation p = fundamental_solution(cf, langevin(), cfg, 0.1, v2(0.2, 0.1), 0.6, v2(0.3, 0.2), 1);
    const KernelEvaluation z = parametrix(cf, langevin(), 0.1, v2(0.2, 0.1), 0.6, v2(0.3, 0.2), 1);
    CHECK(p.value == z.value);
    CHECK(p.grad_d == z.grad_d);
  }
}

TEST_CASE("constant zero-order term: each iterate adds one Taylor term of exp(a h)") {
  // H = a Z, and Chapman-Kolmogorov makes Z (*) H^{(*)k} = (a h)^{k+1} / (k+1)! Z
  const double a = -0.8;
  const CoefficientField cf = constant_coefficients(1, 1.0, 1.0, {}, a);
  const Vec x = v2(0.2, -0.1);
  const double t = 0.1, s = 0.7, h = s - t;
  const KernelEvaluation z = parametrix(cf, langevin(), t, x, s, v2(0.5, 0.1), 2);
  double partial = 0.0, term = 1.0;
  for (int K = 1; K <= 3; ++K) {
    term *= a * h / K;
    partial += term;
    LeviConfig cfg;
    cfg.depth = K;
    cfg.time_nodes = 3;
    cfg.space_nodes = 4;
    const KernelEvaluation phi = phi_eval(cf, langevin(), cfg, t, x, s, v2(0.5, 0.1), 2);
    INFO("K=" << K);
    CHECK(phi.value == doctest::Approx(partial * z.value).epsilon(1e-8));
    CHECK(phi.grad_d(0) == doctest::Approx(partial * z.grad_d(0)).epsilon(1e-8));
    CHECK(phi.hess_d(0, 0) == doctest::Approx(partial * z.hess_d(0, 0)).epsilon(1e-8));
  }
}

TEST_CASE("constant first-order term: the series converges to the drifted Gaussian") {
  const double c = 0.3;
  const CoefficientField cf = constant_coefficients(1, 1.0, 1.0, Vec::Constant(1, c));
  const Vec x = v2(0.1, 0.3);
  const double t = 0.2, s = 0.45;
  const Vec y = langevin().exp(s - t) * x + v2(0.2, 0.05);
  const double exact = drifted_density(c, s - t, x, y);
  std::vector<double> err;
  for (int K = 0; K <= 2; ++K) {
    LeviConfig cfg;
    cfg.depth = K;
    err.push_back(std::abs(fundamental_solution(cf, langevin(), cfg, t, x, s, y).value - exact));
  }
  MESSAGE("errors by depth: " << err[0] << " " << err[1] << " " << err[2] << " (exact " << exact << ")");
  CHECK(err[1] < err[0]);
  CHECK(err[2] < err[1]);
  CHECK(err[2] < 0.1 * err[0]);
}

TEST_CASE("monotone stabilisation in the depth for sinusoidal coefficients") {
  const CoefficientField cf = space_sinusoidal(1, 0.3, 1, 1.0);
  Gen gen(61);
  for (int n = 0; n < 2; ++n) {
    INFO("case " << n);
    const double t = gen.uniform(0.0, 0.3);
    const double s = t + gen.uniform(0.1, 0.5);
    const Vec x = gen.vec(2, -1, 1);
    const Vec y = langevin().exp(s - t) * x + gen.vec(2, -0.3, 0.3);
    std::vector<double> phi;
    for (int K = 1; K <= 3; ++K) {
      LeviConfig cfg;
      cfg.depth = K;
      cfg.time_nodes = 3;
      cfg.space_nodes = 4;
      phi.push_back(phi_eval(cf, langevin(), cfg, t, x, s, y).value);
    }
    CHECK(std::abs(phi[2] - phi[1]) < 0.5 * std::abs(phi[1] - phi[0]));
  }
}

TEST_CASE("Phi bounds hold with finite fitted constants") {
  const CoefficientField cf = space_sinusoidal(1, 0.3, 1, 1.0);
  const double ab = cf.alpha_bar;
  LeviConfig cfg;
  cfg.depth = 2;
  cfg.time_nodes = 4;
  cfg.space_nodes = 5;
  const LeviExpansion L(cf, langevin(), cfg);
  Gen gen(71);
  double k0 = 0, k1 = 0, k2 = 0;
  for (int n = 0; n < 12; ++n) {
    const double t = gen.uniform(0.0, 0.3);
    const double h = std::pow(10.0, gen.uniform(-2.0, -0.3));
    const Vec x = gen.vec(2, -1, 1);
    const CovarianceMatrix ref = CovarianceMatrix::factor(reference_covariance(langevin(), h));
    const Vec y = langevin().exp(h) * x + ref.chol * gen.vec(2, -2, 2);
    const KernelEvaluation phi = L.phi(t, x, t + h, y, 2);
    const double g = reference_gaussian(2 * cf.mu, langevin(), t, x, t + h, y);
    k0 = std::max(k0, std::abs(phi.value) / (std::pow(h, ab / 2) * g));
    k1 = std::max(k1, phi.grad_d.norm() * std::pow(h, (1 - ab) / 2) / g);
    k2 = std::max(k2, phi.hess_d.norm() * std::pow(h, (2 - ab) / 2) / g);
  }
  MESSAGE("fitted constants: Phi " << k0 << ", dPhi " << k1 << ", d2Phi " << k2);
  CHECK(std::isfinite(k0));
  CHECK(k0 < 10.0);
  CHECK(k1 < 20.0);
  CHECK(k2 < 50.0);
}

TEST_CASE("mass conservation and the Dirac property of p") {
  const CoefficientField cf = space_sinusoidal(1, 0.3, 1, 1.0);
  LeviConfig cfg;
  cfg.depth = 2;
  cfg.time_nodes = 3;
  cfg.space_nodes = 4;
  const LeviExpansion L(cf, langevin(), cfg);
  const Vec x = v2(0.3, -0.4);
  const TensorHermite outer(2, 5);
  // int p(t,x;s,y) g(y) dy through forward nodes in y
  const auto against = [&](double t, double s, const std::function<double(const Vec&)>& g) {
    const NodeSet nodes = L.forward_nodes(t, x, s, &outer);
    double acc = 0.0;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      acc += std::exp(nodes.log_weight[k]) * L.fundamental(t, x, s, nodes.points[k], 0).value *
             g(nodes.points[k]);
    }
    return acc;
  };
  CHECK(std::abs(against(0.2, 0.6, [](const Vec&) { return 1.0; }) - 1.0) < 5e-3);

  const auto g = [](const Vec& y) { return std::cos(y(0)) + 0.5 * std::sin(y(1)); };
  double prev = std::numeric_limits<double>::infinity();
  for (double h : {0.2, 0.05, 0.0125}) {
    const double err = std::abs(against(0.5, 0.5 + h, g) - g(langevin().exp(h) * x));
    INFO("h=" << h << " err=" << err);
    CHECK(err < prev);
    // g is Lipschitz with constant 1.2 while the law spreads like sqrt(h)
    CHECK(err <= 1.2 * std::sqrt(h));
    prev = err;
  }
}

TEST_CASE("Phi is bit-identical for any worker count") {
  const CoefficientField cf = space_sinusoidal(1, 0.3, 1, 1.0);
  LeviConfig cfg;
  cfg.time_nodes = 4;
  cfg.space_nodes = 5;
  set_num_threads(1);
  const KernelEvaluation a = phi_eval(cf, langevin(), cfg, 0.1, v2(0.2, 0.1), 0.5, v2(0.4, 0.2), 2);
  set_num_threads(3);
  const KernelEvaluation b = phi_eval(cf, langevin(), cfg, 0.1, v2(0.2, 0.1), 0.5, v2(0.4, 0.2), 2);
  set_num_threads(1);
  CHECK(a.value == b.value);
  CHECK(a.grad_d == b.grad_d);
  CHECK(a.hess_d == b.hess_d);
}

TEST_CASE("non-finite intermediates raise NumericalDivergence with the node") {
  CoefficientField cf = constant_coefficients(1, 1.0, 1.0);
  cf.family = "broken";
  cf.zero_lower_order = false;
  cf.a1 = [](double, const Vec& z) {
    return Vec::Constant(1, z(0) > 0.4 ? std::numeric_limits<double>::quiet_NaN() : 0.1);
  };
  LeviConfig cfg;
  cfg.time_nodes = 4;
  cfg.space_nodes = 5;
  bool thrown = false;
  try {
    phi_eval(cf, langevin(), cfg, 0.1, v2(0.5, 0.0), 0.6, v2(0.5, 0.2));
  } catch (const NumericalDivergence& e) {
    thrown = true;
    REQUIRE(e.where().size() == 3);
    CHECK(e.where()[1] > 0.4);
  }
  CHECK(thrown);
}

TEST_CASE("Levi config validation") {
  LeviConfig c;
  c.depth = -1;
  CHECK_KIND(c.validate(), ErrorKind::InvalidConfig);
  c.depth = 2;
  c.space_nodes = 1;
  CHECK_KIND(c.validate(), ErrorKind::InvalidConfig);
  c.space_nodes = 5;
  nlohmann::json j = c;
  CHECK(j.get<LeviConfig>().space_nodes == 5);
  CHECK_KIND(phi_eval(constant_coefficients(1, 1.0, 1.0), langevin(), LeviConfig{}, 0.5, v2(0, 0), 0.5,
                      v2(0, 0)),
             ErrorKind::EmptyInterval);
}
