#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hypokin/holder.hpp"
#include "support.hpp"

using namespace hypokin;
using hypokin::testing::Gen;

namespace {

const DriftStructure& langevin() {
  static const DriftStructure S = block_structure(langevin_drift(1), 1);
  return S;
}

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

SamplerSpec sampler(int base = 32, unsigned seed = 1) {
  SamplerSpec s;
  s.base_points = base;
  s.seed = seed;
  return s;
}

Vec zero_grad(const Vec&) { return Vec::Zero(1); }
Mat zero_hess(const Vec&) { return Mat::Zero(1, 1); }

}  // namespace

TEST_CASE("anisotropic norm examples") {
  const SampledField c = SampledField::spatial([](const Vec&) { return -2.5; });
  for (double a : {0.25, 0.5, 1.0}) {
    const NormEstimate e = anisotropic_norm_est(c, a, langevin(), sampler());
    CHECK(e.value == 2.5);
    CHECK(e.components.increment == 0.0);
  }

  // g = x_2 at order 3: the (0, eta) quotient is |eta| / |eta|^{3/3} = 1
  const SampledField x2 = SampledField::spatial([](const Vec& x) { return x(1); }, zero_grad, zero_hess);
  const NormEstimate e3 = anisotropic_norm_est(x2, 3.0, langevin(), sampler());
  CHECK(e3.components.increment == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(e3.components.gradient == 0.0);

  // |x_1|^{1/2} at order 1/2: the seminorm component reaches 1
  const SampledField root = SampledField::spatial([](const Vec& x) { return std::sqrt(std::abs(x(0))); });
  const NormEstimate eh = anisotropic_norm_est(root, 0.5, langevin(), sampler());
  CHECK(eh.components.increment >= 0.95);
  CHECK(eh.components.increment <= 1.0 + 1e-12);
  CHECK(eh.argmax_a.size() == 3);

  CHECK_KIND(anisotropic_norm_est(root, 1.5, langevin(), sampler()), ErrorKind::MissingDerivative);
  CHECK_KIND(anisotropic_norm_est(root, 3.5, langevin(), sampler()), ErrorKind::InvalidConfig);
}

TEST_CASE("anisotropic norm: exact scaling, refinement monotonicity, determinism") {
  const SampledField g = SampledField::spatial(
      [](const Vec& x) { return std::sin(3 * x(0)) + std::cos(x(1)); },
      [](const Vec& x) { return Vec::Constant(1, 3 * std::cos(3 * x(0))); },
      [](const Vec& x) { return Mat::Constant(1, 1, -9 * std::sin(3 * x(0))); });
  const SampledField g4 = SampledField::spatial(
      [&](const Vec& x) { return -4.0 * (std::sin(3 * x(0)) + std::cos(x(1))); },
      [](const Vec& x) { return Vec::Constant(1, -12 * std::cos(3 * x(0))); },
      [](const Vec& x) { return Mat::Constant(1, 1, 36 * std::sin(3 * x(0))); });
  for (double a : {0.3, 1.0, 1.6, 2.4}) {
    INFO("alpha " << a);
    const double base = anisotropic_norm_est(g, a, langevin(), sampler()).value;
    CHECK(anisotropic_norm_est(g4, a, langevin(), sampler()).value == 4.0 * base);
    CHECK(anisotropic_norm_est(g, a, langevin(), sampler(8)).value <= base);
    CHECK(anisotropic_norm_est(g, a, langevin(), sampler(16)).value <= base);
    CHECK(anisotropic_norm_est(g, a, langevin(), sampler()).value == base);
  }
}

TEST_CASE("seminorm vanishes on its kernel") {
  // a function of the degenerate coordinate has no gradient contribution
  const SampledField deg = SampledField::spatial([](const Vec& x) { return std::sin(x(1)); }, zero_grad, zero_hess);
  const NormEstimate e = anisotropic_norm_est(deg, 1.5, langevin(), sampler());
  CHECK(e.components.gradient == 0.0);
  CHECK(e.components.increment > 0.0);
}

TEST_CASE("Lie seminorm examples") {
  const SampledField t = SampledField::scalar([](double s, const Vec&) { return s; });
  CHECK(lie_seminorm_est(t, 2.0, langevin(), sampler()).components.lie == doctest::Approx(1.0).epsilon(1e-12));

  const SampledField root = SampledField::scalar([](double s, const Vec&) { return std::sqrt(s); });
  const double q = lie_seminorm_est(root, 1.0, langevin(), sampler()).components.lie;
  CHECK(q >= 0.9);
  CHECK(q <= 1.0 + 1e-12);

  // |x|^2 is invariant under the rotation flow of an antisymmetric B (d = N)
  MatX rot(2, 2);
  rot << 0, 1, -1, 0;
  const DriftStructure R = block_structure(rot, 2);
  const SampledField radial = SampledField::scalar([](double, const Vec& x) { return x.squaredNorm(); });
  CHECK(lie_seminorm_est(radial, 1.0, R, sampler()).components.lie <= 1e-12);
}

TEST_CASE("intrinsic norm examples") {
  const SampledField c = SampledField::scalar([](double, const Vec&) { return 3.0; },
                                              [](double, const Vec&) { return Vec::Zero(1); },
                                              [](double, const Vec&) { return Mat::Zero(1, 1); },
                                              [](double, const Vec&) { return 0.0; });
  for (double a : {0.5, 1.5, 2.5}) CHECK(intrinsic_norm_est(c, a, langevin(), sampler()).value == 3.0);

  // u = x_2 + x_1 (T - t) solves the Langevin example and has Yu = 0
  const double T = 1.0;
  const SampledField u = SampledField::scalar(
      [=](double s, const Vec& x) { return x(1) + x(0) * (T - s); },
      [=](double s, const Vec&) { return Vec::Constant(1, T - s); },
      [](double, const Vec&) { return Mat::Zero(1, 1); },
      [](double, const Vec&) { return 0.0; });
  const NormEstimate e = intrinsic_norm_est(u, 2.25, langevin(), sampler());
  CHECK(std::isfinite(e.value));
  CHECK(e.components.yf == 0.0);

  SampledField missing = u;
  missing.Yf = nullptr;
  CHECK_KIND(intrinsic_norm_est(missing, 2.25, langevin(), sampler()), ErrorKind::MissingDerivative);
}

TEST_CASE("intrinsic norm dominates the anisotropic one on identical samples") {
  Gen gen(81);
  for (int n = 0; n < 20; ++n) {
    INFO("case " << n);
    const double a = gen.uniform(0.1, 1.0), b = gen.uniform(-2, 2), c = gen.uniform(-1, 1);
    const SampledField F = SampledField::scalar(
        [=](double s, const Vec& x) { return std::sin(a * x(0) + b * x(1)) + c * s; });
    const double alpha = gen.uniform(0.1, 1.0);
    const SamplerSpec sp = sampler(16, static_cast<unsigned>(n + 1));
    CHECK(intrinsic_norm_est(F, alpha, langevin(), sp).value >=
          anisotropic_norm_est(SampledField::spatial([&](const Vec& x) { return F.levels[0](sp.t_lo, x)(0); }),
                               alpha, langevin(), sp)
                  .components.increment);
  }
}

TEST_CASE("intrinsic Taylor polynomial") {
  const SampledField q = SampledField::scalar(
      [](double, const Vec& x) { return 1.0 + 2.0 * x(0) - 0.5 * x(0) * x(0); },
      [](double, const Vec& x) { return Vec::Constant(1, 2.0 - x(0)); },
      [](double, const Vec&) { return Mat::Constant(1, 1, -1.0); });
  const Vec y = v2(0.3, -0.7);
  CHECK(taylor_t2(q, 0.2, y, Vec::Zero(2)) == q.levels[0](0.2, y)(0));
  Gen gen(91);
  for (int n = 0; n < 20; ++n) {
    const Vec z = v2(gen.uniform(-2, 2), 0.0);
    CHECK(taylor_t2(q, 0.2, y, z) == doctest::Approx(q.levels[0](0.2, y + z)(0)).epsilon(1e-14));
  }
}

TEST_CASE("Taylor remainder: bounded for the closed form, divergent on a kink") {
  const double T = 1.0;
  const SampledField u = SampledField::scalar(
      [=](double s, const Vec& x) { return x(1) + x(0) * (T - s); },
      [=](double s, const Vec&) { return Vec::Constant(1, T - s); },
      [](double, const Vec&) { return Mat::Zero(1, 1); });
  SamplerSpec sp = sampler(16);
  sp.t_hi = 0.9;
  const TaylorCheck ok = taylor_remainder_check(u, 0.25, langevin(), sp);
  CHECK(ok.bounded);
  CHECK_FALSE(ok.diverges);
  CHECK(std::isfinite(ok.worst_ratio));

  const SampledField kink = SampledField::scalar(
      [](double, const Vec& x) { return std::abs(x(0)); },
      [](double, const Vec& x) { return Vec::Constant(1, x(0) >= 0 ? 1.0 : -1.0); },
      [](double, const Vec&) { return Mat::Zero(1, 1); });
  const TaylorCheck bad = taylor_remainder_check(kink, 0.25, langevin(), sp);
  CHECK(bad.diverges);
  CHECK_FALSE(bad.bounded);
  CHECK(bad.cumulative.size() == bad.scales.size());
}

TEST_CASE("weighted sup norm") {
  const double T = 1.0;
  const SampledField bounded = SampledField::scalar([](double s, const Vec& x) { return std::cos(x(0)) * (1 + s); });
  SamplerSpec sp = sampler(16);
  sp.t_hi = T;
  const double plain = weighted_sup_norm(bounded, 0.0, 0.5, T, langevin(), sp);
  CHECK(plain > 0.0);
  const double g1 = weighted_sup_norm(bounded, 0.3, 0.5, T, langevin(), sp);
  const double g2 = weighted_sup_norm(bounded, 0.6, 0.5, T, langevin(), sp);
  CHECK(g2 <= std::max(1.0, std::pow(T, 0.3)) * g1);
  CHECK(g1 <= plain);

  const double gamma = 0.4;
  const SampledField blow = SampledField::scalar([=](double s, const Vec&) { return std::pow(T - s, -gamma); });
  CHECK(weighted_sup_norm(blow, gamma, 0.5, T, langevin(), sp) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_KIND(weighted_sup_norm(blow, 1.0, 0.5, T, langevin(), sp), ErrorKind::InvalidConfig);
}

TEST_CASE("sampler determinism and json") {
  const SamplerSpec a = sampler(8, 5);
  CHECK(a.base_point(0, 2).norm() == 0.0);
  CHECK(a.directions_in({0, 1}, 2).size() == 2 + 4);
  CHECK(a.directions_in({0, 1}, 2)[3] == sampler(8, 5).directions_in({0, 1}, 2)[3]);
  CHECK(a.scale(3) == 0.125);
  nlohmann::json j = a;
  const SamplerSpec b = j.get<SamplerSpec>();
  CHECK(b.seed == 5u);
  CHECK(b.base_points == 8);
  SamplerSpec bad = a;
  bad.levels = 0;
  CHECK_KIND(bad.validate(2), ErrorKind::InvalidConfig);

  const SampledField root = SampledField::spatial([](const Vec& x) { return std::sqrt(std::abs(x(0))); });
  const NormEstimate e = anisotropic_norm_est(root, 0.5, langevin(), a);
  nlohmann::json je = e;
  const NormEstimate r = je.get<NormEstimate>();
  CHECK(r.value == e.value);
  CHECK(r.argmax_b == e.argmax_b);
}
