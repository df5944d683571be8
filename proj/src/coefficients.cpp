#include "hypokin/coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "hypokin/errors.hpp"

namespace hypokin {

namespace {

Vec zero_or(const Vec& v, int d) {
  if (v.size() == 0) return Vec::Zero(d);
  if (v.size() != d) fail(ErrorKind::InvalidConfig, "drift vector must have d entries");
  return v;
}

void set_lower_order(CoefficientField& cf, const Vec& drift, double rate) {
  const Vec a1 = zero_or(drift, cf.d);
  cf.a1 = [a1](double, const Vec&) { return a1; };
  cf.a0 = [rate](double, const Vec&) { return rate; };
  cf.zero_lower_order = a1.cwiseAbs().maxCoeff() == 0.0 && rate == 0.0;
}

double mu_for_range(double lo, double hi) {
  if (!(lo > 0.0)) fail(ErrorKind::InvalidConfig, "diffusion coefficient must be positive");
  return std::max(hi, 1.0 / lo);
}

}  // namespace

CoefficientField constant_coefficients(int d, double sigma2, double T, Vec drift, double rate) {
  CoefficientField cf;
  cf.family = "constant";
  cf.d = d;
  cf.T = T;
  cf.a2 = [d, sigma2](double, const Vec&) { return Mat(sigma2 * Mat::Identity(d, d)); };
  cf.mu = mu_for_range(sigma2, sigma2);
  cf.alpha_bar = 1.0;
  cf.space_homogeneous = true;
  set_lower_order(cf, drift, rate);
  return cf;
}

CoefficientField constant_coefficients(const Mat& a2, double T) {
  const int d = static_cast<int>(a2.rows());
  Eigen::SelfAdjointEigenSolver<MatX> eig(MatX(0.5 * (a2 + a2.transpose())));
  CoefficientField cf = constant_coefficients(d, 1.0, T);
  const Mat sym = 0.5 * (a2 + a2.transpose());
  cf.a2 = [sym](double, const Vec&) { return sym; };
  cf.mu = mu_for_range(eig.eigenvalues().minCoeff(), eig.eigenvalues().maxCoeff());
  return cf;
}

CoefficientField space_sinusoidal(int d, double eps, int coordinate, double T, double alpha_bar,
                                  Vec drift, double rate) {
  if (!(std::abs(eps) < 1.0)) fail(ErrorKind::InvalidConfig, "|eps| must be below 1");
  CoefficientField cf;
  cf.family = "space_sinusoidal";
  cf.d = d;
  cf.T = T;
  cf.a2 = [d, eps, coordinate](double, const Vec& x) {
    return Mat((1.0 + eps * std::sin(x(coordinate))) * Mat::Identity(d, d));
  };
  cf.mu = mu_for_range(1.0 - std::abs(eps), 1.0 + std::abs(eps));
  cf.alpha_bar = alpha_bar;
  cf.space_homogeneous = eps == 0.0;
  set_lower_order(cf, drift, rate);
  return cf;
}

CoefficientField time_piecewise(int d, std::vector<double> breaks, std::vector<double> levels,
                                double T, Vec drift, double rate) {
  if (levels.size() != breaks.size() + 1) {
    fail(ErrorKind::InvalidConfig, "time_piecewise needs one more level than breakpoints");
  }
  if (!std::is_sorted(breaks.begin(), breaks.end())) {
    fail(ErrorKind::InvalidConfig, "breakpoints must be increasing");
  }
  CoefficientField cf;
  cf.family = "time_piecewise";
  cf.d = d;
  cf.T = T;
  cf.breakpoints = breaks;
  cf.a2 = [d, breaks, levels](double t, const Vec&) {
    const auto k = static_cast<std::size_t>(std::upper_bound(breaks.begin(), breaks.end(), t) -
                                            breaks.begin());
    return Mat(levels[k] * Mat::Identity(d, d));
  };
  const auto [lo, hi] = std::minmax_element(levels.begin(), levels.end());
  cf.mu = mu_for_range(*lo, *hi);
  cf.alpha_bar = 1.0;
  cf.space_homogeneous = true;
  set_lower_order(cf, drift, rate);
  return cf;
}

CoefficientField make_coefficients(const nlohmann::json& cfg, int d, double T) {
  const std::string family = cfg.value("family", "constant");
  Vec drift = Vec::Zero(d);
  if (cfg.contains("a1")) {
    const auto v = cfg.at("a1").get<std::vector<double>>();
    if (static_cast<int>(v.size()) != d) fail(ErrorKind::InvalidConfig, "a1 needs d entries");
    for (int i = 0; i < d; ++i) drift(i) = v[i];
  }
  const double rate = cfg.value("a0", 0.0);

  CoefficientField cf;
  if (family == "constant") {
    cf = constant_coefficients(d, cfg.value("sigma2", 1.0), T, drift, rate);
  } else if (family == "space_sinusoidal") {
    cf = space_sinusoidal(d, cfg.value("eps", 0.3), cfg.value("coordinate", d), T,
                          cfg.value("alpha_bar", 1.0 / 3.0), drift, rate);
  } else if (family == "time_piecewise") {
    cf = time_piecewise(d, cfg.value("breaks", std::vector<double>{0.5}),
                        cfg.value("levels", std::vector<double>{0.5, 1.5}), T, drift, rate);
  } else {
    fail(ErrorKind::InvalidConfig, "unknown coefficient family '" + family + "'");
  }
  cf.time_nodes = cfg.value("time_nodes", cf.time_nodes);
  return cf;
}

EllipticityReport check_ellipticity(const CoefficientField& cf, int N, int samples,
                                    unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-5.0, 5.0);
  std::uniform_real_distribution<double> time(0.0, cf.T);
  EllipticityReport rep;
  rep.min_eigen = std::numeric_limits<double>::infinity();
  rep.max_eigen = 0.0;
  for (int k = 0; k < samples; ++k) {
    Vec x(N);
    for (int i = 0; i < N; ++i) x(i) = unif(rng);
    const Mat a = cf.a2(time(rng), x);
    rep.asymmetry = std::max(rep.asymmetry, (a - a.transpose()).cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (a + a.transpose()));
    rep.min_eigen = std::min(rep.min_eigen, eig.eigenvalues().minCoeff());
    rep.max_eigen = std::max(rep.max_eigen, eig.eigenvalues().maxCoeff());
  }
  rep.ok = rep.asymmetry <= 1e-12 && rep.min_eigen >= 1.0 / cf.mu - 1e-14 &&
           rep.max_eigen <= cf.mu + 1e-14;
  return rep;
}

}  // namespace hypokin
