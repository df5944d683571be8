#include "hypokin/sde.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>

#include "hypokin/errors.hpp"
#include "hypokin/kernels.hpp"
#include "hypokin/parallel.hpp"

namespace hypokin {

namespace {

constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;

// Samples are reduced in fixed-size chunks so results do not depend on the worker count.
constexpr long long kChunk = 1024;

double to_unit(std::uint32_t v) { return (static_cast<double>(v) + 0.5) * 0x1p-32; }

/// Running mean and squared deviation; merged in chunk order.
struct Moments {
  long long n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double v) {
    ++n;
    const double delta = v - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (v - mean);
  }
  void merge(const Moments& o) {
    if (o.n == 0) return;
    const long long total = n + o.n;
    const double delta = o.mean - mean;
    mean += delta * static_cast<double>(o.n) / static_cast<double>(total);
    m2 += o.m2 + delta * delta * static_cast<double>(n) * static_cast<double>(o.n) /
                     static_cast<double>(total);
    n = total;
  }
};

Mat principal_root(const Mat& a2) {
  if (a2.rows() == 1) {
    if (!(a2(0, 0) >= 0.0)) fail(ErrorKind::SingularCovariance, "negative diffusion coefficient");
    return Mat::Constant(1, 1, std::sqrt(a2(0, 0)));
  }
  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (a2 + a2.transpose()));
  Vec lambda = eig.eigenvalues();
  const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
  for (int i = 0; i < lambda.size(); ++i) {
    if (lambda(i) < -1e-14 * scale) fail(ErrorKind::SingularCovariance, "a2 is not PSD");
    lambda(i) = std::sqrt(std::max(lambda(i), 0.0));
  }
  return eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
}

struct PathState {
  Vec x;
  double log_discount = 0.0;
  double source = 0.0;
};

/// Source along a path. Separable sources integrate their time weight exactly over
/// each step, so a (T - tau)^{-gamma} singularity adds no O(dt^{1-gamma}) bias.
struct PathSource {
  std::function<double(double, const Vec&)> f;
  std::function<double(double, double)> weight_integral;
  std::function<double(const Vec&)> profile;

  explicit operator bool() const { return static_cast<bool>(f) || static_cast<bool>(profile); }
  double step(double t, double dt, const Vec& x) const {
    if (profile && weight_integral) return weight_integral(t, t + dt) * profile(x);
    return f(t, x) * dt;
  }
};

/// One Euler-Maruyama path; `sign` flips the noise for the antithetic partner.
PathState euler_path(const CoefficientField& cf, const DriftStructure& S, const SdeConfig& cfg,
                     const NormalStream& rng, std::uint64_t stream, double sign, double t0,
                     const Vec& x0, double T, const PathSource& f) {
  const int d = S.d;
  const double dt = (T - t0) / cfg.n_steps;
  const double root_dt = std::sqrt(dt);
  const Mat B = S.B;
  const bool lower = !cf.zero_lower_order;
  PathState st;
  st.x = x0;
  double xi[kMaxDim];
  for (int k = 0; k < cfg.n_steps; ++k) {
    const double t = t0 + k * dt;
    if (f) st.source += std::exp(st.log_discount) * f.step(t, dt, st.x);
    if (lower) st.log_discount += cf.a0(t, st.x) * dt;
    rng.fill(stream, static_cast<std::uint32_t>(k), xi, d);
    const Vec noise = Eigen::Map<const Vec>(xi, d) * (sign * root_dt);
    Vec step = B * st.x * dt;
    Vec local = principal_root(cf.a2(t, st.x)) * noise;
    if (lower) local += cf.a1(t, st.x) * dt;
    step.head(d) += local;
    st.x += step;
  }
  return st;
}

void check_window(double t0, double T) {
  if (!(t0 < T)) fail(ErrorKind::EmptyInterval, "simulation needs t0 < T");
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c,
                                        std::array<std::uint32_t, 2> k) {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c[2];
    c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
         static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
    k[0] += kW0;
    k[1] += kW1;
  }
  return c;
}

void NormalStream::fill(std::uint64_t path, std::uint32_t step, double* out, int n) const {
  const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(seed_),
                                         static_cast<std::uint32_t>(seed_ >> 32)};
  for (int block = 0; 2 * block < n; ++block) {
    const auto r = philox4x32({static_cast<std::uint32_t>(path),
                               static_cast<std::uint32_t>(path >> 32), step,
                               static_cast<std::uint32_t>(block)},
                              key);
    // Box-Muller: two normals from each pair of uniforms; the second pair is unused
    // so block b always maps to draws 2b and 2b + 1.
    const double radius = std::sqrt(-2.0 * std::log(to_unit(r[0])));
    const double angle = 2.0 * std::numbers::pi * to_unit(r[1]);
    out[2 * block] = radius * std::cos(angle);
    if (2 * block + 1 < n) out[2 * block + 1] = radius * std::sin(angle);
  }
}

void SdeConfig::validate() const {
  if (n_paths < 1 || n_steps < 1) fail(ErrorKind::InvalidConfig, "need n_paths, n_steps >= 1");
}

void to_json(nlohmann::json& j, const SdeConfig& c) {
  j = nlohmann::json{
      {"n_paths", c.n_paths},
      {"n_steps", c.n_steps},
      {"scheme", c.scheme == SdeScheme::EulerMaruyama ? "euler-maruyama" : "exact-gaussian"},
      {"seed", c.seed},
      {"antithetic", c.antithetic}};
}

void from_json(const nlohmann::json& j, SdeConfig& c) {
  c.n_paths = j.value("n_paths", c.n_paths);
  c.n_steps = j.value("n_steps", c.n_steps);
  c.seed = j.value("seed", c.seed);
  c.antithetic = j.value("antithetic", c.antithetic);
  const std::string scheme = j.value("scheme", std::string("euler-maruyama"));
  if (scheme == "euler-maruyama") {
    c.scheme = SdeScheme::EulerMaruyama;
  } else if (scheme == "exact-gaussian") {
    c.scheme = SdeScheme::ExactGaussian;
  } else {
    fail(ErrorKind::InvalidConfig, "unknown SDE scheme '" + scheme + "'");
  }
  c.validate();
}

void to_json(nlohmann::json& j, const McEstimate& e) {
  j = nlohmann::json{{"mean", e.mean}, {"std_error", e.std_error}, {"n_paths", e.n_paths}};
}

PathBatch simulate_paths(const CoefficientField& cf, const DriftStructure& S, const SdeConfig& cfg,
                         double t0, const Vec& x0, double T,
                         const std::function<double(double, const Vec&)>& f) {
  cfg.validate();
  check_window(t0, T);
  if (cfg.scheme == SdeScheme::ExactGaussian) {
    if (!cf.space_homogeneous || !cf.zero_lower_order || f) {
      fail(ErrorKind::InvalidConfig, "exact-gaussian needs constant a2 and a1 = a0 = f = 0");
    }
    PathBatch out;
    out.terminal = exact_sample_constant(S, cf.a2(t0, x0), cfg, t0, x0, T);
    out.discount.assign(static_cast<std::size_t>(out.terminal.cols()), 1.0);
    out.source.assign(out.discount.size(), 0.0);
    return out;
  }
  const NormalStream rng(cfg.seed);
  const long long n = cfg.n_paths;
  const auto states = parallel_map<PathState>(static_cast<std::size_t>(n), [&](std::size_t i) {
    const auto p = static_cast<long long>(i);
    const std::uint64_t stream = cfg.antithetic ? static_cast<std::uint64_t>(p / 2)
                                                : static_cast<std::uint64_t>(p);
    const double sign = cfg.antithetic && (p % 2 == 1) ? -1.0 : 1.0;
    return euler_path(cf, S, cfg, rng, stream, sign, t0, x0, T, PathSource{f, {}, {}});
  });
  PathBatch out;
  out.terminal.resize(S.N, n);
  out.discount.resize(static_cast<std::size_t>(n));
  out.source.resize(static_cast<std::size_t>(n));
  for (long long p = 0; p < n; ++p) {
    const auto& st = states[static_cast<std::size_t>(p)];
    out.terminal.col(p) = st.x;
    out.discount[static_cast<std::size_t>(p)] = std::exp(st.log_discount);
    out.source[static_cast<std::size_t>(p)] = st.source;
  }
  return out;
}

MatX exact_sample_constant(const DriftStructure& S, const Mat& a2, const SdeConfig& cfg, double t0,
                           const Vec& x0, double T) {
  cfg.validate();
  check_window(t0, T);
  // a2 = 0 is allowed here, so bypass the ellipticity check of the factory
  CoefficientField cf = constant_coefficients(S.d, 1.0, T);
  cf.a2 = [a2](double, const Vec&) { return a2; };
  const Mat C = frozen_covariance_matrix(cf, S, T, x0, t0, T);
  // PSD root via eigen-decomposition so that zero noise (a2 = 0) is admissible
  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (C + C.transpose()));
  const Mat root = eig.eigenvectors() *
                   eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  const Vec mean = S.exp(T - t0) * x0;
  const NormalStream rng(cfg.seed);
  MatX out(S.N, cfg.n_paths);
  double xi[kMaxDim];
  for (long long p = 0; p < cfg.n_paths; ++p) {
    const std::uint64_t stream = cfg.antithetic ? static_cast<std::uint64_t>(p / 2)
                                                : static_cast<std::uint64_t>(p);
    const double sign = cfg.antithetic && (p % 2 == 1) ? -1.0 : 1.0;
    rng.fill(stream, 0, xi, S.N);
    out.col(p) = mean + sign * (root * Eigen::Map<const Vec>(xi, S.N));
  }
  return out;
}

McEstimate feynman_kac_estimate(const CauchyProblem& pb, const SdeConfig& cfg, double t0,
                                const Vec& x0) {
  pb.validate();
  cfg.validate();
  check_window(t0, pb.T);
  const bool exact = cfg.scheme == SdeScheme::ExactGaussian;
  if (exact && (!pb.cf.space_homogeneous || !pb.cf.zero_lower_order || !pb.f.is_zero)) {
    fail(ErrorKind::InvalidConfig, "exact-gaussian needs constant a2 and a1 = a0 = f = 0");
  }
  PathSource f;
  if (!pb.f.is_zero) f = PathSource{pb.f.value, pb.f.weight_integral, pb.f.profile};

  const NormalStream rng(cfg.seed);
  Mat root;
  Vec mean;
  if (exact) {
    const Mat C = frozen_covariance_matrix(pb.cf, pb.S, pb.T, x0, t0, pb.T);
    Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (C + C.transpose()));
    root = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    mean = pb.S.exp(pb.T - t0) * x0;
  }

  auto sample_value = [&](std::uint64_t stream, double sign) {
    double v;
    if (exact) {
      double xi[kMaxDim];
      rng.fill(stream, 0, xi, pb.S.N);
      v = pb.g.value(mean + sign * (root * Eigen::Map<const Vec>(xi, pb.S.N)));
    } else {
      const PathState st = euler_path(pb.cf, pb.S, cfg, rng, stream, sign, t0, x0, pb.T, f);
      v = std::exp(st.log_discount) * pb.g.value(st.x) - st.source;
    }
    if (!std::isfinite(v)) {
      std::vector<double> where{t0};
      for (int i = 0; i < x0.size(); ++i) where.push_back(x0(i));
      throw NumericalDivergence("non-finite path functional", std::move(where));
    }
    return v;
  };

  // antithetic pairs form one independent sample each
  const long long samples = cfg.antithetic ? (cfg.n_paths + 1) / 2 : cfg.n_paths;
  const long long chunks = (samples + kChunk - 1) / kChunk;
  const auto parts = parallel_map<Moments>(static_cast<std::size_t>(chunks), [&](std::size_t c) {
    Moments m;
    const long long begin = static_cast<long long>(c) * kChunk;
    const long long end = std::min(samples, begin + kChunk);
    for (long long s = begin; s < end; ++s) {
      const auto stream = static_cast<std::uint64_t>(s);
      m.add(cfg.antithetic ? 0.5 * (sample_value(stream, 1.0) + sample_value(stream, -1.0))
                           : sample_value(stream, 1.0));
    }
    return m;
  });
  Moments total;
  for (const Moments& m : parts) total.merge(m);

  McEstimate out;
  out.mean = total.mean;
  out.n_paths = total.n;
  const double var = total.n > 1 ? total.m2 / static_cast<double>(total.n - 1) : 0.0;
  out.std_error = std::sqrt(std::max(var, 0.0) / static_cast<double>(total.n));
  return out;
}

std::vector<double> kde_whitened(const MatX& samples, const Mat& C, const std::vector<Vec>& probes) {
  const auto n = samples.cols();
  const auto N = static_cast<int>(samples.rows());
  if (n < 2) fail(ErrorKind::InsufficientData, "density estimate needs samples");
  const CovarianceMatrix cov = CovarianceMatrix::factor(C);
  const MatX white =
      cov.chol.triangularView<Eigen::Lower>().solve(samples);  // L^{-1} X, column-wise
  const double h = std::pow(static_cast<double>(n), -1.0 / (N + 4));
  const double norm = std::exp(-0.5 * (N * std::log(2.0 * std::numbers::pi) + cov.logdet)) /
                      (std::pow(h, N) * static_cast<double>(n));
  std::vector<double> out;
  for (const Vec& y : probes) {
    const VecX wy = cov.whiten(y);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      acc += std::exp(-0.5 * (white.col(i) - wy).squaredNorm() / (h * h));
    }
    out.push_back(norm * acc);
  }
  return out;
}

void write_paths_csv(const std::string& path, const MatX& terminal) {
  std::ofstream os(path);
  if (!os) fail(ErrorKind::IoError, "cannot open '" + path + "' for writing");
  for (Eigen::Index i = 0; i < terminal.rows(); ++i) os << (i ? "," : "") << 'x' << i + 1;
  os << '\n' << std::setprecision(17);
  for (Eigen::Index p = 0; p < terminal.cols(); ++p) {
    for (Eigen::Index i = 0; i < terminal.rows(); ++i) os << (i ? "," : "") << terminal(i, p);
    os << '\n';
  }
  if (!os) fail(ErrorKind::IoError, "write to '" + path + "' failed");
}

}  // namespace hypokin
