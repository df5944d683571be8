#include "hypokin/holder.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "hypokin/errors.hpp"
#include "hypokin/fit.hpp"

namespace hypokin {

namespace {

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};

double radical_inverse(int i, int base) {
  double inv = 1.0 / base, f = inv, out = 0.0;
  while (i > 0) {
    out += f * (i % base);
    i /= base;
    f *= inv;
  }
  return out;
}

double frac(double v) { return v - std::floor(v); }

/// Seeded Cranley-Patterson shift per axis (axis N is time).
double shift(unsigned seed, int axis) {
  std::mt19937_64 rng(seed * 1000003ULL + static_cast<unsigned>(axis));
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

std::vector<int> coordinate_range(int from, int to) {
  std::vector<int> out;
  for (int i = from; i < to; ++i) out.push_back(i);
  return out;
}

/// Scales u by h^{weight} per coordinate so that |delta|_B is proportional to h.
Vec anisotropic_step(const Vec& u, double h, const DriftStructure& S) {
  Vec out(u.size());
  for (int i = 0; i < u.size(); ++i) out(i) = std::pow(h, S.weights[i]) * u(i);
  return out;
}

std::vector<double> point(double t, const Vec& x) {
  std::vector<double> out{t};
  for (int i = 0; i < x.size(); ++i) out.push_back(x(i));
  return out;
}

struct Quotient {
  double value = 0.0;
  std::vector<double> a, b;
  long long pairs = 0;

  void offer(double q, double ta, const Vec& xa, double tb, const Vec& xb) {
    ++pairs;
    if (q > value) {
      value = q;
      a = point(ta, xa);
      b = point(tb, xb);
    }
  }
};

struct SliceNorm {
  double total = 0.0;
  NormComponents parts;
  Quotient top;
  long long pairs = 0;
};

class Estimator {
 public:
  Estimator(const SampledField& F, const DriftStructure& S, const SamplerSpec& sampler)
      : F_(F), S_(S), sp_(sampler) {
    sp_.validate(S.N);
    for (int i = 0; i < sp_.base_points; ++i) base_.push_back(sp_.base_point(i, S.N));
    full_dirs_ = sp_.directions_in(coordinate_range(0, S.N), S.N);
    if (S.N > S.d) degenerate_dirs_ = sp_.directions_in(coordinate_range(S.d, S.N), S.N);
  }

  VecX value(int level, double t, const Vec& x) const {
    if (level >= static_cast<int>(F_.levels.size()) || !F_.levels[level]) {
      fail(ErrorKind::MissingDerivative,
           "derivative of order " + std::to_string(level) + " was not supplied");
    }
    return F_.levels[level](t, x);
  }

  /// ||v(t, .)||_{C^a_B} for the level-th derivative on one time slice.
  SliceNorm anisotropic(int level, double a, double t) const {
    SliceNorm out;
    const bool degenerate_only = a > 1.0;
    const auto& dirs = degenerate_only ? degenerate_dirs_ : full_dirs_;
    for (const Vec& x : base_) {
      const VecX vx = value(level, t, x);
      out.parts.sup = std::max(out.parts.sup, vx.norm());
      for (const Vec& u : dirs) {
        for (int k = 0; k < sp_.levels; ++k) {
          const Vec delta = anisotropic_step(u, sp_.scale(k), S_);
          const Vec y = x + delta;
          const VecX vy = value(level, t, y);
          out.parts.sup = std::max(out.parts.sup, vy.norm());
          const double q = (vy - vx).norm() / std::pow(anisotropic_norm(delta, S_), a);
          out.top.offer(q, t, x, t, y);
        }
      }
    }
    out.parts.increment = out.top.value;
    out.pairs = out.top.pairs;
    out.total = out.parts.sup + out.parts.increment;
    if (a > 1.0) {
      const SliceNorm grad = anisotropic(level + 1, a - 1.0, t);
      out.parts.gradient = grad.total;
      out.total += grad.total;
      out.pairs += grad.pairs;
    }
    return out;
  }

  /// sup over slices of the slice norm
  SliceNorm anisotropic_all(int level, double a, const std::vector<double>& times) const {
    SliceNorm best;
    long long pairs = 0;
    for (double t : times) {
      SliceNorm s = anisotropic(level, a, t);
      pairs += s.pairs;
      if (s.total >= best.total) best = std::move(s);
    }
    best.pairs = pairs;
    return best;
  }

  Quotient lie(int level, double a, const std::vector<double>& times) const {
    Quotient q;
    for (const Vec& x : base_) {
      for (double tau : times) {
        const VecX here = value(level, tau, x);
        for (double s : times) {
          if (s == tau) continue;
          const Vec moved = S_.exp(s - tau) * x;
          const double num = (value(level, s, moved) - here).norm();
          q.offer(num / std::pow(std::abs(s - tau), a / 2.0), tau, x, s, moved);
        }
      }
    }
    return q;
  }

  SliceNorm intrinsic(int level, double a, const std::vector<double>& times) const {
    // L^inf(C^a_B) part; for a > 1 it carries its own anisotropic gradient term
    SliceNorm out = anisotropic_all(level, a, times);
    if (a > 1.0) {
      const SliceNorm grad = intrinsic(level + 1, a - 1.0, times);
      out.parts.gradient = grad.total;
      out.total += grad.total;
      out.pairs += grad.pairs;
    }
    if (a <= 2.0) {
      const Quotient q = lie(level, a, times);
      out.parts.lie = q.value;
      out.total += q.value;
      out.pairs += q.pairs;
      if (q.value > out.top.value) out.top = q;
    } else {
      if (level != 0 || !F_.Yf) fail(ErrorKind::MissingDerivative, "Yf is required above order 2");
      SampledField yf;
      yf.levels.push_back([this](double t, const Vec& x) {
        VecX v(1);
        v(0) = F_.Yf(t, x);
        return v;
      });
      const Estimator inner(yf, S_, sp_);
      const SliceNorm y = inner.anisotropic_all(0, a - 2.0, times);
      out.parts.yf = y.total;
      out.total += y.total;
      out.pairs += y.pairs;
    }
    return out;
  }

  const SamplerSpec& sampler() const { return sp_; }

 private:
  const SampledField& F_;
  const DriftStructure& S_;
  SamplerSpec sp_;
  std::vector<Vec> base_;
  std::vector<Vec> full_dirs_;
  std::vector<Vec> degenerate_dirs_;
};

NormEstimate to_estimate(const SliceNorm& s) {
  NormEstimate e;
  e.value = s.total;
  e.n_pairs = s.pairs;
  e.argmax_a = s.top.a;
  e.argmax_b = s.top.b;
  e.components = s.parts;
  return e;
}

void check_order(double alpha, double hi) {
  if (!(alpha > 0.0 && alpha <= hi)) {
    fail(ErrorKind::InvalidConfig, "Hoelder order out of range");
  }
}

}  // namespace

void SamplerSpec::validate(int N) const {
  if ((box_lo.size() != 0 && box_lo.size() != N) || box_lo.size() != box_hi.size()) {
    fail(ErrorKind::InvalidConfig, "sampler box must have N entries per side");
  }
  for (int i = 0; i < box_lo.size(); ++i) {
    if (!(box_hi(i) > box_lo(i))) fail(ErrorKind::InvalidConfig, "empty sampler box");
  }
  if (N > static_cast<int>(std::size(kPrimes))) fail(ErrorKind::InvalidConfig, "N too large");
  if (base_points < 1 || directions < 0 || levels < 1 || !(h0 > 0.0) || !(t_hi > t_lo)) {
    fail(ErrorKind::InvalidConfig, "invalid sampler parameters");
  }
}

double SamplerSpec::scale(int k) const { return h0 * std::ldexp(1.0, -k); }

Vec SamplerSpec::base_point(int i, int N) const {
  Vec out(N);
  for (int j = 0; j < N; ++j) {
    const double lo = box_lo.size() ? box_lo(j) : -1.0;
    const double hi = box_hi.size() ? box_hi(j) : 1.0;
    const double u = i == 0 ? 0.5 : frac(radical_inverse(i, kPrimes[j]) + shift(seed, j));
    out(j) = lo + (hi - lo) * u;
  }
  return out;
}

std::vector<double> SamplerSpec::times() const {
  const double len = t_hi - t_lo;
  std::vector<double> out;
  const double sh = shift(seed, 99);
  for (int i = 0; i < base_points; ++i) {
    const double u = frac(radical_inverse(i + 1, 2) + sh);
    if (u > 0.0) out.push_back(t_lo + len * u);
  }
  for (int k = 1; k <= levels; ++k) {
    out.push_back(t_lo + len * std::ldexp(1.0, -k));
    out.push_back(t_hi - len * std::ldexp(1.0, -k));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<Vec> SamplerSpec::directions_in(const std::vector<int>& coords, int N) const {
  std::vector<Vec> out;
  for (int c : coords) {
    Vec e = Vec::Zero(N);
    e(c) = 1.0;
    out.push_back(e);
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (int k = 0; k < directions; ++k) {
    Vec u = Vec::Zero(N);
    for (int c : coords) u(c) = normal(rng);
    const double n = u.norm();
    if (n > 0.0) out.push_back(u / n);
  }
  return out;
}

void to_json(nlohmann::json& j, const SamplerSpec& s) {
  auto vec = [](const VecX& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  j = nlohmann::json{{"box_lo", vec(s.box_lo)},     {"box_hi", vec(s.box_hi)},
                     {"t_lo", s.t_lo},              {"t_hi", s.t_hi},
                     {"base_points", s.base_points}, {"directions", s.directions},
                     {"levels", s.levels},          {"h0", s.h0},
                     {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SamplerSpec& s) {
  auto vec = [](const std::vector<double>& v) {
    return VecX(Eigen::Map<const VecX>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  if (j.contains("box_lo")) s.box_lo = vec(j.at("box_lo").get<std::vector<double>>());
  if (j.contains("box_hi")) s.box_hi = vec(j.at("box_hi").get<std::vector<double>>());
  s.t_lo = j.value("t_lo", s.t_lo);
  s.t_hi = j.value("t_hi", s.t_hi);
  s.base_points = j.value("base_points", s.base_points);
  s.directions = j.value("directions", s.directions);
  s.levels = j.value("levels", s.levels);
  s.h0 = j.value("h0", s.h0);
  s.seed = j.value("seed", s.seed);
}

SampledField SampledField::scalar(std::function<double(double, const Vec&)> f,
                                  std::function<Vec(double, const Vec&)> grad_d,
                                  std::function<Mat(double, const Vec&)> hess_d,
                                  std::function<double(double, const Vec&)> Yf) {
  SampledField out;
  out.levels.push_back([f](double t, const Vec& x) {
    VecX v(1);
    v(0) = f(t, x);
    return v;
  });
  if (grad_d) {
    out.levels.push_back([grad_d](double t, const Vec& x) { return VecX(grad_d(t, x)); });
    if (hess_d) {
      out.levels.push_back([hess_d](double t, const Vec& x) {
        const Mat h = hess_d(t, x);
        return VecX(Eigen::Map<const VecX>(h.data(), h.size()));
      });
    }
  }
  out.Yf = std::move(Yf);
  return out;
}

SampledField SampledField::spatial(std::function<double(const Vec&)> g,
                                   std::function<Vec(const Vec&)> grad_d,
                                   std::function<Mat(const Vec&)> hess_d) {
  std::function<Vec(double, const Vec&)> gd;
  std::function<Mat(double, const Vec&)> hd;
  if (grad_d) gd = [grad_d](double, const Vec& x) { return grad_d(x); };
  if (hess_d) hd = [hess_d](double, const Vec& x) { return hess_d(x); };
  return scalar([g](double, const Vec& x) { return g(x); }, gd, hd,
                [](double, const Vec&) { return 0.0; });
}

void to_json(nlohmann::json& j, const NormEstimate& e) {
  j = nlohmann::json{{"value", e.value},
                     {"n_pairs", e.n_pairs},
                     {"argmax_pair", {e.argmax_a, e.argmax_b}},
                     {"components",
                      {{"sup", e.components.sup},
                       {"gradient", e.components.gradient},
                       {"increment", e.components.increment},
                       {"lie", e.components.lie},
                       {"yf", e.components.yf}}}};
}

void from_json(const nlohmann::json& j, NormEstimate& e) {
  e.value = j.at("value").get<double>();
  e.n_pairs = j.at("n_pairs").get<long long>();
  const auto& pair = j.at("argmax_pair");
  e.argmax_a = pair.at(0).get<std::vector<double>>();
  e.argmax_b = pair.at(1).get<std::vector<double>>();
  const auto& c = j.at("components");
  e.components.sup = c.at("sup").get<double>();
  e.components.gradient = c.at("gradient").get<double>();
  e.components.increment = c.at("increment").get<double>();
  e.components.lie = c.at("lie").get<double>();
  e.components.yf = c.at("yf").get<double>();
}

NormEstimate anisotropic_norm_est(const SampledField& g, double alpha, const DriftStructure& S,
                                  const SamplerSpec& sampler) {
  check_order(alpha, 3.0);
  const Estimator est(g, S, sampler);
  return to_estimate(est.anisotropic(0, alpha, sampler.t_lo));
}

NormEstimate lie_seminorm_est(const SampledField& F, double alpha, const DriftStructure& S,
                              const SamplerSpec& sampler) {
  check_order(alpha, 2.0);
  const Estimator est(F, S, sampler);
  const Quotient q = est.lie(0, alpha, sampler.times());
  NormEstimate e;
  e.value = q.value;
  e.n_pairs = q.pairs;
  e.argmax_a = q.a;
  e.argmax_b = q.b;
  e.components.lie = q.value;
  return e;
}

NormEstimate intrinsic_norm_est(const SampledField& F, double alpha, const DriftStructure& S,
                                const SamplerSpec& sampler) {
  check_order(alpha, 3.0);
  const Estimator est(F, S, sampler);
  return to_estimate(est.intrinsic(0, alpha, sampler.times()));
}

double weighted_sup_norm(const SampledField& F, double gamma, double alpha, double T,
                         const DriftStructure& S, const SamplerSpec& sampler) {
  if (!(gamma >= 0.0 && gamma < 1.0)) fail(ErrorKind::InvalidConfig, "gamma must lie in [0,1)");
  check_order(alpha, 3.0);
  const Estimator est(F, S, sampler);
  double best = 0.0;
  for (double s : sampler.times()) {
    if (!(s < T)) continue;
    best = std::max(best, std::pow(T - s, gamma) * est.anisotropic(0, alpha, s).total);
  }
  return best;
}

double taylor_t2(const SampledField& F, double s, const Vec& y, const Vec& z) {
  if (F.levels.size() < 3 || !F.levels[1] || !F.levels[2]) {
    fail(ErrorKind::MissingDerivative, "T2 needs the gradient and Hessian");
  }
  const VecX g = F.levels[1](s, y);
  const VecX h = F.levels[2](s, y);
  const auto d = g.size();
  const Eigen::Map<const MatX> hess(h.data(), d, d);
  const VecX zd = z.head(d);
  return F.levels[0](s, y)(0) + zd.dot(g) + 0.5 * zd.dot(hess * zd);
}

TaylorCheck taylor_remainder_check(const SampledField& F, double alpha, const DriftStructure& S,
                                   const SamplerSpec& sampler) {
  check_order(alpha, 1.0);
  sampler.validate(S.N);
  if (F.levels.empty() || !F.levels[0]) fail(ErrorKind::MissingDerivative, "field value missing");
  const auto dirs = sampler.directions_in(coordinate_range(0, S.N), S.N);
  const auto times = sampler.times();
  std::vector<Vec> base;
  for (int i = 0; i < sampler.base_points; ++i) base.push_back(sampler.base_point(i, S.N));

  TaylorCheck out;
  for (int k = 0; k < sampler.levels; ++k) {
    const double h = sampler.scale(k);
    double level_sup = 0.0;
    for (double s : times) {
      for (const Vec& y : base) {
        for (int sigma : {-1, 0, 1}) {
          const double tau = s + sigma * h * h;
          if (tau <= sampler.t_lo || tau >= sampler.t_hi) continue;
          for (const Vec& u : dirs) {
            const Vec z = anisotropic_step(u, h, S);
            const Vec x = S.exp(tau - s) * y + z;
            const double num = std::abs(F.levels[0](tau, x)(0) - taylor_t2(F, s, y, z));
            const double den = std::abs(tau - s) + std::pow(anisotropic_norm(z, S), 2.0 + alpha);
            level_sup = std::max(level_sup, num / den);
          }
        }
      }
    }
    out.scales.push_back(h);
    out.level_sup.push_back(level_sup);
    out.cumulative.push_back(std::max(level_sup, out.cumulative.empty() ? 0.0 : out.cumulative.back()));
  }
  out.worst_ratio = out.cumulative.back();
  std::vector<double> sorted = out.cumulative;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[sorted.size() / 2];
  out.bounded = std::isfinite(out.worst_ratio) && out.worst_ratio < 2.0 * median;
  out.diverges = out.worst_ratio >= 10.0 * sorted.front();

  std::vector<std::pair<double, double>> pairs;
  for (std::size_t k = 0; k < out.scales.size(); ++k) {
    if (out.level_sup[k] > 0.0 && std::isfinite(out.level_sup[k])) {
      pairs.emplace_back(out.scales[k], out.level_sup[k]);
    }
  }
  out.exponent = pairs.size() >= 2 ? fit_power_law(pairs).slope : std::nan("");
  return out;
}

}  // namespace hypokin
