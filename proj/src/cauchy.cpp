#include "hypokin/cauchy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "hypokin/errors.hpp"
#include "hypokin/parallel.hpp"
#include "hypokin/quadrature.hpp"

namespace hypokin {

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

Vec read_vec(const nlohmann::json& j, const char* key, int N) {
  if (!j.contains(key)) fail(ErrorKind::InvalidConfig, std::string("datum needs '") + key + "'");
  const auto v = j.at(key).get<std::vector<double>>();
  if (static_cast<int>(v.size()) != N) {
    fail(ErrorKind::InvalidConfig, std::string("'") + key + "' needs N entries");
  }
  Vec out(N);
  for (int i = 0; i < N; ++i) out(i) = v[i];
  return out;
}

void check_coordinate(int k, int N) {
  if (k < 0 || k >= N) fail(ErrorKind::InvalidConfig, "datum coordinate out of range");
}

KernelEvaluation sum_in_order(const std::vector<KernelEvaluation>& parts, int d, int order) {
  if (parts.empty()) return KernelEvaluation::zero(d, order);
  return pairwise_sum(std::span<const KernelEvaluation>(parts));
}

void require_interval(double t, double T) {
  if (!(t < T)) fail(ErrorKind::EmptyInterval, "evaluation time must lie before T");
}

double left_grading(double alpha) { return std::min(8.0, 2.0 / alpha); }

double right_grading(double gamma) { return gamma > 0.0 ? 1.0 / (1.0 - gamma) : 1.0; }

}  // namespace

TerminalDatum zero_datum() {
  TerminalDatum g;
  g.family = "zero";
  g.beta = 3.0;
  g.value = [](const Vec&) { return 0.0; };
  g.grad = [](const Vec& y) { return Vec(Vec::Zero(y.size())); };
  g.hess = [](const Vec& y) { return Mat(Mat::Zero(y.size(), y.size())); };
  g.is_zero = true;
  g.is_constant = true;
  return g;
}

TerminalDatum constant_datum(double c) {
  TerminalDatum g = zero_datum();
  g.family = "constant";
  g.value = [c](const Vec&) { return c; };
  g.is_zero = c == 0.0;
  return g;
}

TerminalDatum affine_datum(Vec c, double offset) {
  TerminalDatum g;
  g.family = "affine";
  g.beta = 3.0;
  g.value = [c, offset](const Vec& y) { return c.dot(y) + offset; };
  g.grad = [c](const Vec&) { return c; };
  g.hess = [c](const Vec&) { return Mat(Mat::Zero(c.size(), c.size())); };
  g.w = c;
  g.amplitude = offset;
  return g;
}

TerminalDatum trig_datum(Vec w, double amplitude, double phase) {
  TerminalDatum g;
  g.family = "trig";
  g.beta = 3.0;
  g.value = [=](const Vec& y) { return amplitude * std::cos(w.dot(y) + phase); };
  g.grad = [=](const Vec& y) { return Vec(-amplitude * std::sin(w.dot(y) + phase) * w); };
  g.hess = [=](const Vec& y) {
    return Mat(-amplitude * std::cos(w.dot(y) + phase) * w * w.transpose());
  };
  g.w = w;
  g.amplitude = amplitude;
  g.phase = phase;
  return g;
}

TerminalDatum holder_sine_datum(int N, int k, double beta, double amplitude) {
  check_coordinate(k, N);
  if (!(beta > 0.0 && beta <= 2.0)) {
    fail(ErrorKind::InvalidConfig, "holder_sine needs beta in (0,2]");
  }
  TerminalDatum g;
  g.family = "holder_sine";
  g.beta = beta;
  if (beta <= 1.0) {
    g.value = [=](const Vec& y) { return amplitude * std::pow(std::abs(std::sin(y(k))), beta); };
    if (beta == 1.0) {
      g.grad = [=](const Vec& y) {
        Vec out = Vec::Zero(N);
        out(k) = amplitude * sign(std::sin(y(k))) * std::cos(y(k));
        return out;
      };
    }
    return g;
  }
  g.value = [=](const Vec& y) {
    const double s = std::sin(y(k));
    return amplitude * s * std::pow(std::abs(s), beta - 1.0);
  };
  g.grad = [=](const Vec& y) {
    Vec out = Vec::Zero(N);
    out(k) = amplitude * beta * std::pow(std::abs(std::sin(y(k))), beta - 1.0) * std::cos(y(k));
    return out;
  };
  if (beta == 2.0) {
    g.hess = [=](const Vec& y) {
      const double s = std::sin(y(k));
      const double c = std::cos(y(k));
      Mat out = Mat::Zero(N, N);
      out(k, k) = amplitude * (2.0 * sign(s) * c * c - 2.0 * std::abs(s) * s);
      return out;
    };
  }
  return g;
}

TerminalDatum power_datum(int N, int k, double beta, double amplitude) {
  check_coordinate(k, N);
  if (!(beta > 0.0 && beta <= 2.0)) fail(ErrorKind::InvalidConfig, "power needs beta in (0,2]");
  TerminalDatum g;
  g.family = "power";
  g.beta = beta;
  if (beta <= 1.0) {
    g.value = [=](const Vec& y) { return amplitude * std::pow(std::abs(y(k)), beta); };
    if (beta == 1.0) {
      g.grad = [=](const Vec& y) {
        Vec out = Vec::Zero(N);
        out(k) = amplitude * sign(y(k));
        return out;
      };
    }
    return g;
  }
  g.value = [=](const Vec& y) { return amplitude * y(k) * std::pow(std::abs(y(k)), beta - 1.0); };
  g.grad = [=](const Vec& y) {
    Vec out = Vec::Zero(N);
    out(k) = amplitude * beta * std::pow(std::abs(y(k)), beta - 1.0);
    return out;
  };
  if (beta == 2.0) {
    g.hess = [=](const Vec& y) {
      Mat out = Mat::Zero(N, N);
      out(k, k) = 2.0 * amplitude * sign(y(k));
      return out;
    };
  }
  return g;
}

TerminalDatum kink_datum(int N, int k) {
  TerminalDatum g = power_datum(N, k, 1.0);
  g.family = "kink";
  return g;
}

SourceTerm zero_source() {
  SourceTerm f;
  f.value = [](double, const Vec&) { return 0.0; };
  return f;
}

SourceTerm constant_source(double c) {
  SourceTerm f;
  f.family = "constant";
  f.value = [c](double, const Vec&) { return c; };
  f.is_zero = c == 0.0;
  return f;
}

SourceTerm weighted_source(double c, double gamma, double T, TerminalDatum profile) {
  if (!(gamma >= 0.0 && gamma < 1.0)) fail(ErrorKind::InvalidConfig, "gamma must lie in [0,1)");
  SourceTerm f;
  f.family = "weighted";
  f.gamma = gamma;
  auto shape = profile.value;
  f.value = [=](double tau, const Vec& y) { return c * std::pow(T - tau, -gamma) * shape(y); };
  f.weight_integral = [=](double a, double b) {
    return c * (std::pow(T - a, 1.0 - gamma) - std::pow(T - b, 1.0 - gamma)) / (1.0 - gamma);
  };
  f.profile = shape;
  f.is_zero = c == 0.0 || profile.is_zero;
  return f;
}

TerminalDatum make_datum(const nlohmann::json& cfg, int N, double alpha) {
  const std::string family = cfg.value("family", "zero");
  TerminalDatum g;
  if (family == "zero") {
    g = zero_datum();
  } else if (family == "constant") {
    g = constant_datum(cfg.value("value", 1.0));
  } else if (family == "affine") {
    g = affine_datum(read_vec(cfg, "c", N), cfg.value("offset", 0.0));
  } else if (family == "trig") {
    g = trig_datum(read_vec(cfg, "w", N), cfg.value("amplitude", 1.0), cfg.value("phase", 0.0));
  } else if (family == "holder_sine") {
    return holder_sine_datum(N, cfg.value("coordinate", 0), cfg.value("beta", 1.0),
                             cfg.value("amplitude", 1.0));
  } else if (family == "power") {
    return power_datum(N, cfg.value("coordinate", 0), cfg.value("beta", 1.0),
                       cfg.value("amplitude", 1.0));
  } else if (family == "kink") {
    return kink_datum(N, cfg.value("coordinate", 0));
  } else {
    fail(ErrorKind::InvalidConfig, "unknown datum family '" + family + "'");
  }
  g.beta = 2.0 + alpha;  // smooth families
  return g;
}

SourceTerm make_source(const nlohmann::json& cfg, int N, double T, double alpha) {
  const std::string family = cfg.value("family", "zero");
  if (family == "zero") return zero_source();
  if (family == "constant") return constant_source(cfg.value("value", 1.0));
  if (family == "weighted") {
    const TerminalDatum profile = cfg.contains("profile")
                                      ? make_datum(cfg.at("profile"), N, alpha)
                                      : constant_datum(1.0);
    return weighted_source(cfg.value("c", 1.0), cfg.value("gamma", 0.0), T, profile);
  }
  fail(ErrorKind::InvalidConfig, "unknown source family '" + family + "'");
}

void CauchyProblem::validate() const {
  if (!(T > 0.0)) fail(ErrorKind::InvalidConfig, "horizon T must be positive");
  if (!(alpha > 0.0 && alpha < cf.alpha_bar && cf.alpha_bar <= 1.0)) {
    fail(ErrorKind::InvalidConfig, "need 0 < alpha < alpha_bar <= 1");
  }
  // smooth data may declare beta above 2 + alpha; only the lower end is binding
  if (!(g.beta >= 0.0)) fail(ErrorKind::InvalidConfig, "beta must be non-negative");
  if (!(f.gamma >= 0.0 && f.gamma < 1.0)) fail(ErrorKind::InvalidConfig, "gamma must lie in [0,1)");
  if (!g.value || !f.value) fail(ErrorKind::InvalidConfig, "datum and source must be set");
  if (cf.d != S.d) fail(ErrorKind::InvalidConfig, "coefficient dimension differs from d");
}

void SolverConfig::validate() const {
  levi.validate();
  if (terminal_nodes < 2 || source_time_nodes < 2 || source_space_nodes < 2) {
    fail(ErrorKind::InvalidConfig, "quadrature node counts must be >= 2");
  }
  if (terminal_rule != "hermite" && terminal_rule != "composite") {
    fail(ErrorKind::InvalidConfig, "terminal_rule must be 'hermite' or 'composite'");
  }
  if (terminal_panels < 1) fail(ErrorKind::InvalidConfig, "terminal_panels must be >= 1");
}

void to_json(nlohmann::json& j, const SolverConfig& c) {
  j = nlohmann::json{{"levi", c.levi},
                     {"terminal_nodes", c.terminal_nodes},
                     {"terminal_rule", c.terminal_rule},
                     {"terminal_panels", c.terminal_panels},
                     {"source_time_nodes", c.source_time_nodes},
                     {"source_space_nodes", c.source_space_nodes}};
}

void from_json(const nlohmann::json& j, SolverConfig& c) {
  if (j.contains("levi")) c.levi = j.at("levi").get<LeviConfig>();
  c.terminal_nodes = j.value("terminal_nodes", c.terminal_nodes);
  c.terminal_rule = j.value("terminal_rule", c.terminal_rule);
  c.terminal_panels = j.value("terminal_panels", c.terminal_panels);
  c.source_time_nodes = j.value("source_time_nodes", c.source_time_nodes);
  c.source_space_nodes = j.value("source_space_nodes", c.source_space_nodes);
  c.validate();
}

KernelEvaluation potential_terminal(const CauchyProblem& pb, const SolverConfig& cfg, double t,
                                    const Vec& x, int order) {
  require_interval(t, pb.T);
  const int d = pb.S.d;
  if (pb.g.is_zero) return KernelEvaluation::zero(d, order);

  const LeviExpansion levi(pb.cf, pb.S, cfg.levi);
  const TensorHermite rule =
      cfg.terminal_rule == "composite"
          ? TensorHermite(pb.S.N, normal_composite(cfg.terminal_panels, cfg.terminal_nodes))
          : TensorHermite(pb.S.N, cfg.terminal_nodes);
  const NodeSet nodes = levi.forward_nodes(t, x, pb.T, &rule);
  const GaussianKernel shared = parametrix_kernel(pb.cf, pb.S, t, pb.T, pb.S.exp(pb.T - t) * x);
  std::vector<KernelEvaluation> parts(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const Vec& y = nodes.points[k];
    const double gy = pb.g.value(y);
    if (!std::isfinite(gy)) {
      fail(ErrorKind::DatumEvaluationError, "datum is not finite at a quadrature node");
    }
    KernelEvaluation zk = levi.parametrix_to(t, pb.T, y, &shared).eval_offset(nodes.offsets[k], order);
    zk *= std::exp(nodes.log_weight[k]) * gy;
    parts[k] = std::move(zk);
  }
  KernelEvaluation out = sum_in_order(parts, d, order);

  if (!levi.trivial() && cfg.levi.depth > 0) {
    const SpaceTimeFn w = [&](double r, const Vec& z) {
      return levi.kernel_against(r, z, pb.T, pb.g.value);
    };
    out += levi.remainder_potential(t, x, pb.T, w, order, cfg.levi.grading_exponent(pb.cf));
  }
  return out;
}

KernelEvaluation potential_source(const CauchyProblem& pb, const SolverConfig& cfg, double t,
                                  const Vec& x, PotentialKernel kernel, int order) {
  require_interval(t, pb.T);
  const int d = pb.S.d;
  KernelEvaluation out = KernelEvaluation::zero(d, order);
  if (pb.f.is_zero) return out;
  const LeviExpansion levi(pb.cf, pb.S, cfg.levi);
  const double p_right = right_grading(pb.f.gamma);

  if (kernel != PotentialKernel::Phi) {
    const TensorHermite rule(pb.S.N, cfg.source_space_nodes);
    const Rule1D times =
        graded_two_sided(t, pb.T, cfg.source_time_nodes, left_grading(pb.alpha), p_right);
    const auto parts = parallel_map<KernelEvaluation>(times.size(), [&](std::size_t i) {
      const double tau = times.nodes[i];
      const NodeSet nodes = levi.forward_nodes(t, x, tau, &rule);
      const GaussianKernel shared = parametrix_kernel(pb.cf, pb.S, t, tau, pb.S.exp(tau - t) * x);
      std::vector<KernelEvaluation> inner(nodes.size());
      for (std::size_t k = 0; k < nodes.size(); ++k) {
        const Vec& y = nodes.points[k];
        const double fy = pb.f.value(tau, y);
        if (!std::isfinite(fy)) {
          fail(ErrorKind::DatumEvaluationError, "source is not finite at a quadrature node");
        }
        KernelEvaluation zk = levi.parametrix_to(t, tau, y, &shared).eval_offset(nodes.offsets[k], order);
        zk *= std::exp(nodes.log_weight[k]) * fy;
        inner[k] = std::move(zk);
      }
      KernelEvaluation acc = sum_in_order(inner, d, order);
      acc *= times.weights[i];
      return acc;
    });
    out += sum_in_order(parts, d, order);
  }

  if (kernel != PotentialKernel::Z && !levi.trivial() && cfg.levi.depth > 0) {
    const double grading = cfg.levi.grading_exponent(pb.cf);
    // F(r,z) = int_r^T int H(r,z;tau,y) f(tau,y) dy dtau
    const SpaceTimeFn F = [&](double r, const Vec& z) {
      const Rule1D times = graded_two_sided(r, pb.T, cfg.levi.time_nodes, grading, p_right);
      std::vector<double> parts(times.size());
      for (std::size_t j = 0; j < times.size(); ++j) {
        const double tau = times.nodes[j];
        parts[j] = times.weights[j] *
                   levi.kernel_against(r, z, tau, [&](const Vec& y) { return pb.f.value(tau, y); });
      }
      return pairwise_sum(std::span<const double>(parts));
    };
    out += levi.remainder_potential(t, x, pb.T, F, order, grading);
  }
  return out;
}

double apply_A(const CoefficientField& cf, double t, const Vec& x, double u, const Vec& grad_d,
               const Mat& hess_d) {
  double out = 0.5 * cf.a2(t, x).cwiseProduct(hess_d).sum();
  if (!cf.zero_lower_order) out += cf.a1(t, x).dot(grad_d) + cf.a0(t, x) * u;
  return out;
}

namespace {

SolutionSample solve_point(const CauchyProblem& pb, const SolverConfig& cfg, double t,
                           const Vec& x, int order) {
  KernelEvaluation u = potential_terminal(pb, cfg, t, x, order);
  if (!pb.f.is_zero) {
    u += -1.0 * potential_source(pb, cfg, t, x, PotentialKernel::P, order);
  }
  SolutionSample s;
  s.t = t;
  s.x = x;
  s.u = u.value;
  s.grad_d = u.grad_d;
  s.hess_d = u.hess_d;
  if (order >= 2) s.Yu = pb.f.value(t, x) - apply_A(pb.cf, t, x, s.u, s.grad_d, s.hess_d);
  bool finite = std::isfinite(s.u) && std::isfinite(s.Yu) && s.grad_d.allFinite() &&
                s.hess_d.allFinite();
  if (!finite) {
    std::vector<double> where{t};
    for (int i = 0; i < x.size(); ++i) where.push_back(x(i));
    throw NumericalDivergence("non-finite solution component", std::move(where));
  }
  return s;
}

}  // namespace

std::vector<SolutionSample> solve_cauchy(const CauchyProblem& pb, const SolverConfig& cfg,
                                         const std::vector<std::pair<double, Vec>>& points,
                                         int order) {
  pb.validate();
  cfg.validate();
  return parallel_map<SolutionSample>(points.size(), [&](std::size_t i) {
    return solve_point(pb, cfg, points[i].first, points[i].second, order);
  });
}

double default_dt_probe(double t, double T) { return std::clamp((T - t) / 1000.0, 1e-6, 1e-3); }

std::vector<double> residual_check(const CauchyProblem& pb, const SolverConfig& cfg,
                                   const std::vector<std::pair<double, Vec>>& points,
                                   std::optional<double> dt_probe) {
  pb.validate();
  cfg.validate();
  return parallel_map<double>(points.size(), [&](std::size_t i) {
    const auto& [t, x] = points[i];
    const double dt = dt_probe.value_or(default_dt_probe(t, pb.T));
    if (!(dt > 0.0) || !(t + dt < pb.T)) {
      fail(ErrorKind::EmptyInterval, "residual probe leaves (0, T)");
    }
    const SolutionSample here = solve_point(pb, cfg, t, x, 2);
    const SolutionSample ahead = solve_point(pb, cfg, t + dt, pb.S.exp(dt) * x, 0);
    // A u - f = -Yu by construction
    return (ahead.u - here.u) / dt - here.Yu;
  });
}

RegYResult boundary_regY_check(const CauchyProblem& pb, const SolverConfig& cfg,
                               const std::vector<Vec>& xs, const std::vector<double>& ts) {
  if (ts.size() < 3) fail(ErrorKind::InsufficientData, "need at least 3 times");
  if (xs.empty()) fail(ErrorKind::InsufficientData, "need at least one spatial probe");
  pb.validate();
  RegYResult out;
  std::vector<std::pair<double, Vec>> points;
  for (double t : ts) {
    for (const Vec& x : xs) points.emplace_back(t, pb.S.exp(t - pb.T) * x);
  }
  const auto samples = solve_cauchy(pb, cfg, points, 0);
  double largest = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    double sup = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      sup = std::max(sup, std::abs(samples[i * xs.size() + k].u - pb.g.value(xs[k])));
    }
    out.pairs.emplace_back(pb.T - ts[i], sup);
    largest = std::max(largest, sup);
  }
  const double floor = 1e-11;
  out.degenerate = std::any_of(out.pairs.begin(), out.pairs.end(),
                               [&](const auto& p) { return p.second <= floor; });
  if (out.degenerate) {
    out.fit.slope = std::nan("");
    out.fit.n = out.pairs.size();
    return out;
  }
  out.fit = fit_power_law(out.pairs, 3);
  return out;
}

void write_solution_csv(const std::string& path, const std::vector<SolutionSample>& samples,
                        const std::vector<double>& residuals) {
  std::ofstream os(path);
  if (!os) fail(ErrorKind::IoError, "cannot open '" + path + "' for writing");
  if (samples.empty()) return;
  const auto N = samples.front().x.size();
  const auto d = samples.front().grad_d.size();
  os << "t";
  for (Eigen::Index i = 0; i < N; ++i) os << ",x" << i + 1;
  os << ",u";
  for (Eigen::Index i = 0; i < d; ++i) os << ",du_" << i + 1;
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) os << ",d2u_" << i + 1 << j + 1;
  }
  os << ",Yu,residual\n";
  os << std::setprecision(17);
  for (std::size_t r = 0; r < samples.size(); ++r) {
    const auto& s = samples[r];
    os << s.t;
    for (Eigen::Index i = 0; i < s.x.size(); ++i) os << ',' << s.x(i);
    os << ',' << s.u;
    for (Eigen::Index i = 0; i < s.grad_d.size(); ++i) os << ',' << s.grad_d(i);
    for (Eigen::Index i = 0; i < s.hess_d.rows(); ++i) {
      for (Eigen::Index j = 0; j < s.hess_d.cols(); ++j) os << ',' << s.hess_d(i, j);
    }
    os << ',' << s.Yu << ',' << (r < residuals.size() ? residuals[r] : std::nan("")) << '\n';
  }
  if (!os) fail(ErrorKind::IoError, "write to '" + path + "' failed");
}

}  // namespace hypokin
