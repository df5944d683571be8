// hypokin: command-line front end for the kernel, solver, oracle and verification suites.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hypokin/cauchy.hpp"
#include "hypokin/errors.hpp"
#include "hypokin/holder.hpp"
#include "hypokin/kernels.hpp"
#include "hypokin/levi.hpp"
#include "hypokin/parallel.hpp"
#include "hypokin/sde.hpp"
#include "hypokin/structure.hpp"
#include "hypokin/verify.hpp"

using namespace hypokin;
using nlohmann::json;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string out;
};

SuiteConfig load(const Globals& g) {
  SuiteConfig cfg = g.config.empty() ? parse_suite_config(json::object()) : load_suite_config(g.config);
  if (g.seed) {
    cfg.sde.seed = *g.seed;
    cfg.sampler.seed = static_cast<unsigned>(*g.seed);
  }
  return cfg;
}

Vec parse_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json eval_json(const KernelEvaluation& e) {
  json j{{"value", e.value}};
  if (e.grad_d.size()) j["grad"] = std::vector<double>(e.grad_d.data(), e.grad_d.data() + e.grad_d.size());
  if (e.hess_d.size()) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < e.hess_d.rows(); ++i) {
      std::vector<double> row;
      for (Eigen::Index k = 0; k < e.hess_d.cols(); ++k) row.push_back(e.hess_d(i, k));
      rows.push_back(row);
    }
    j["hess"] = rows;
  }
  return j;
}

void write_json(const json& j, const std::string& out) {
  if (out.empty()) {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream os(out);
  if (!os) fail(ErrorKind::IoError, "cannot open '" + out + "' for writing");
  os << j.dump(2) << '\n';
}

std::vector<std::pair<double, Vec>> points_of(const SuiteConfig& cfg, const std::vector<double>& t,
                                              const std::vector<double>& x) {
  std::vector<std::pair<double, Vec>> pts;
  if (!t.empty()) {
    const std::vector<Vec> xs = x.empty() ? cfg.x_probes : std::vector<Vec>{parse_vec(x)};
    for (double ti : t) {
      for (const Vec& xi : xs) pts.emplace_back(ti, xi);
    }
    return pts;
  }
  for (double ti : cfg.oracle_times) {
    for (const Vec& xi : cfg.x_probes) pts.emplace_back(ti, xi);
  }
  return pts;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kolmogorov operators with Hoelder coefficients: parametrix solver and checks"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  Globals g;
  app.add_option("--config", g.config, "Suite file (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Override the Monte Carlo and sampler seed");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Output file or directory");

  auto* structure = app.add_subcommand("structure", "Kalman rank and block structure of B");

  auto* kernel = app.add_subcommand("kernel", "Evaluate Z, Phi and p = Z + Phi at one point pair");
  double kt = 0.0, ks = 1.0;
  std::vector<double> kx, ky;
  int korder = 0;
  kernel->add_option("--t", kt, "Start time")->required();
  kernel->add_option("--s", ks, "End time")->required();
  kernel->add_option("--x", kx, "Start point")->required()->delimiter(',');
  kernel->add_option("--y", ky, "End point")->required()->delimiter(',');
  kernel->add_option("--order", korder, "x-derivative order")->check(CLI::Range(0, 2));

  auto* solve = app.add_subcommand("solve", "Solve the Cauchy problem at grid points; CSV output");
  std::vector<double> st, sx;
  solve->add_option("--t", st, "Times (default: the suite's oracle times)")->delimiter(',');
  solve->add_option("--x", sx, "One point (default: the suite's x-probes)")->delimiter(',');

  auto* sde = app.add_subcommand("sde", "Feynman-Kac Monte Carlo estimates");
  std::vector<double> mt, mx;
  std::string dump;
  sde->add_option("--t", mt, "Times")->delimiter(',');
  sde->add_option("--x", mx, "One point")->delimiter(',');
  sde->add_option("--dump-paths", dump, "CSV of terminal states for the first point");

  auto* holder = app.add_subcommand("holder", "Sampled anisotropic norm of the terminal datum");
  double halpha = 0.5;
  holder->add_option("--alpha", halpha, "Regularity order in (0, 3]")->check(CLI::Range(0.0, 3.0));

  auto* verify = app.add_subcommand("verify", "Run the verification suite and write reports");

  CLI11_PARSE(app, argc, argv);

  try {
    set_num_threads(g.threads);
    const SuiteConfig cfg = load(g);

    if (*structure) {
      const MatX B = cfg.problem.drift();
      const KalmanResult k = kalman_rank(B, cfg.problem.d);
      json j{{"N", B.rows()}, {"d", cfg.problem.d}, {"kalman_rank", k.rank},
             {"hormander", k.controllable}};
      if (k.controllable) j["structure"] = block_structure(B, cfg.problem.d);
      write_json(j, g.out);
      return k.controllable ? 0 : 1;
    }

    if (*verify) {
      const VerificationReport rep = run_verification_suite(cfg);
      const std::string dir = g.out.empty() ? cfg.out_dir : g.out;
      emit_reports(rep, dir, cfg.formats);
      for (const auto& c : rep.checks) {
        std::printf("%-4s %-10s %-28s measured=%-14.6g target=%g\n",
                    c.pass ? "ok" : (c.mandatory ? "FAIL" : "warn"), c.stage.c_str(),
                    c.name.c_str(), c.measured, c.target);
      }
      for (const auto& s : rep.skipped_stages) std::printf("skip %s\n", s.c_str());
      std::printf("%s: %s (%.1f s)\n", rep.suite.c_str(), rep.pass() ? "PASS" : "FAIL",
                  rep.wall_seconds);
      return rep.pass() ? 0 : 1;
    }

    const CauchyProblem pb = cfg.problem.build();

    if (*kernel) {
      const Vec x = parse_vec(kx);
      const Vec y = parse_vec(ky);
      const LeviExpansion L(pb.cf, pb.S, cfg.solver.levi);
      const KernelEvaluation z = parametrix(pb.cf, pb.S, kt, x, ks, y, korder);
      const KernelEvaluation phi = L.phi(kt, x, ks, y, korder);
      json j{{"Z", eval_json(z)}, {"Phi", eval_json(phi)}, {"p", eval_json(z + phi)},
             {"H", L.kernel(kt, x, ks, y)}};
      write_json(j, g.out);
      return 0;
    }

    if (*solve) {
      const auto pts = points_of(cfg, st, sx);
      const auto sol = solve_cauchy(pb, cfg.solver, pts, 2);
      std::vector<std::pair<double, Vec>> inner;
      std::vector<double> res(pts.size(), std::nan(""));
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (pts[i].first + 2.0 * default_dt_probe(pts[i].first, pb.T) < pb.T) {
          inner.push_back(pts[i]);
          idx.push_back(i);
        }
      }
      const auto r = residual_check(pb, cfg.solver, inner);
      for (std::size_t k = 0; k < idx.size(); ++k) res[idx[k]] = r[k];
      write_solution_csv(g.out.empty() ? "solution.csv" : g.out, sol, res);
      return 0;
    }

    if (*sde) {
      const auto pts = points_of(cfg, mt, mx);
      json rows = json::array();
      for (const auto& [t, x] : pts) {
        const McEstimate e = feynman_kac_estimate(pb, cfg.sde, t, x);
        rows.push_back({{"t", t},
                        {"x", std::vector<double>(x.data(), x.data() + x.size())},
                        {"estimate", e}});
      }
      if (!dump.empty() && !pts.empty()) {
        std::function<double(double, const Vec&)> f;
        if (!pb.f.is_zero) f = pb.f.value;
        const PathBatch b = simulate_paths(pb.cf, pb.S, cfg.sde, pts[0].first, pts[0].second, pb.T, f);
        write_paths_csv(dump, b.terminal);
      }
      write_json(json{{"sde", cfg.sde}, {"estimates", rows}}, g.out);
      return 0;
    }

    if (*holder) {
      const SampledField F = SampledField::spatial(pb.g.value, pb.g.grad, pb.g.hess);
      const NormEstimate e = anisotropic_norm_est(F, halpha, pb.S, cfg.sampler);
      write_json(json{{"alpha", halpha}, {"datum", cfg.problem.datum}, {"norm", e}}, g.out);
      return 0;
    }

  } catch (const Error& e) {
    std::fprintf(stderr, "hypokin: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "hypokin: %s\n", e.what());
    return 2;
  }
  return 0;
}
