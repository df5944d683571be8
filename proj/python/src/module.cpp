// Thin bindings: configs travel as JSON text, results come back as JSON text.
#include <string>
#include <utility>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

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

namespace py = pybind11;
using namespace hypokin;
using nlohmann::json;

namespace {

SuiteConfig suite(const std::string& text) { return parse_suite_config(json::parse(text)); }

std::vector<double> as_list(const Vec& v) { return {v.data(), v.data() + v.size()}; }

json eval_json(const KernelEvaluation& e) {
  json j{{"value", e.value}};
  if (e.grad_d.size()) j["grad"] = as_list(e.grad_d);
  if (e.hess_d.size()) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < e.hess_d.rows(); ++i) rows.push_back(as_list(e.hess_d.row(i).transpose()));
    j["hess"] = rows;
  }
  return j;
}

}  // namespace

PYBIND11_MODULE(_hypokin, m) {
  m.doc() = "Parametrix solver for degenerate Kolmogorov operators";

  // messages start with the error kind, e.g. "HormanderViolation: ..."
  py::register_exception<Error>(m, "Error", PyExc_ValueError);

  m.def("set_num_threads", &set_num_threads, py::arg("n"));

  m.def(
      "kalman_rank",
      [](const MatX& B, int d) {
        const KalmanResult k = kalman_rank(B, d);
        return std::pair{k.rank, k.controllable};
      },
      py::arg("B"), py::arg("d"));

  m.def(
      "block_structure",
      [](const MatX& B, int d) {
        const DriftStructure S = block_structure(B, d);
        json j = S;
        j["Q"] = S.Q;
        j["weights"] = S.weights;
        return j.dump();
      },
      py::arg("B"), py::arg("d"));

  m.def(
      "kernel",
      [](const std::string& cfg, double t, const Vec& x, double s, const Vec& y, int order) {
        const SuiteConfig c = suite(cfg);
        const CauchyProblem pb = c.problem.build();
        const LeviExpansion L(pb.cf, pb.S, c.solver.levi);
        const KernelEvaluation z = parametrix(pb.cf, pb.S, t, x, s, y, order);
        const KernelEvaluation phi = L.phi(t, x, s, y, order);
        return json{{"Z", eval_json(z)}, {"Phi", eval_json(phi)}, {"p", eval_json(z + phi)}}.dump();
      },
      py::arg("config"), py::arg("t"), py::arg("x"), py::arg("s"), py::arg("y"), py::arg("order") = 0);

  m.def(
      "solve",
      [](const std::string& cfg, const std::vector<double>& ts, const std::vector<Vec>& xs, int order) {
        const SuiteConfig c = suite(cfg);
        if (ts.size() != xs.size()) fail(ErrorKind::InvalidData, "times and points differ in length");
        std::vector<std::pair<double, Vec>> pts;
        for (std::size_t i = 0; i < ts.size(); ++i) pts.emplace_back(ts[i], xs[i]);
        json rows = json::array();
        for (const SolutionSample& s : solve_cauchy(c.problem.build(), c.solver, pts, order)) {
          json r{{"t", s.t}, {"x", as_list(s.x)}, {"u", s.u}};
          if (s.grad_d.size()) r["grad"] = as_list(s.grad_d);
          if (s.hess_d.size()) r["hess"] = eval_json(KernelEvaluation{0.0, s.grad_d, s.hess_d})["hess"];
          if (order >= 2) r["Yu"] = s.Yu;
          rows.push_back(r);
        }
        return rows.dump();
      },
      py::arg("config"), py::arg("times"), py::arg("points"), py::arg("order") = 0);

  m.def(
      "feynman_kac",
      [](const std::string& cfg, double t, const Vec& x) {
        const SuiteConfig c = suite(cfg);
        return json(feynman_kac_estimate(c.problem.build(), c.sde, t, x)).dump();
      },
      py::arg("config"), py::arg("t"), py::arg("x"));

  m.def(
      "holder_norm",
      [](const std::string& cfg, double alpha) {
        const SuiteConfig c = suite(cfg);
        const CauchyProblem pb = c.problem.build();
        const SampledField F = SampledField::spatial(pb.g.value, pb.g.grad, pb.g.hess);
        return json(anisotropic_norm_est(F, alpha, pb.S, c.sampler)).dump();
      },
      py::arg("config"), py::arg("alpha"));

  m.def(
      "verify", [](const std::string& cfg) { return json(run_verification_suite(suite(cfg))).dump(); },
      py::arg("config"));
}
